"""Synthetic two-class oriented-texture task on the unit sphere.

Each sample carries a disc of parallel stripes and, at a fixed geodesic
distance from the disc, a Gaussian blob. In class 0 the stripes run towards
the blob, in class 1 across it. Every sample is made of the same local
ingredients up to rotation; only the relative orientation of the stripes with
respect to a far away marker tells the classes apart.
"""

import time

import numpy as np

from .network import ArchConfig, build, train
from .pyramid import build_pyramid


def _tangent_basis(p, rng):
    a = rng.normal(size=3)
    u = a - (a @ p) * p
    u /= np.linalg.norm(u)
    return u, np.cross(p, u)


def _geodesic_distance(x, p):
    """Great-circle distance on the unit sphere between rows of ``x`` and ``p``."""
    xn = x / np.linalg.norm(x, axis=1, keepdims=True)
    return np.arccos(np.clip(xn @ p, -1.0, 1.0))


def oriented_texture_sample(mesh, label, rng, distance=0.9, disc=0.35, period=0.22, blob=0.15, noise=0.05):
    """One ``(V, 2)`` signal: stripes in channel 0, blob marker in channel 1."""
    p = rng.normal(size=3)
    p /= np.linalg.norm(p)
    u, v = _tangent_basis(p, rng)
    q = np.cos(distance) * p + np.sin(distance) * u  # blob along the great circle in direction u
    x = mesh.positions
    d_p = _geodesic_distance(x, p)
    w = v if label == 0 else u  # stripes run along u (towards the blob) when they vary along v
    phase = rng.uniform(0, 2 * np.pi)
    taper = np.clip((disc - d_p) / (0.25 * disc), 0.0, 1.0)
    stripes = np.cos(2 * np.pi * ((x - p) @ w) / period + phase) * taper
    marker = np.exp(-0.5 * (_geodesic_distance(x, q) / blob) ** 2)
    f = np.stack([stripes, marker], axis=1)
    return f + noise * rng.normal(size=f.shape)


def oriented_texture_dataset(mesh, n_samples, seed=0, **kwargs):
    """Balanced dataset ``(x, y)`` with ``x`` of shape ``(n_samples, V, 2)``."""
    rng = np.random.default_rng(seed)
    y = np.arange(n_samples) % 2
    rng.shuffle(y)
    x = np.stack([oriented_texture_sample(mesh, int(c), rng, **kwargs) for c in y])
    return x, y


def compare_models(mesh, spec, levels=1, n_samples=500, n_test=100, epochs=50, seeds=(0, 1, 2),
                   filters=8, blocks=1, data_seed=1, dtype=np.float32, progress=None):
    """Train the directional and the geodesic model on the same split for every seed.

    Returns a list of dicts with ``seed``, ``model``, ``test_accuracy`` and
    ``seconds``. ``progress`` is called with each finished record.
    """
    pyr = build_pyramid(mesh, spec, levels=levels)
    x, y = oriented_texture_dataset(mesh, n_samples, seed=data_seed)
    n_train = n_samples - n_test
    out = []
    for seed in seeds:
        for model in ("mdgcnn", "gcnn"):
            cfg = ArchConfig(stacks=levels + 1, blocks=blocks, filters=filters, in_channels=2,
                             n_classes=2, model=model)
            g = build(cfg, pyr)
            t = time.perf_counter()
            _, hist = train(g, x[:n_train], y[:n_train], epochs=epochs, seed=seed, dtype=dtype,
                            x_test=x[n_train:], y_test=y[n_train:])
            rec = {"seed": seed, "model": model, "test_accuracy": hist[-1]["test_accuracy"] if hist else float("nan"),
                   "train_accuracy": hist[-1]["accuracy"] if hist else float("nan"),
                   "seconds": time.perf_counter() - t}
            out.append(rec)
            if progress is not None:
                progress(rec)
    return out
