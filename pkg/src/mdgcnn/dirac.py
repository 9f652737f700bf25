"""Propagation of a point source by repeated shifted-Dirac convolutions."""

import numpy as np

from . import conv
from .errors import ShapeMismatch
from .mesh import vertex_areas


def shifted_dirac_kernel(spec, t, atol=1e-9):
    """One-hot polar kernel at radius ``t`` and angle 0; ``t`` must be a window radius."""
    rhos = spec.rhos
    i = int(np.argmin(np.abs(rhos - t)))
    if abs(rhos[i] - t) > atol * max(1.0, spec.radius):
        raise ShapeMismatch(f"t={t} is not a window radius; available radii {np.round(rhos, 12).tolist()}")
    K = np.zeros((spec.n_rho, spec.n_theta, 1, 1))
    K[i, 0, 0, 0] = 1.0
    return K


def propagate(tensors, source, t, n, mode="dir"):
    """Response after ``n`` shifted-Dirac convolutions of the indicator of ``source``.

    ``mode="dir"`` lifts the indicator and applies directional convolutions;
    the returned per-vertex magnitude is the max over bins. ``mode="geo"``
    applies geodesic convolutions (max over kernel rotations at every step).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    K = shifted_dirac_kernel(tensors.spec, t)
    f = np.zeros((tensors.n_vertices, 1))
    f[source] = 1.0
    if mode == "dir":
        phi = conv.lift(f, tensors.n_theta)
        for _ in range(n):
            phi = conv.dir_conv(phi, K, tensors)
        return conv.angular_max_pool(phi)[:, 0]
    if mode == "geo":
        for _ in range(n):
            f = conv.geodesic_conv(f, K, tensors)
        return f[:, 0]
    raise ValueError(f"mode must be dir or geo, got {mode!r}")


def annulus_mass_fraction(mesh, response, radius, center, half_width):
    """Area-weighted share of ``response`` at geodesic radius ``center +- half_width``."""
    w = vertex_areas(mesh) * np.abs(response)
    total = w.sum()
    if total == 0:
        return 0.0
    return float(w[np.abs(radius - center) <= half_width].sum() / total)
