"""Acceptance criteria, one test per criterion; each prints a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy.interpolate import RegularGridInterpolator

from mdgcnn import conv, shapes
from mdgcnn.dirac import annulus_mass_fraction, propagate
from mdgcnn.gpc import compute_all_gpc, compute_gpc
from mdgcnn.network import ArchConfig, build
from mdgcnn.network.ops import (Add, AngularMaxPool, Dense, DirConv, GcConv, GlobalAverage, Lift, Pool, Softmax,
                                Unpool)
from mdgcnn.synthetic import compare_models
from mdgcnn.windows import WindowSpec, build_windows, rotate_reference
from oracles import angdiff, graph_fd, great_circle_oracle, op_fd


def test_c1_geodesic_equals_pooled_directional(grid_windows, sphere_windows, noisy_windows, criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _, _, T in (grid_windows, sphere_windows, noisy_windows):
        f = rng.normal(size=(T.n_vertices, 3))
        for _ in range(5):
            K = rng.normal(size=(T.spec.n_rho, T.n_theta, 3, 4))
            a = conv.geodesic_conv(f, K, T)
            b = conv.angular_max_pool(conv.dir_conv(conv.lift(f, T.n_theta), K, T))
            worst = max(worst, float(np.abs(a - b).max()))
    dt = time.perf_counter() - t0
    assert criterion(1, "geodesic conv = amp of directional conv of lift", worst <= 1e-12 and dt < 10,
                     f"max deviation {worst:.2e} over 3 meshes x 5 kernels, {dt:.1f} s")


def test_c2_reference_rotation_equivariance(noisy_windows, criterion):
    t0 = time.perf_counter()
    T = noisy_windows[2]
    rng = np.random.default_rng(12)
    nr, nt = T.spec.n_rho, T.n_theta
    widths = [2, 4, 4, 3]
    layers = [conv.LayerParams.random(nr, nt, a, b, rng) for a, b in zip(widths, widths[1:])]
    phi0 = rng.normal(size=(T.n_vertices, nt, widths[0]))

    def run(tensors, phi):
        for p in layers:
            phi = conv.dir_layer(phi, p, tensors)
        return phi

    ref = run(T, phi0)
    pre_err, post_err = 0.0, 0.0
    for _ in range(20):
        v = int(rng.integers(T.n_vertices))
        k = int(rng.integers(1, nt))
        phi = phi0.copy()
        phi[v] = np.roll(phi0[v], -k, axis=0)
        out = run(rotate_reference(T, v, k), phi)
        want = ref.copy()
        want[v] = np.roll(ref[v], -k, axis=0)
        pre_err = max(pre_err, float(np.abs(out - want).max()))
        post_err = max(post_err, float(np.abs(conv.angular_max_pool(out) - conv.angular_max_pool(ref)).max()))
    dt = time.perf_counter() - t0
    assert criterion(2, "3-layer directional stack permutes under reference rotation",
                     pre_err <= 1e-6 and post_err <= 1e-6 and dt < 30,
                     f"pre-amp {pre_err:.2e}, post-amp {post_err:.2e}, 20 pairs, {dt:.1f} s")


def test_c3_planar_oracle(criterion):
    g = shapes.grid(40)
    gpcs = compute_all_gpc(g, 5.0)
    p = g.positions
    r_err = a_err = t_err = 0.0
    n = 0
    for gpc in gpcs:
        if gpc.touches_boundary:
            continue
        n += 1
        s = gpc.source
        d = p[gpc.index] - p[s]
        dist = np.linalg.norm(d, axis=1)
        m = dist > 0
        r_err = max(r_err, float(np.max(np.abs(gpc.r[m] - dist[m]) / dist[m])))
        # chart of s: counter-clockwise about +z starting at the reference direction
        ref = g.reference_direction(s)
        ang = np.arctan2(d[m, 1], d[m, 0]) - math.atan2(ref[1], ref[0])
        a_err = max(a_err, float(angdiff(gpc.theta[m], ang).max()))
        # flat transport keeps world directions; gamma is the reference of s seen from each chart
        own = np.array([math.atan2(*g.reference_direction(i)[1::-1]) for i in gpc.index])
        t_err = max(t_err, float(angdiff(gpc.gamma, math.atan2(ref[1], ref[0]) - own).max()))
    ok = r_err <= 0.01 and a_err <= 0.05 and t_err <= 0.02
    assert criterion(3, "flat 40x40 grid GPC against Euclidean geometry", ok,
                     f"{n} radius-5 patches: radius {100 * r_err:.3f} %, angle {a_err:.2e} rad, "
                     f"transport {t_err:.2e} rad")


def test_c4_sphere_transport(sphere3, criterion):
    errs = []
    for s in range(sphere3.n_vertices):
        gpc = compute_gpc(sphere3, s, 0.6)
        keep = (gpc.r <= 0.5) & (gpc.index != s)
        _, _, gamma = great_circle_oracle(sphere3, s, gpc.index[keep])
        errs.append(angdiff(gpc.gamma[keep], gamma))
    errs = np.concatenate(errs)
    assert criterion(4, "icosphere(3) transport against great-circle parallel transport", errs.mean() <= 0.1,
                     f"mean {errs.mean():.3e} rad, max {errs.max():.3e} rad over {errs.size} pairs")


def test_c5_dirac_propagation(criterion):
    t0 = time.perf_counter()
    mesh = shapes.icosphere(4)
    spec = WindowSpec(3, 16, 0.4)
    t = 0.3
    T = build_windows(mesh, compute_all_gpc(mesh, 0.6), spec)
    r = compute_gpc(mesh, 0, 1.0).dense("r")
    r = np.where(np.isfinite(r), r, np.inf)
    half = spec.radius / (spec.n_rho + 1)
    d = propagate(T, 0, t, 2, "dir")
    g = propagate(T, 0, t, 2, "geo")
    fd = annulus_mass_fraction(mesh, d, r, 2 * t, half)
    fg = annulus_mass_fraction(mesh, g, r, 2 * t, half)
    inner = r < 2 * t - half
    covered = float(np.mean(g[inner] > 1e-12 * g.max()))
    dt = time.perf_counter() - t0
    ok = fd >= 0.9 and fg < 0.5 and covered >= 0.9 and dt < 60
    assert criterion(5, "shifted Dirac twice on a 2562-vertex icosphere", ok,
                     f"directional {100 * fd:.1f} % in annulus, geodesic {100 * fg:.1f} % in annulus and "
                     f"nonzero on {100 * covered:.0f} % of the inner disc, {dt:.1f} s")


def test_c6_gradients(small_pyramid, criterion):
    rng = np.random.default_rng(16)
    T = small_pyramid.tensors[0]
    smap = small_pyramid.maps[0]
    nv, nt, nc = T.n_vertices, T.n_theta, smap.n_coarse
    cases = {
        "DirConv": (DirConv(T, 2, 3, "tanh"), [rng.normal(size=(2, nv, nt, 2))]),
        "DirConv normalized": (DirConv(T, 2, 3, "tanh", True), [rng.normal(size=(2, nv, nt, 2))]),
        "GcConv": (GcConv(T, 2, 3, "tanh"), [rng.normal(size=(2, nv, 2))]),
        "Lift": (Lift(nv, nt), [rng.normal(size=(2, nv, 3))]),
        "AngularMaxPool": (AngularMaxPool(), [rng.normal(size=(2, nv, nt, 3))]),
        "Pool": (Pool(smap, nt), [rng.normal(size=(2, nv, nt, 3))]),
        "Unpool": (Unpool(smap, nt), [rng.normal(size=(2, nc, nt, 3))]),
        "Add": (Add(), [rng.normal(size=(2, nv, 3)), rng.normal(size=(2, nv, 3))]),
        "GlobalAverage": (GlobalAverage(), [rng.normal(size=(2, nv, 3))]),
        "Dense": (Dense(3, 4), [rng.normal(size=(2, nv, 3))]),
        "Softmax": (Softmax(), [rng.normal(size=(2, 5))]),
    }
    errs = {}
    for name, (op, inputs) in cases.items():
        op.name = "op"
        errs[name] = op_fd(op, inputs, rng)
    x = rng.normal(size=(2, nv, 2))
    for model in ("mdgcnn", "gcnn"):
        cfg = ArchConfig(kind="uresnet", stacks=2, blocks=1, filters=4, in_channels=2, n_classes=3, model=model,
                         activation="tanh")
        errs[f"U-ResNet {model}"] = graph_fd(build(cfg, small_pyramid), x, rng)
    worst = max(errs, key=errs.get)
    assert criterion(6, "finite-difference gradients of every op and the full U-ResNet",
                     errs[worst] < 1e-4, f"{len(errs)} checks x 3 directions, worst {worst} {errs[worst]:.2e}")


@pytest.mark.slow
def test_c7_directional_beats_geodesic(criterion):
    t0 = time.perf_counter()
    recs = compare_models(shapes.icosphere(3), WindowSpec(2, 8, 0.3), levels=1, n_samples=500, n_test=100,
                          epochs=50, seeds=(0, 1, 2))
    dt = time.perf_counter() - t0
    acc = {(r["seed"], r["model"]): r["test_accuracy"] for r in recs}
    wins = [acc[s, "mdgcnn"] >= 0.9 and acc[s, "mdgcnn"] > acc[s, "gcnn"] for s in (0, 1, 2)]
    detail = ", ".join(f"seed {s}: {acc[s, 'mdgcnn']:.2f} vs {acc[s, 'gcnn']:.2f}" for s in (0, 1, 2))
    assert criterion(7, "oriented-texture classification, directional vs geodesic",
                     sum(wins) >= 2 and dt < 1800, f"{detail}, {dt / 60:.1f} min")


def _planar_rotated_cnn(values, spec, K, beta, pts, size):
    """Rotated-kernel planar convolution evaluated by bilinear interpolation on the unit grid.

    ``values`` holds one channel stack per grid node, ``beta`` is the world
    angle of kernel bin 0.
    """
    axis = np.arange(size, dtype=float)
    # outside the grid reads zero; only nodes far from the border are compared
    interp = RegularGridInterpolator((axis, axis), values.reshape(size, size, -1), bounds_error=False, fill_value=0.0)
    out = 0.0
    for i, rho in enumerate(spec.rhos):
        for m, th in enumerate(spec.thetas):
            q = pts + rho * np.array([math.cos(beta + th), math.sin(beta + th)])
            out = out + interp(q[:, ::-1]) @ K[i, m]
    return out


def test_c8_fixed_direction_plane_equivalence(criterion):
    size = 40
    g = shapes.grid(size)
    spec = WindowSpec(2, 8, 3.0)
    T = build_windows(g, compute_all_gpc(g, 4.5), spec)
    rng = np.random.default_rng(18)
    xy = g.positions[:, :2]
    f = np.stack([np.sin(0.31 * xy[:, 0] + 0.17 * xy[:, 1]), np.cos(0.23 * xy[:, 1] - 0.11 * xy[:, 0])], 1)
    K1 = rng.normal(size=(2, 8, 2, 3))
    b1 = rng.normal(size=3)
    K2 = rng.normal(size=(2, 8, 3, 2))

    phi1 = np.maximum(conv.dir_conv_fixed(conv.lift(f, 8), K1, T) + b1, 0)
    out = conv.dir_conv_fixed(phi1, K2, T)

    # all interior charts start at the lowest-index neighbor, the (-1, -1) diagonal
    ref = g.reference_direction(size * (size // 2) + size // 2)
    alpha0 = math.atan2(ref[1], ref[0])
    inner = np.all((xy >= 8) & (xy <= size - 9), axis=1)
    errs = []
    for l in range(8):
        beta = alpha0 + spec.thetas[l]
        psi1 = np.maximum(_planar_rotated_cnn(f, spec, K1, beta, xy, size) + b1, 0)
        psi2 = _planar_rotated_cnn(psi1, spec, K2, beta, xy[inner], size)
        errs.append(np.linalg.norm(out[inner, l] - psi2) / np.linalg.norm(psi2))
    worst = max(errs)
    assert criterion(8, "2-layer fixed-direction stack against a rotated-kernel planar CNN", worst <= 0.05,
                     f"worst relative L2 error per bin {100 * worst:.2f} %")
