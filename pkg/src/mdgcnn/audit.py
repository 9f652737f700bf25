"""Invariant audit of a precomputed pyramid."""

import math
from dataclasses import dataclass

import numpy as np

from . import conv
from .gpc import edge_transport
from .network.ops import DirConv
from .windows import rotate_reference

TWO_PI = 2.0 * math.pi


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _barycentric(mesh, gpcs, tensors, tol=1e-9):
    nv, nr, nt = tensors.E.shape[:3]
    W = tensors.W
    s = W.sum(axis=-1)
    ok_sum = np.all((np.abs(s - 1) <= tol) | (s == 0)) and np.all(W >= 0)
    ok_sum = ok_sum and np.array_equal(s > 0, tensors.valid)
    rho, th = np.meshgrid(tensors.spec.rhos, tensors.spec.thetas, indexing="ij")
    target = np.stack([rho * np.cos(th), rho * np.sin(th)], axis=-1)
    worst = 0.0
    for v in range(nv):
        g = gpcs[v]
        xy = np.zeros((mesh.n_vertices, 2))
        xy[g.index] = g.planar()
        rec = np.einsum("rtk,rtkd->rtd", W[v], xy[tensors.E[v]])
        err = np.linalg.norm(rec - target, axis=-1)[tensors.valid[v]]
        if err.size:
            worst = max(worst, float(err.max()))
    scale = tol * max(1.0, tensors.spec.radius)
    ok_bins = (tensors.gamma_floor.min() >= 0 and tensors.gamma_floor.max() < nt
               and tensors.gamma_frac.min() >= 0 and tensors.gamma_frac.max() < 1)
    return [Check("barycentric weights", bool(ok_sum), "sum in {0,1}, nonnegative, matches valid flags"),
            Check("barycentric reconstruction", worst <= scale, f"max error {worst:.3e}"),
            Check("transported bins in range", bool(ok_bins), "floor in [0, n_theta), fraction in [0, 1)")]


def _amp_of_lift(tensors, rng):
    nt = tensors.n_theta
    f = rng.normal(size=(tensors.n_vertices, 2))
    worst = 0.0
    for _ in range(3):
        K = rng.normal(size=(tensors.spec.n_rho, nt, 2, 3))
        a = conv.geodesic_conv(f, K, tensors)
        b = conv.angular_max_pool(conv.dir_conv(conv.lift(f, nt), K, tensors))
        worst = max(worst, float(np.abs(a - b).max()))
    return Check("geodesic = max-pooled directional conv of lift", worst <= 1e-12, f"max deviation {worst:.3e}")


def _rotation_permutes(tensors, rng, n_pairs=5):
    nt, nr = tensors.n_theta, tensors.spec.n_rho
    layers = [conv.LayerParams.random(nr, nt, 2, 2, rng) for _ in range(2)]
    phi0 = rng.normal(size=(tensors.n_vertices, nt, 2))

    def run(T, phi):
        for p in layers:
            phi = conv.dir_layer(phi, p, T)
        return phi

    ref = run(tensors, phi0)
    worst = 0.0
    for _ in range(n_pairs):
        v = int(rng.integers(tensors.n_vertices))
        k = int(rng.integers(1, nt))
        phi = phi0.copy()
        phi[v] = np.roll(phi0[v], -k, axis=0)
        out = run(rotate_reference(tensors, v, k), phi)
        exp = ref.copy()
        exp[v] = np.roll(ref[v], -k, axis=0)
        worst = max(worst, float(np.abs(out - exp).max()))
    return Check("reference rotation permutes outputs", worst <= 1e-6, f"max deviation {worst:.3e}")


def _transport(mesh):
    worst = 0.0
    for i, j in mesh.edges:
        d = edge_transport(mesh, i, j) + edge_transport(mesh, j, i)
        worst = max(worst, abs((d + math.pi) % TWO_PI - math.pi))
    return Check("edge transport round trip", worst <= 1e-9, f"max residual {worst:.3e}")


def _gradient(tensors, rng):
    nt = tensors.n_theta
    op = DirConv(tensors, 2, 2, "tanh")
    op.name = "c"
    params = op.init_params(rng)
    x = rng.normal(size=(1, tensors.n_vertices, nt, 2))
    y, ctx = op.forward([x], params)
    w = rng.normal(size=y.shape)
    (gx,), gp = op.backward(ctx, w, params)
    worst = 0.0
    h = 1e-5
    for _ in range(3):
        dx = rng.normal(size=x.shape)
        dp = {k: rng.normal(size=v.shape) for k, v in params.items()}
        fp = np.sum(w * op.forward([x + h * dx], {k: params[k] + h * dp[k] for k in params})[0])
        fm = np.sum(w * op.forward([x - h * dx], {k: params[k] - h * dp[k] for k in params})[0])
        num = (fp - fm) / (2 * h)
        ana = np.sum(gx * dx) + sum(np.sum(gp[k] * dp[k]) for k in params)
        worst = max(worst, abs(num - ana) / max(abs(num), 1e-12))
    return Check("directional layer gradient", worst < 1e-4, f"max relative error {worst:.3e}")


def _planar(mesh, gpcs, tensors):
    """Extra oracle for flat meshes: GPC radius and angle against Euclidean geometry."""
    p = mesh.positions
    n = mesh.vertex_normals[0]
    if np.abs((p - p[0]) @ n).max() > 1e-9 * mesh.bbox_diagonal:
        return []
    interior = ~mesh.is_boundary_vertex
    r_err, a_err, g_err = 0.0, 0.0, 0.0
    for g in gpcs:
        if g.touches_boundary or not interior[g.source]:
            continue
        d = p[g.index] - p[g.source]
        dist = np.linalg.norm(d, axis=1)
        m = dist > 0
        r_err = max(r_err, float(np.max(np.abs(g.r[m] - dist[m]) / dist[m])))
        ang = np.array([mesh.chart_angle(g.source, x) for x in d[m]])
        a_err = max(a_err, float(np.max(np.abs((g.theta[m] - ang + math.pi) % TWO_PI - math.pi))))
        # flat transport: gamma equals the difference of chart reference angles
        ref = mesh.reference_direction(g.source)
        want = np.array([mesh.chart_angle(i, ref) for i in g.index])
        g_err = max(g_err, float(np.max(np.abs((g.gamma - want + math.pi) % TWO_PI - math.pi))))
    return [Check("planar radius (relative)", r_err <= 0.01, f"max {r_err:.3e}"),
            Check("planar angle", a_err <= 0.05, f"max {a_err:.3e} rad"),
            Check("planar transport", g_err <= 0.02, f"max {g_err:.3e} rad")]


def audit(pyramid, seed=0):
    """Run every check on every level; returns a list of :class:`Check`."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(pyramid.n_levels):
        mesh, gpcs, T = pyramid.meshes[k], pyramid.gpcs[k], pyramid.tensors[k]
        checks = _barycentric(mesh, gpcs, T) + [_amp_of_lift(T, rng), _rotation_permutes(T, rng), _transport(mesh),
                                                _gradient(T, rng)] + _planar(mesh, gpcs, T)
        for c in checks:
            c.name = f"level {k}: {c.name}"
        out += checks
    for k, m in enumerate(pyramid.maps):
        surj = np.unique(m.fine_to_coarse).size == m.n_coarse
        rng_ok = bool(np.all((m.angle_offset >= 0) & (m.angle_offset < TWO_PI)))
        out.append(Check(f"map {k}: fine-to-coarse surjective, offsets in [0, 2pi)", surj and rng_ok,
                         f"{m.n_fine} -> {m.n_coarse} vertices"))
    return out
