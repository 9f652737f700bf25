"""Window sampling of GPC patches: barycentric support and transported angles.

Each vertex ``v`` owns a polar window of ``n_rho`` radii and ``n_theta`` angles.
Every window point is located inside a triangle of the planar image of the GPC
patch of ``v``. The point stores the three corner vertices (``E``), their
barycentric weights (``W``) and, per corner, where the radial direction of the
window point lands among the angular bins of that corner once parallel
transported there (``gamma_floor`` + ``gamma_frac``).
"""

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import NotFound, TooManyInvalid

TWO_PI = 2.0 * math.pi
_SNAP = 1e-9


@dataclass(frozen=True)
class WindowSpec:
    n_rho: int
    n_theta: int
    radius: float

    def __post_init__(self):
        if self.n_rho < 1 or self.n_theta < 2 or not self.radius > 0:
            raise ValueError(f"invalid window spec {self}")

    @property
    def rhos(self):
        """Radial samples ``(i + 1) R / (n_rho + 1)``."""
        return (np.arange(self.n_rho) + 1) * self.radius / (self.n_rho + 1)

    @property
    def thetas(self):
        return TWO_PI * np.arange(self.n_theta) / self.n_theta

    def scaled(self, factor):
        return replace(self, radius=self.radius * factor)


@dataclass(frozen=True, eq=False)
class WindowTensors:
    """Discrete completed exponential map for all windows of a mesh.

    Attributes
    ----------
    spec : WindowSpec
    E : ndarray of int, shape (n_v, n_rho, n_theta, 3)
    W : ndarray, shape (n_v, n_rho, n_theta, 3)
        Barycentric weights; all zero at invalid points.
    gamma_floor : ndarray of int, shape (n_v, n_rho, n_theta, 3)
        Lower angular bin of the transported radial direction at each corner.
    gamma_frac : ndarray, shape (n_v, n_rho, n_theta, 3)
        Position between ``gamma_floor`` and the next bin, in [0, 1).
    valid : ndarray of bool, shape (n_v, n_rho, n_theta)
    """

    spec: WindowSpec
    E: np.ndarray
    W: np.ndarray
    gamma_floor: np.ndarray
    gamma_frac: np.ndarray
    valid: np.ndarray

    @property
    def n_vertices(self):
        return self.E.shape[0]

    @property
    def n_theta(self):
        return self.spec.n_theta

    @cached_property
    def spatial_operator(self):
        """Sparse ``(n_v * n_rho * n_theta, n_v)`` barycentric pull-back matrix."""
        rows = np.repeat(np.arange(self.E[..., 0].size), 3)
        return sparse.csr_matrix((self.W.ravel(), (rows, self.E.ravel())),
                                 shape=(self.E[..., 0].size, self.n_vertices))

    @cached_property
    def angular_operators(self):
        """``(A_floor, A_frac)`` acting on directional signals flattened to ``(n_v * n_theta, c)``.

        The pull-back of ``phi`` is ``A_floor @ phi + A_frac @ (phi_next - phi)``
        where ``phi_next`` is ``phi`` with its angular axis shifted by one bin.
        """
        nt = self.n_theta
        n_rows = self.E[..., 0].size
        rows = np.repeat(np.arange(n_rows), 3)
        cols = (self.E * nt + self.gamma_floor).ravel()
        shape = (n_rows, self.n_vertices * nt)
        a_floor = sparse.csr_matrix((self.W.ravel(), (rows, cols)), shape=shape)
        a_frac = sparse.csr_matrix(((self.W * self.gamma_frac).ravel(), (rows, cols)), shape=shape)
        return a_floor, a_frac

    @cached_property
    def _cast_cache(self):
        return {}

    def operators(self, kind, dtype=np.float64):
        """Sparse operator ``kind`` in {"spatial", "angular", "fixed"} cast to ``dtype``.

        A ``"_T"`` suffix gives the transposed operator(s) in CSR form.
        """
        key = (kind, np.dtype(dtype))
        if key not in self._cast_cache:
            if kind.endswith("_T"):
                op = self.operators(kind[:-2], dtype)
                if kind == "spatial_T":
                    op = op.T.tocsr()
                elif kind == "angular_T":
                    op = tuple(a.T.tocsr() for a in op)
                else:
                    op = [tuple(a.T.tocsr() for a in pair) for pair in op]
            elif kind == "spatial":
                op = self.spatial_operator.astype(dtype)
            elif kind == "angular":
                op = tuple(a.astype(dtype) for a in self.angular_operators)
            elif kind == "fixed":
                op = [tuple(a.astype(dtype) for a in pair) for pair in self.fixed_direction_operators()]
            else:
                raise KeyError(kind)
            self._cast_cache[key] = op
        return self._cast_cache[key]

    @cached_property
    def valid_fraction(self):
        """Share of located window points per vertex."""
        return self.valid.reshape(self.n_vertices, -1).mean(axis=1)

    def fixed_direction_operators(self):
        """Per output direction ``l``, ``(A_floor, A_frac)`` transporting direction ``l`` itself.

        Used by the stronger variant of directional convolution: the sampled
        bin no longer follows the radial direction ``j`` of the window point
        but the queried direction ``l``.
        """
        nt = self.n_theta
        n_rows = self.E[..., 0].size
        rows = np.repeat(np.arange(n_rows), 3)
        j = np.arange(nt)[None, None, :, None]
        shape = (n_rows, self.n_vertices * nt)
        ops = []
        for l in range(nt):
            fl = (self.gamma_floor - j + l) % nt
            cols = (self.E * nt + fl).ravel()
            ops.append((sparse.csr_matrix((self.W.ravel(), (rows, cols)), shape=shape),
                        sparse.csr_matrix(((self.W * self.gamma_frac).ravel(), (rows, cols)), shape=shape)))
        return ops


def _barycentric_many(tri, q):
    """Signed distances of points ``q`` (m, 2) to the edges of triangles ``tri`` (f, 3, 2).

    Returns ``(lam, dist)`` with shapes (f, m, 3): barycentric coordinates and,
    per corner, the signed distance to the opposite edge (positive inside).
    """
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    v0 = b - a
    v1 = c - a
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    d = q[None, :, :] - a[:, None, :]
    l1 = (d[..., 0] * v1[:, None, 1] - d[..., 1] * v1[:, None, 0]) / det[:, None]
    l2 = (v0[:, None, 0] * d[..., 1] - v0[:, None, 1] * d[..., 0]) / det[:, None]
    lam = np.stack([1.0 - l1 - l2, l1, l2], axis=-1)
    # altitude of corner k = 2 * area / length of opposite edge
    opp = np.stack([np.linalg.norm(c - b, axis=1), np.linalg.norm(c - a, axis=1),
                    np.linalg.norm(b - a, axis=1)], axis=1)
    alt = np.abs(det)[:, None] / opp
    return lam, lam * alt[:, None, :]


def _patch_faces(mesh, gpc):
    reached = np.zeros(mesh.n_vertices, dtype=bool)
    reached[gpc.index] = True
    ptr, fids = mesh.vertex_faces
    cand = np.unique(np.concatenate([fids[ptr[v]:ptr[v + 1]] for v in gpc.index]))
    cand = cand[reached[mesh.faces[cand]].all(axis=1)]
    return cand


def _locate(mesh, gpc, points, tol):
    """Best containing face and weights for each query point (planar coordinates)."""
    m = len(points)
    faces = _patch_faces(mesh, gpc)
    face_out = np.full(m, -1, dtype=np.int64)
    w_out = np.zeros((m, 3))
    if len(faces) == 0:
        return face_out, w_out
    x = np.full(mesh.n_vertices, np.nan)
    y = np.full(mesh.n_vertices, np.nan)
    xy = gpc.planar()
    x[gpc.index] = xy[:, 0]
    y[gpc.index] = xy[:, 1]
    fv = mesh.faces[faces]
    tri = np.stack([x[fv], y[fv]], axis=-1)
    det = ((tri[:, 1, 0] - tri[:, 0, 0]) * (tri[:, 2, 1] - tri[:, 0, 1])
           - (tri[:, 1, 1] - tri[:, 0, 1]) * (tri[:, 2, 0] - tri[:, 0, 0]))
    keep = np.abs(det) > 1e-14 * max(gpc.r_max, 1.0) ** 2
    faces, tri = faces[keep], tri[keep]
    if len(faces) == 0:
        return face_out, w_out
    lam, dist = _barycentric_many(tri, np.asarray(points, dtype=np.float64))
    score = dist.min(axis=-1)
    best = np.argmax(score, axis=0)
    ok = score[best, np.arange(m)] >= -tol
    lam_best = np.clip(lam[best, np.arange(m)], 0.0, None)
    lam_best /= lam_best.sum(axis=1, keepdims=True)
    face_out[ok] = faces[best[ok]]
    w_out[ok] = lam_best[ok]
    return face_out, w_out


def locate_in_gpc(gpc, mesh, point, tol=None):
    """Face of ``mesh`` whose planar GPC image contains the polar ``point``.

    Returns ``(face_index, weights)`` with weights aligned with
    ``mesh.faces[face_index]``; raises :class:`NotFound` outside the patch.
    """
    rho, theta = point
    q = np.array([[rho * math.cos(theta), rho * math.sin(theta)]])
    tol = 1e-9 * gpc.r_max if tol is None else tol
    face, w = _locate(mesh, gpc, q, tol)
    if face[0] < 0:
        raise NotFound(f"point {point} outside the GPC patch of vertex {gpc.source}")
    return int(face[0]), w[0]


def transported_bins(gamma, j, n_theta):
    """Split ``gamma / 2pi * n_theta + j`` into ``(floor bin, fraction)``.

    Values within 1e-9 of an integer are snapped to it, so that exactly aligned
    charts give a zero fraction.
    """
    x = np.asarray(gamma) * (n_theta / TWO_PI) + j
    near = np.rint(x)
    x = np.where(np.abs(x - near) < _SNAP, near, x)
    fl = np.floor(x)
    return (fl.astype(np.int64) % n_theta), x - fl


def build_windows(mesh, gpcs, spec, max_invalid=0.5):
    """Window tensors for every vertex.

    Raises :class:`TooManyInvalid` when more than ``max_invalid`` of the window
    points of a vertex cannot be located although its GPC patch does not reach
    the mesh boundary (on the boundary empty window parts are expected and act
    as zero padding).
    """
    nv, nr, nt = mesh.n_vertices, spec.n_rho, spec.n_theta
    rho, th = np.meshgrid(spec.rhos, spec.thetas, indexing="ij")
    q = np.stack([rho * np.cos(th), rho * np.sin(th)], axis=-1).reshape(-1, 2)
    jj = np.broadcast_to(np.arange(nt)[None, :, None], (nr, nt, 3))
    tol = 1e-9 * spec.radius

    E = np.zeros((nv, nr, nt, 3), dtype=np.int64)
    W = np.zeros((nv, nr, nt, 3))
    gfl = np.zeros((nv, nr, nt, 3), dtype=np.int64)
    gfr = np.zeros((nv, nr, nt, 3))
    valid = np.zeros((nv, nr, nt), dtype=bool)
    for v in range(nv):
        gpc = gpcs[v]
        if gpc.r_max < spec.radius:
            raise ValueError(f"GPC of vertex {v} has r_max {gpc.r_max} < window radius {spec.radius}")
        face, w = _locate(mesh, gpc, q, tol)
        ok = face >= 0
        if (1.0 - ok.mean()) > max_invalid and not gpc.touches_boundary:
            raise TooManyInvalid(f"vertex {v}: {np.count_nonzero(~ok)} of {len(ok)} window points not located")
        e = np.where(ok[:, None], mesh.faces[np.maximum(face, 0)], v).reshape(nr, nt, 3)
        gamma = np.zeros(nv)
        gamma[gpc.index] = gpc.gamma
        fl, fr = transported_bins(gamma[e], jj, nt)
        okr = ok.reshape(nr, nt)
        E[v] = e
        W[v] = w.reshape(nr, nt, 3)
        gfl[v] = np.where(okr[..., None], fl, 0)
        gfr[v] = np.where(okr[..., None], fr, 0.0)
        valid[v] = okr
    return WindowTensors(spec, E, W, gfl, gfr, valid)


def rotate_reference(tensors, v, k_bins):
    """Tensors as if the reference direction of ``v`` were turned by ``2 pi k / n_theta``.

    The new chart angle of ``v`` is the old one minus the rotation, so the
    window of ``v`` is circularly shifted (new bin ``j`` = old bin ``j + k``)
    and wherever ``v`` supports a window point its transported bin drops by
    ``k``.
    """
    nt = tensors.n_theta
    k = int(k_bins) % nt
    if k == 0:
        return tensors
    perm = (np.arange(nt) + k) % nt
    E = tensors.E.copy()
    W = tensors.W.copy()
    fl = tensors.gamma_floor.copy()
    fr = tensors.gamma_frac.copy()
    valid = tensors.valid.copy()
    E[v] = E[v][:, perm]
    W[v] = W[v][:, perm]
    fl[v] = fl[v][:, perm]
    fr[v] = fr[v][:, perm]
    valid[v] = valid[v][:, perm]
    hit = (E == v) & (W > 0)
    fl[hit] = (fl[hit] - k) % nt
    return WindowTensors(tensors.spec, E, W, fl, fr, valid)
