"""Quadric error metric simplification with a fine-to-coarse vertex map.

Edges are collapsed onto one of their endpoints (half-edge collapses), so every
coarse vertex is a surviving fine vertex and keeps its position. The surviving
fine vertex is the natural representative used when a signal is pooled.
"""

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import TargetTooSmall
from .mesh import TriangleMesh

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class SimplificationMap:
    """Result of :func:`simplify`.

    Attributes
    ----------
    fine : TriangleMesh
    coarse : TriangleMesh
    fine_to_coarse : ndarray of int, shape (n_fine,)
        Coarse vertex that absorbed each fine vertex.
    angle_offset : ndarray, shape (n_fine,)
        Chart angle at the coarse vertex of the fine reference direction after
        the minimal rotation aligning the two normals. A fine chart angle ``u``
        corresponds roughly to ``u + angle_offset`` in the coarse chart.
    representative : ndarray of int, shape (n_coarse,)
        Fine vertex sampled when pooling; it sits at the coarse vertex.
    """

    fine: TriangleMesh
    coarse: TriangleMesh
    fine_to_coarse: np.ndarray
    angle_offset: np.ndarray
    representative: np.ndarray

    @property
    def n_fine(self):
        return self.fine.n_vertices

    @property
    def n_coarse(self):
        return self.coarse.n_vertices


def _align_rotation(n_from, n_to):
    """Matrix of the smallest rotation taking unit vector ``n_from`` to ``n_to``."""
    v = np.cross(n_from, n_to)
    c = float(n_from @ n_to)
    if c < -1.0 + 1e-12:
        # antiparallel: half-turn about any axis orthogonal to n_from
        axis = np.cross(n_from, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(n_from, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def transfer_offsets(fine, coarse, fine_to_coarse):
    """Per fine vertex, the angle offset into the chart of its coarse vertex."""
    out = np.empty(fine.n_vertices)
    fn = fine.vertex_normals
    cn = coarse.vertex_normals
    for w in range(fine.n_vertices):
        u = fine_to_coarse[w]
        d = _align_rotation(fn[w], cn[u]) @ fine.reference_direction(w)
        out[w] = coarse.chart_angle(u, d)
    return np.mod(out, TWO_PI)


def identity_map(mesh):
    idx = np.arange(mesh.n_vertices)
    return SimplificationMap(mesh, mesh, idx, np.zeros(mesh.n_vertices), idx.copy())


class _Collapser:
    def __init__(self, mesh):
        self.p = mesh.positions
        nv = mesh.n_vertices
        self.faces = [list(f) for f in mesh.oriented_faces]
        self.alive_face = [True] * len(self.faces)
        self.vfaces = [set() for _ in range(nv)]
        for fi, f in enumerate(self.faces):
            for v in f:
                self.vfaces[v].add(fi)
        self.alive = np.ones(nv, dtype=bool)
        self.parent = np.arange(nv)
        self.stamp = np.zeros(nv, dtype=np.int64)
        self.boundary = mesh.is_boundary_vertex.copy()
        self.min_area2 = (10.0 * 1e-12 * mesh.bbox_diagonal ** 2) ** 2

        # plane quadrics of the faces plus strong planes orthogonal to boundary edges
        q = np.zeros((nv, 4, 4))
        normals = mesh.face_normals
        for fi, f in enumerate(mesh.oriented_faces):
            n = normals[fi]
            plane = np.r_[n, -n @ self.p[f[0]]]
            k = np.outer(plane, plane) * mesh.face_areas[fi]
            q[f] += k
        scale = mesh.bbox_diagonal ** 2
        for a, b in mesh.boundary_edges:
            e = self.p[b] - self.p[a]
            fi = next(iter(self.vfaces[a] & self.vfaces[b]))
            n = np.cross(e, normals[fi])
            n /= np.linalg.norm(n)
            plane = np.r_[n, -n @ self.p[a]]
            k = np.outer(plane, plane) * scale
            q[a] += k
            q[b] += k
        self.q = q

    def neighbors(self, v):
        out = set()
        for fi in self.vfaces[v]:
            out.update(self.faces[fi])
        out.discard(v)
        return out

    def cost(self, a, b):
        """Cost of moving ``a`` onto ``b``."""
        h = np.r_[self.p[b], 1.0]
        return float(h @ (self.q[a] + self.q[b]) @ h)

    def push(self, heap, a, b):
        if self.boundary[a] and not self.boundary[b]:
            return
        length = float(np.linalg.norm(self.p[a] - self.p[b]))
        heapq.heappush(heap, (self.cost(a, b), length, a, b, self.stamp[a], self.stamp[b]))

    def allowed(self, a, b):
        shared = self.vfaces[a] & self.vfaces[b]
        if not shared:
            return False
        if self.boundary[a] and self.boundary[b] and len(shared) != 1:
            return False  # interior edge joining two boundary vertices would pinch
        opposite = set()
        for fi in shared:
            opposite.update(self.faces[fi])
        opposite -= {a, b}
        # link condition
        if self.neighbors(a) & self.neighbors(b) != opposite:
            return False
        # keep every remaining vertex at valence >= 3
        for o in opposite:
            if len(self.neighbors(o)) - 1 < (2 if self.boundary[o] else 3):
                return False
        if len(self.neighbors(b) | self.neighbors(a)) - 2 < (2 if self.boundary[b] else 3):
            return False
        # reject flipped or degenerate faces
        for fi in self.vfaces[a] - shared:
            f = self.faces[fi]
            old = np.cross(self.p[f[1]] - self.p[f[0]], self.p[f[2]] - self.p[f[0]])
            g = [b if x == a else x for x in f]
            new = np.cross(self.p[g[1]] - self.p[g[0]], self.p[g[2]] - self.p[g[0]])
            if new @ new <= self.min_area2 * 4 or new @ old <= 0.0:
                return False
        return True

    def collapse(self, a, b):
        shared = self.vfaces[a] & self.vfaces[b]
        for fi in shared:
            self.alive_face[fi] = False
            for v in self.faces[fi]:
                self.vfaces[v].discard(fi)
        for fi in list(self.vfaces[a]):
            f = self.faces[fi]
            f[f.index(a)] = b
            self.vfaces[b].add(fi)
        self.vfaces[a] = set()
        self.alive[a] = False
        self.parent[a] = b
        self.q[b] += self.q[a]
        self.stamp[b] += 1


def simplify(mesh, target):
    """Collapse edges of ``mesh`` until about ``target`` vertices remain.

    Raises
    ------
    TargetTooSmall
        ``target < 4`` or the surface cannot be reduced to within 5 % of
        ``target`` without breaking manifoldness.
    """
    if target >= mesh.n_vertices:
        return identity_map(mesh)
    if target < 4:
        raise TargetTooSmall(f"target {target} below the minimum of 4 vertices")
    c = _Collapser(mesh)
    heap = []
    for a, b in mesh.edges:
        c.push(heap, a, b)
        c.push(heap, b, a)
    n = mesh.n_vertices
    while n > target and heap:
        _, _, a, b, sa, sb = heapq.heappop(heap)
        if not (c.alive[a] and c.alive[b]) or c.stamp[a] != sa or c.stamp[b] != sb:
            continue
        if not c.allowed(a, b):
            continue
        c.collapse(a, b)
        n -= 1
        for w in c.neighbors(b):
            c.push(heap, b, w)
            c.push(heap, w, b)
    if abs(n - target) > 0.05 * target:
        raise TargetTooSmall(f"stopped at {n} vertices, target {target}")

    survivors = np.flatnonzero(c.alive)
    new_index = np.full(mesh.n_vertices, -1, dtype=np.int64)
    new_index[survivors] = np.arange(len(survivors))
    root = c.parent.copy()
    while True:
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    faces = np.array([c.faces[i] for i in range(len(c.faces)) if c.alive_face[i]], dtype=np.int64)
    coarse = TriangleMesh(mesh.positions[survivors], new_index[faces])
    f2c = new_index[root]
    return SimplificationMap(mesh, coarse, f2c, transfer_offsets(mesh, coarse, f2c), survivors)
