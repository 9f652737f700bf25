"""Triangle meshes: validation, orientation, ordered one-rings and local charts.

Every vertex carries a local polar chart built from its one-ring: neighbors are
listed by walking around the faces of the star, corner angles are rescaled so
that an interior vertex has a total angle of 2*pi, and the first listed neighbor
gives the zero direction (the reference direction of the vertex).
"""

import hashlib
import logging
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DegenerateFace, MeshError, NonManifold, NonManifoldStar, ParseError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class OneRing:
    """Cyclically ordered neighborhood of a vertex.

    Attributes
    ----------
    center : int
        Vertex index.
    neighbors : ndarray of int
        Neighbors in traversal order. For a boundary vertex the list starts at
        the free end of the fan.
    alphas : ndarray
        Normalized sector angles; ``alphas[j]`` spans neighbors ``j`` and
        ``j+1``. Length ``n`` for interior vertices, ``n-1`` on the boundary.
    is_boundary : bool
    raw_angles : ndarray
        Corner angles measured in 3D, aligned with ``alphas``.
    lengths : ndarray
        Edge lengths to each neighbor.
    """

    center: int
    neighbors: np.ndarray
    alphas: np.ndarray
    is_boundary: bool
    raw_angles: np.ndarray
    lengths: np.ndarray

    @property
    def angles(self):
        """Polar angle of every neighbor in the chart of ``center``."""
        return np.concatenate([[0.0], np.cumsum(self.alphas)])[: len(self.neighbors)]

    @property
    def chart_positions(self):
        a = self.angles
        return self.lengths[:, None] * np.stack([np.cos(a), np.sin(a)], axis=1)

    def index_of(self, vertex):
        hits = np.flatnonzero(self.neighbors == vertex)
        if len(hits) == 0:
            raise KeyError(vertex)
        return int(hits[0])


@dataclass(frozen=True)
class RingArrays:
    """All one-rings packed in CSR form (consumed by the compiled GPC kernel).

    ``angle[k]`` is the polar angle of ``neighbor[k]`` in the chart of the
    ring's center and ``back_angle[k]`` the polar angle of the center in the
    chart of ``neighbor[k]``.
    """

    ptr: np.ndarray
    neighbor: np.ndarray
    angle: np.ndarray
    length: np.ndarray
    back_angle: np.ndarray
    closed: np.ndarray


def _corner_angles(p, center, nbrs, closed):
    e = p[nbrs] - p[center]
    e_next = np.roll(e, -1, axis=0)
    if not closed:
        e, e_next = e[:-1], e_next[:-1]
    cross = np.linalg.norm(np.cross(e, e_next), axis=1)
    dot = np.einsum("ij,ij->i", e, e_next)
    return np.arctan2(cross, dot)


def _normalize_angles(raw, closed):
    total = raw.sum()
    if closed:
        return raw * (TWO_PI / total)
    # Open fans keep their metric unless they would overlap themselves.
    if total <= TWO_PI:
        return raw.copy()
    return raw * (TWO_PI * len(raw) / (len(raw) + 1) / total)


class TriangleMesh:
    """Indexed triangle mesh with manifold adjacency.

    Parameters
    ----------
    positions : array_like, shape (n_vertices, 3)
    faces : array_like of int, shape (n_faces, 3)

    Raises
    ------
    MeshError
        Index out of range or malformed arrays.
    DegenerateFace
        Repeated index within a face or (near) zero area face.
    NonManifold
        Edge shared by more than two faces or non-orientable surface.
    NonManifoldStar
        Vertex whose incident faces do not form one fan.

    Notes
    -----
    The faces are kept exactly as given. A consistent orientation is computed
    separately (``oriented_faces``) by a breadth-first propagation from the
    first face of every connected component; one-rings are listed
    counter-clockwise with respect to that orientation, which makes the rings of
    adjacent vertices orientation compatible.
    """

    def __init__(self, positions, faces):
        positions = np.asarray(positions, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise MeshError(f"positions must have shape (n, 3), got {positions.shape}")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError(f"faces must have shape (m, 3), got {faces.shape}")
        if faces.size and (faces.min() < 0 or faces.max() >= len(positions)):
            raise MeshError("face index out of range")
        if np.any((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])):
            raise DegenerateFace("face with repeated vertex")
        positions.setflags(write=False)
        faces.setflags(write=False)
        self.positions = positions
        self.faces = faces

        diag2 = float(np.sum((positions.max(0) - positions.min(0)) ** 2)) if len(positions) else 0.0
        bad = np.flatnonzero(self.face_areas <= 1e-12 * diag2)
        if len(bad):
            raise DegenerateFace(f"{len(bad)} zero-area face(s), first is {bad[0]}")

        self._build_edges()
        self._orient()
        self.rings = [self._ring(v) for v in range(self.n_vertices)]

    # -- basic sizes -------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def n_faces(self):
        return len(self.faces)

    def __repr__(self):
        return f"TriangleMesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"

    # -- topology ----------------------------------------------------------
    def _build_edges(self):
        f = self.faces
        half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        key = np.sort(half, axis=1)
        edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            e = edges[np.argmax(counts > 2)]
            raise NonManifold(f"edge ({e[0]}, {e[1]}) is shared by more than two faces")
        n_f = len(f)
        face_of_half = np.tile(np.arange(n_f), 3)
        edge_faces = np.full((len(edges), 2), -1, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        slot = np.zeros(len(inverse), dtype=np.int64)
        sorted_inv = inverse[order]
        first = np.r_[True, sorted_inv[1:] != sorted_inv[:-1]]
        slot[order[~first]] = 1
        edge_faces[inverse, slot] = face_of_half
        self.edges = edges
        self.edge_faces = edge_faces
        # edge id of each face side, (n_faces, 3) for sides (0,1), (1,2), (2,0)
        self._face_edge = inverse.reshape(3, n_f).T
        self._face_edge_sign = np.where(half[:, 0] < half[:, 1], 1, -1).reshape(3, n_f).T

    def _orient(self):
        n_f = self.n_faces
        flip = np.zeros(n_f, dtype=np.int8)  # 0 = unvisited, +1 keep, -1 reverse
        for seed in range(n_f):
            if flip[seed]:
                continue
            flip[seed] = 1
            queue = deque([seed])
            while queue:
                f = queue.popleft()
                for side in range(3):
                    e = self._face_edge[f, side]
                    a, b = self.edge_faces[e]
                    g = b if a == f else a
                    if g < 0:
                        continue
                    g_side = int(np.flatnonzero(self._face_edge[g] == e)[0])
                    want = -self._face_edge_sign[f, side] * flip[f] * self._face_edge_sign[g, g_side]
                    if flip[g] == 0:
                        flip[g] = want
                        queue.append(g)
                    elif flip[g] != want:
                        raise NonManifold("mesh is not orientable")
        oriented = self.faces.copy()
        rev = flip < 0
        oriented[rev] = oriented[rev][:, [0, 2, 1]]
        oriented.setflags(write=False)
        self.oriented_faces = oriented

    @cached_property
    def boundary_edges(self):
        return self.edges[self.edge_faces[:, 1] < 0]

    @cached_property
    def vertex_faces(self):
        """CSR ``(ptr, face_ids)`` listing the faces incident to each vertex."""
        flat = self.faces.reshape(-1)
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.n_vertices)
        ptr = np.concatenate([[0], np.cumsum(counts)])
        return ptr, order // 3

    def _successors(self, v):
        ptr, fids = self.vertex_faces
        nxt = {}
        for f in self.oriented_faces[fids[ptr[v]:ptr[v + 1]]]:
            k = int(np.flatnonzero(f == v)[0])
            a, b = int(f[(k + 1) % 3]), int(f[(k + 2) % 3])
            if a in nxt:
                raise NonManifoldStar(f"vertex {v}: neighbor {a} starts two fan sectors")
            nxt[a] = b
        return nxt

    def _ring(self, v, start=None):
        nxt = self._successors(v)
        if not nxt:
            raise MeshError(f"vertex {v} is not used by any face")
        targets = set(nxt.values())
        heads = [a for a in nxt if a not in targets]
        if len(heads) > 1:
            raise NonManifoldStar(f"vertex {v} has {len(heads)} separate fans")
        closed = not heads
        if closed:
            first = min(nxt) if start is None else int(start)
            if first not in nxt:
                raise KeyError(f"{first} is not a neighbor of {v}")
        else:
            first = heads[0]
            if start is not None and int(start) != first:
                raise ValueError("a boundary ring must start at the free end of its fan")
        order = [first]
        cur = first
        while cur in nxt:
            cur = nxt[cur]
            if cur == first:
                break
            if cur in order:
                raise NonManifoldStar(f"vertex {v}: ring traversal branches")
            order.append(cur)
        n_nbrs = len(nxt) + (0 if closed else 1)
        if len(order) != n_nbrs:
            raise NonManifoldStar(f"vertex {v}: ring traversal does not visit every neighbor")
        nbrs = np.asarray(order, dtype=np.int64)
        p = self.positions
        raw = _corner_angles(p, v, nbrs, closed)
        lengths = np.linalg.norm(p[nbrs] - p[v], axis=1)
        return OneRing(v, nbrs, _normalize_angles(raw, closed), not closed, raw, lengths)

    @cached_property
    def ring_arrays(self):
        counts = np.array([len(r.neighbors) for r in self.rings])
        ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        nbr = np.concatenate([r.neighbors for r in self.rings]).astype(np.int64)
        ang = np.concatenate([r.angles for r in self.rings])
        length = np.concatenate([r.lengths for r in self.rings])
        center = np.repeat(np.arange(self.n_vertices), counts)
        pos = {(int(c), int(n)): k for k, (c, n) in enumerate(zip(center, nbr))}
        back = ang[[pos[(int(n), int(c))] for c, n in zip(center, nbr)]]
        closed = np.array([not r.is_boundary for r in self.rings])
        return RingArrays(ptr, nbr, ang, length, back, closed)

    @property
    def is_boundary_vertex(self):
        return np.array([r.is_boundary for r in self.rings])

    # -- geometry ----------------------------------------------------------
    @cached_property
    def face_normals(self):
        """Unit normals of the consistently oriented faces."""
        p = self.positions
        f = self.oriented_faces
        n = np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def face_areas(self):
        p = self.positions
        f = self.faces
        return 0.5 * np.linalg.norm(np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]]), axis=1)

    @cached_property
    def vertex_normals(self):
        """Area-weighted average of incident face normals."""
        weighted = self.face_normals * self.face_areas[:, None]
        n = np.zeros_like(self.positions)
        for k in range(3):
            np.add.at(n, self.oriented_faces[:, k], weighted)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def bbox_diagonal(self):
        return float(np.linalg.norm(self.positions.max(0) - self.positions.min(0)))

    def content_hash(self):
        """SHA-256 of the vertex and face arrays (little-endian)."""
        h = hashlib.sha256()
        h.update(self.positions.astype("<f8").tobytes())
        h.update(self.faces.astype("<i8").tobytes())
        return h.hexdigest()

    # -- tangent directions in vertex charts --------------------------------
    def _tangent_frame(self, v):
        n = self.vertex_normals[v]
        ring = self.rings[v]
        e = self.positions[ring.neighbors] - self.positions[v]
        e = e - np.outer(e @ n, n)
        e /= np.linalg.norm(e, axis=1, keepdims=True)
        x = e[0]
        y = np.cross(n, x)
        psi = np.mod(np.arctan2(e @ y, e @ x), TWO_PI)
        psi[0] = 0.0
        psi = np.maximum.accumulate(psi)
        return n, x, y, psi

    def reference_direction(self, v):
        """Unit 3D tangent vector at ``v`` corresponding to chart angle 0."""
        return self._tangent_frame(v)[1]

    def chart_angle(self, v, vector):
        """Chart angle at ``v`` of a 3D vector (projected onto the tangent plane).

        The projected directions of the ring edges split the tangent plane into
        sectors; inside a sector the angle is mapped linearly onto the matching
        normalized sector of the chart.
        """
        n, x, y, psi = self._tangent_frame(v)
        ring = self.rings[v]
        w = np.asarray(vector, dtype=np.float64)
        w = w - (w @ n) * n
        a = np.mod(np.arctan2(w @ y, w @ x), TWO_PI)
        ang = ring.angles
        if ring.is_boundary:
            ends = psi
            ends_chart = ang
        else:
            ends = np.r_[psi, TWO_PI]
            ends_chart = np.r_[ang, TWO_PI]
        j = int(np.clip(np.searchsorted(ends, a, side="right") - 1, 0, len(ends) - 2))
        span = ends[j + 1] - ends[j]
        t = (a - ends[j]) / span if span > 0 else 0.0
        return float(np.mod(ends_chart[j] + t * (ends_chart[j + 1] - ends_chart[j]), TWO_PI))

    def chart_direction(self, v, angle):
        """Inverse of :meth:`chart_angle`: unit 3D tangent vector of a chart angle."""
        n, x, y, psi = self._tangent_frame(v)
        ring = self.rings[v]
        ang = ring.angles
        if ring.is_boundary:
            ends, ends_chart = psi, ang
        else:
            ends, ends_chart = np.r_[psi, TWO_PI], np.r_[ang, TWO_PI]
        a = float(np.mod(angle, TWO_PI))
        j = int(np.clip(np.searchsorted(ends_chart, a, side="right") - 1, 0, len(ends) - 2))
        span = ends_chart[j + 1] - ends_chart[j]
        t = (a - ends_chart[j]) / span if span > 0 else 0.0
        b = ends[j] + t * (ends[j + 1] - ends[j])
        return np.cos(b) * x + np.sin(b) * y


def order_one_ring(mesh, v, start=None):
    """Ordered one-ring of ``v``, optionally starting the listing at ``start``.

    Interior vertices start at their lowest-index neighbor by default.
    """
    if start is None:
        return mesh.rings[v]
    return mesh._ring(v, start)


def vertex_areas(mesh):
    """Per-vertex measure: sum of the areas of the incident faces."""
    a = mesh.face_areas
    return np.bincount(mesh.faces.reshape(-1), weights=np.repeat(a, 3), minlength=mesh.n_vertices)


# -- file formats ------------------------------------------------------------

def _tokens(path):
    lines = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                lines.append(line)
    return lines


def _read_off(path):
    lines = _tokens(path)
    if not lines:
        raise ParseError(f"{path}: empty file")
    head = lines[0].split()
    if head[0] != "OFF":
        raise ParseError(f"{path}: missing OFF header")
    rest = head[1:]
    i = 1
    if not rest:
        rest = lines[1].split()
        i = 2
    try:
        nv, nf = int(rest[0]), int(rest[1])
        verts = [[float(t) for t in lines[i + k].split()[:3]] for k in range(nv)]
        faces = []
        for k in range(nf):
            row = [int(t) for t in lines[i + nv + k].split()]
            if row[0] != 3 or len(row) < 4:
                raise ParseError(f"{path}: only triangle faces are supported")
            faces.append(row[1:4])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if any(len(v) != 3 for v in verts):
        raise ParseError(f"{path}: vertex with fewer than 3 coordinates")
    return np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _read_obj(path):
    verts, faces = [], []
    try:
        for line in _tokens(path):
            tok = line.split()
            if tok[0] == "v":
                verts.append([float(t) for t in tok[1:4]])
            elif tok[0] == "f":
                idx = [int(t.split("/")[0]) for t in tok[1:]]
                if len(idx) != 3:
                    raise ParseError(f"{path}: only triangle faces are supported")
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def load_mesh(path, format=None):
    """Read an OFF or OBJ (``v``/``f`` lines only) triangle mesh."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    if fmt == "OFF":
        v, f = _read_off(path)
    elif fmt == "OBJ":
        v, f = _read_obj(path)
    else:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    if f.size and (f.min() < 0 or f.max() >= len(v)):
        raise ParseError(f"{path}: face index out of range for {len(v)} vertices")
    return TriangleMesh(v, f)


def write_off(path, mesh):
    with open(path, "w") as fh:
        fh.write(f"OFF\n{mesh.n_vertices} {mesh.n_faces} 0\n")
        for p in mesh.positions:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def write_ply(path, mesh, colors=None):
    """ASCII PLY with optional per-vertex ``uchar`` RGB colors."""
    colors = None if colors is None else np.clip(np.asarray(colors), 0, 255).astype(np.uint8)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {mesh.n_vertices}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        if colors is not None:
            fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write(f"element face {mesh.n_faces}\nproperty list uchar int vertex_indices\nend_header\n")
        for k, p in enumerate(mesh.positions):
            line = f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}"
            if colors is not None:
                c = colors[k]
                line += f" {c[0]} {c[1]} {c[2]}"
            fh.write(line + "\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
