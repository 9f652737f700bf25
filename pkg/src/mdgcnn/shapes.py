"""Small procedural meshes used by tests, demos and the synthetic benchmark."""

import numpy as np

from .mesh import TriangleMesh


def icosahedron_arrays():
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def icosphere(subdivisions=3, radius=1.0):
    """Geodesic sphere: 10 * 4**k + 2 vertices, outward oriented faces."""
    v, f = icosahedron_arrays()
    verts = list(v)
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in f:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = np.array(new, dtype=np.int64)
    return TriangleMesh(radius * np.array(verts), f)


def grid(nx, ny=None, spacing=1.0):
    """Flat ``nx`` x ``ny`` vertex grid in the z=0 plane.

    Vertex ``(row, col)`` has index ``row * nx + col``; each square is split
    along the same diagonal so that interior vertices have six neighbors.
    """
    ny = nx if ny is None else ny
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing)
    v = np.stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)], axis=1)
    r, c = np.meshgrid(np.arange(ny - 1), np.arange(nx - 1), indexing="ij")
    a = (r * nx + c).ravel()
    b, d, e = a + 1, a + nx + 1, a + nx
    f = np.concatenate([np.stack([a, b, d], 1), np.stack([a, d, e], 1)])
    return TriangleMesh(v, f)


def cube(size=1.0):
    v = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=np.float64) * size
    f = np.array([
        [0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5],
        [0, 4, 5], [0, 5, 1], [2, 3, 7], [2, 7, 6],
        [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3],
    ], dtype=np.int64)
    return TriangleMesh(v, f)


def perturb(mesh, sigma, seed=0):
    """Displace vertices along their normals by Gaussian noise of scale ``sigma``."""
    rng = np.random.default_rng(seed)
    offset = rng.normal(scale=sigma, size=mesh.n_vertices)
    return TriangleMesh(mesh.positions + offset[:, None] * mesh.vertex_normals, mesh.faces)
