"""Geodesic polar coordinates with parallel transport of the source frame.

For a source vertex ``s`` the propagation computes, for every vertex ``i`` within
a cutoff radius,

* ``r[i]``      geodesic distance estimate,
* ``theta[i]``  polar angle of ``i`` in the chart of ``s``,
* ``gamma[i]``  angle, in the chart of ``i``, of the source reference direction
  parallel transported to ``i``. A direction ``u`` in the chart of ``s``
  therefore arrives as ``u + gamma[i]`` in the chart of ``i``.

The scheme is Dijkstra-like. A vertex receives candidates from the triangles
around the edge through which the last settled vertex reaches it: the source
is unfolded into the chart of the vertex from the distances at the two other
triangle corners, and angles are interpolated along the smaller angular sector.
The transported angle uses the same update after its two estimates have been
carried along the triangle edges into the chart of the updated vertex.
"""

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .errors import NotAdjacent, SourceOutOfRange

TWO_PI = 2.0 * math.pi


@numba.njit(cache=True)
def wrap_angle(a):
    """Map an angle to [0, 2*pi)."""
    r = a - TWO_PI * math.floor(a / TWO_PI)
    if r >= TWO_PI or r < 0.0:
        r = 0.0
    return r


@numba.njit(cache=True)
def mix(t, a1, a2):
    """Convex combination ``(1-t) a1 + t a2`` along the smaller angular sector.

    An exact half-turn is resolved counter-clockwise from ``a1``.
    """
    d = wrap_angle(a2 - a1 + math.pi) - math.pi
    if d <= -math.pi:
        d = math.pi
    return wrap_angle(a1 + t * d)


@numba.njit(cache=True)
def update_triangle(pj, pk, rj, rk, theta_j, theta_k, gamma_j, gamma_k):
    """Candidate ``(r, theta, gamma, case)`` at a vertex from two triangle corners.

    ``pj`` and ``pk`` are the corners in the chart of the updated vertex (which
    sits at the origin). ``gamma_j`` and ``gamma_k`` must already be expressed
    in that chart. ``case`` is 1 or 2 when the shortest path runs through
    corner j or k and 0 when it crosses the opposite edge.
    """
    ej = math.hypot(pj[0], pj[1])
    ek = math.hypot(pk[0], pk[1])
    ux = pk[0] - pj[0]
    uy = pk[1] - pj[1]
    d = math.hypot(ux, uy)
    if d > 0.0 and rj + rk >= d and abs(rj - rk) <= d:
        a = (rj * rj - rk * rk + d * d) / (2.0 * d)
        h2 = rj * rj - a * a
        h = math.sqrt(h2) if h2 > 0.0 else 0.0
        bx = pj[0] + a * ux / d
        by = pj[1] + a * uy / d
        nx = -uy / d
        ny = ux / d
        # the virtual source lies on the far side of the edge jk
        side_origin = ux * (-pj[1]) - uy * (-pj[0])
        sgn = -1.0 if side_origin > 0.0 else 1.0
        sx = bx + sgn * h * nx
        sy = by + sgn * h * ny
        den = ux * (-sy) - uy * (-sx)
        if den != 0.0:
            t = ((sx - pj[0]) * (-sy) - (sy - pj[1]) * (-sx)) / den
            if 0.0 < t < 1.0:
                r = math.hypot(sx, sy)
                ajx = pj[0] - sx
                ajy = pj[1] - sy
                akx = pk[0] - sx
                aky = pk[1] - sy
                phi_i = abs(math.atan2(ajx * (-sy) - ajy * (-sx), ajx * (-sx) + ajy * (-sy)))
                phi_k = abs(math.atan2(ajx * aky - ajy * akx, ajx * akx + ajy * aky))
                alpha = phi_i / phi_k if phi_k > 0.0 else 0.0
                if alpha > 1.0:
                    alpha = 1.0
                return r, mix(alpha, theta_j, theta_k), mix(alpha, gamma_j, gamma_k), 0
    if rj + ej <= rk + ek:
        return rj + ej, theta_j, gamma_j, 1
    return rk + ek, theta_k, gamma_k, 2


@numba.njit(cache=True)
def _ring_index(ptr, nbr, center, vertex):
    for k in range(ptr[center], ptr[center + 1]):
        if nbr[k] == vertex:
            return k
    return -1


@numba.njit(cache=True, nogil=True)
def _gpc_kernel(ptr, nbr, ang, length, back, closed, source, r_max, eps, ref_offset):
    n = len(ptr) - 1
    r = np.full(n, np.inf)
    theta = np.zeros(n)
    gamma = np.zeros(n)
    frozen = np.zeros(n, dtype=np.bool_)
    pj = np.empty(2)
    pk = np.empty(2)

    r[source] = 0.0
    gamma[source] = wrap_angle(ref_offset)
    frozen[source] = True
    heap = [(0.0, source)]
    for k in range(ptr[source], ptr[source + 1]):
        j = nbr[k]
        if length[k] > r_max:
            continue
        r[j] = length[k]
        theta[j] = wrap_angle(ang[k] - ref_offset)
        # transport of the (rotated) source reference direction along the edge
        gamma[j] = wrap_angle(ref_offset + back[k] - ang[k] + math.pi)
        frozen[j] = True
        heapq.heappush(heap, (r[j], j))

    while len(heap) > 0:
        dj, j = heapq.heappop(heap)
        if dj > r[j]:
            continue
        for kk in range(ptr[j], ptr[j + 1]):
            i = nbr[kk]
            if frozen[i]:
                continue
            # slot of j in the ring of i
            a = _ring_index(ptr, nbr, i, j)
            lo = ptr[i]
            deg = ptr[i + 1] - lo
            # edge candidate: path through j
            g_j = wrap_angle(gamma[j] + ang[a] - back[a] + math.pi)
            best_r = r[j] + length[a]
            best_t = theta[j]
            best_g = g_j
            pj[0] = length[a] * math.cos(ang[a])
            pj[1] = length[a] * math.sin(ang[a])
            for step in (-1, 1):
                b = a - lo + step
                if closed[i]:
                    b = b % deg
                elif b < 0 or b >= deg:
                    continue
                b += lo
                k = nbr[b]
                if not (r[k] < np.inf):
                    continue
                pk[0] = length[b] * math.cos(ang[b])
                pk[1] = length[b] * math.sin(ang[b])
                g_k = wrap_angle(gamma[k] + ang[b] - back[b] + math.pi)
                cr, ct, cg, case = update_triangle(pj, pk, r[j], r[k], theta[j], theta[k], g_j, g_k)
                if cr < best_r:
                    best_r = cr
                    best_t = ct
                    best_g = cg
            if best_r > r_max:
                continue
            if r[i] > (1.0 + eps) * best_r:
                r[i] = best_r
                theta[i] = best_t
                gamma[i] = best_g
                heapq.heappush(heap, (best_r, i))
    return r, theta, gamma


@dataclass(frozen=True, eq=False)
class GpcMap:
    """Geodesic polar coordinates around one source vertex.

    Only reached vertices are stored; ``index`` lists them in increasing order
    and ``r``, ``theta``, ``gamma`` are aligned with it.
    """

    source: int
    n_vertices: int
    r_max: float
    index: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    on_boundary: np.ndarray

    def dense(self, field):
        """Full-length array of ``field``; unreached entries are ``inf`` for r, ``nan`` otherwise."""
        out = np.full(self.n_vertices, np.inf if field == "r" else np.nan)
        out[self.index] = getattr(self, field)
        return out

    @property
    def touches_boundary(self):
        return bool(self.on_boundary.any())

    def planar(self):
        """Planar image ``(x, y)`` of every reached vertex."""
        return np.stack([self.r * np.cos(self.theta), self.r * np.sin(self.theta)], axis=1)


def edge_transport(mesh, i, j):
    """Offset carrying chart angles of ``i`` into the chart of the adjacent ``j``.

    ``u`` in the chart of ``i`` becomes ``(u + offset) mod 2*pi`` in the chart
    of ``j``.
    """
    ra = mesh.ring_arrays
    k = _ring_index(ra.ptr, ra.neighbor, i, j)
    if k < 0:
        raise NotAdjacent(f"vertices {i} and {j} are not adjacent")
    # ang[k]: angle of j seen from i; back[k]: angle of i seen from j
    return wrap_angle(ra.back_angle[k] - ra.angle[k] + math.pi)


def compute_gpc(mesh, source, r_max, eps=1e-12, reference_offset=0.0):
    """GPC and transported source frame around ``source`` up to radius ``r_max``.

    Parameters
    ----------
    mesh : TriangleMesh
    source : int
    r_max : float
        Vertices whose estimate exceeds this radius are not recorded.
    eps : float
        Relative improvement needed to overwrite an estimate.
    reference_offset : float
        Rotate the source reference direction by this angle (counter-clockwise).
        Thetas shift by ``-offset`` and gammas by ``+offset``.
    """
    if not 0 <= source < mesh.n_vertices:
        raise SourceOutOfRange(f"source {source} not in [0, {mesh.n_vertices})")
    if r_max <= 0 or eps <= 0:
        raise ValueError("r_max and eps must be positive")
    ra = mesh.ring_arrays
    r, theta, gamma = _gpc_kernel(ra.ptr, ra.neighbor, ra.angle, ra.length, ra.back_angle, ra.closed,
                                  int(source), float(r_max), float(eps), float(reference_offset))
    idx = np.flatnonzero(np.isfinite(r))
    theta[source] = 0.0
    return GpcMap(int(source), mesh.n_vertices, float(r_max), idx, r[idx], theta[idx], gamma[idx],
                  ~ra.closed[idx])


def compute_all_gpc(mesh, r_max, eps=1e-12, workers=1):
    """One :class:`GpcMap` per vertex; ``workers > 1`` runs sources on threads."""
    mesh.ring_arrays  # build once before threads share it
    if workers <= 1:
        return [compute_gpc(mesh, s, r_max, eps) for s in range(mesh.n_vertices)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: compute_gpc(mesh, s, r_max, eps), range(mesh.n_vertices)))
