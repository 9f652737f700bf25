"""Multi-resolution stack of meshes with their windows and pooling maps."""

from dataclasses import dataclass

import numpy as np

from .gpc import compute_all_gpc
from .simplify import simplify
from .windows import build_windows


def default_r_max(mesh, spec):
    """GPC cutoff large enough to hold every triangle touched by a window point."""
    e = mesh.edges
    longest = float(np.linalg.norm(mesh.positions[e[:, 0]] - mesh.positions[e[:, 1]], axis=1).max())
    return max(1.5 * spec.radius, spec.rhos[-1] + 1.5 * longest)


@dataclass(frozen=True, eq=False)
class Pyramid:
    """Per level: mesh, GPC maps, window tensors; between levels: simplification maps.

    Level ``k`` uses window radius ``spec.radius * 2**k`` and roughly
    ``n_vertices / 4**k`` vertices. ``maps[k]`` goes from level ``k`` to ``k + 1``.
    """

    meshes: list
    gpcs: list
    tensors: list
    maps: list
    r_max: list
    eps: float

    @property
    def n_levels(self):
        return len(self.meshes)

    @property
    def spec(self):
        return self.tensors[0].spec


def build_pyramid(mesh, spec, levels=0, eps=1e-12, r_max=None, workers=1):
    """Simplify ``levels`` times by 4 and build windows on every level.

    ``r_max`` overrides the GPC cutoff of level 0; it doubles with the level.
    """
    meshes, maps = [mesh], []
    for _ in range(levels):
        m = simplify(meshes[-1], max(4, meshes[-1].n_vertices // 4))
        maps.append(m)
        meshes.append(m.coarse)
    gpcs, tensors, radii = [], [], []
    for k, m in enumerate(meshes):
        s = spec.scaled(2.0 ** k)
        rm = default_r_max(m, s) if r_max is None else r_max * 2.0 ** k
        g = compute_all_gpc(m, rm, eps, workers=workers)
        gpcs.append(g)
        tensors.append(build_windows(m, g, s))
        radii.append(rm)
    return Pyramid(meshes, gpcs, tensors, maps, radii, eps)
