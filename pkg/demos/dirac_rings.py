"""
Point sources under directional and geodesic convolution
========================================================

A kernel that is one at a single radius ``t`` and angle zero moves a signal
by ``t`` along the direction it is read in. Applied twice with directional
convolution, a point source lands on the circle of radius ``2t``: the second
step continues in the direction of the first. Geodesic convolution forgets
the direction after every step (it keeps the best rotation only) and fills
the whole disc instead.

Writes colored PLY files and radius/response CSV tables to ``demo_out/``.
"""

from pathlib import Path

import numpy as np

from mdgcnn import shapes
from mdgcnn.dirac import annulus_mass_fraction, propagate
from mdgcnn.gpc import compute_all_gpc, compute_gpc
from mdgcnn.mesh import write_ply
from mdgcnn.windows import WindowSpec, build_windows

out = Path("demo_out")
out.mkdir(exist_ok=True)

sphere = shapes.icosphere(4)
spec = WindowSpec(n_rho=3, n_theta=16, radius=0.4)
t = 0.3  # the outermost window radius
tensors = build_windows(sphere, compute_all_gpc(sphere, 0.6), spec)

radius = compute_gpc(sphere, 0, 1.2).dense("r")
half = spec.radius / (spec.n_rho + 1)

for mode in ("dir", "geo"):
    resp = propagate(tensors, 0, t, 2, mode)
    frac = annulus_mass_fraction(sphere, resp, radius, 2 * t, half)
    print(f"{mode}: {100 * frac:.1f} % of the response at radius {2 * t} +- {half}")

    # blue for zero, red for the strongest response
    v = resp / resp.max()
    colors = (255 * np.stack([v, np.zeros_like(v), 1 - v], 1)).round().astype(np.uint8)
    write_ply(out / f"dirac_{mode}.ply", sphere, colors)
    near = np.isfinite(radius)
    np.savetxt(out / f"dirac_{mode}.csv", np.stack([radius[near], resp[near]], 1), delimiter=",",
               header="radius,response", comments="")
print(f"wrote PLY and CSV files to {out}/")
