"""
Geodesic polar charts and parallel transport
============================================

Every vertex gets a local polar chart. Around a source vertex the GPC
computation assigns each nearby vertex a geodesic radius, a polar angle and
the angle under which the source's reference direction arrives after parallel
transport. On the unit sphere all three have closed forms, so the discrete
values can be checked directly.
"""

import numpy as np

from mdgcnn import shapes
from mdgcnn.gpc import compute_gpc

sphere = shapes.icosphere(3)
print(sphere)

# one chart of radius 0.5 around vertex 0
gpc = compute_gpc(sphere, 0, 0.5)
print(f"{len(gpc.index)} vertices within geodesic radius 0.5")

# great-circle distance and transported reference direction
p = sphere.positions
s = p[0]
ref = sphere.reference_direction(0)
r_err, g_err = [], []
for i, r, gamma in zip(gpc.index, gpc.r, gpc.gamma):
    if i == 0:
        continue
    c = np.clip(s @ p[i], -1, 1)
    axis = np.cross(s, p[i])
    axis /= np.linalg.norm(axis)
    a = np.arccos(c)
    # Rodrigues rotation carries the tangent vector along the great circle
    moved = ref * np.cos(a) + np.cross(axis, ref) * np.sin(a) + axis * (axis @ ref) * (1 - np.cos(a))
    r_err.append(abs(r - a) / a)
    d = gamma - sphere.chart_angle(i, moved)
    g_err.append(abs((d + np.pi) % (2 * np.pi) - np.pi))

print(f"relative radius error: max {max(r_err):.2e}")
print(f"transport error: mean {np.mean(g_err):.2e} rad, max {max(g_err):.2e} rad")

# turning the reference direction of the source by 0.7 rad shifts every polar
# angle down and every transported angle up by the same amount
turned = compute_gpc(sphere, 0, 0.5, reference_offset=0.7)
shift = (gpc.theta[1:] - turned.theta[1:]) % (2 * np.pi)
print(f"polar angle shift after turning the reference: {shift.min():.6f} .. {shift.max():.6f}")
