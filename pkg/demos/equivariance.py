"""
Reference directions only permute angular bins
==============================================

The zero direction of every vertex chart is arbitrary. Directional layers
are built so that turning it by ``k`` bins at one vertex rolls the bins of
that vertex by ``k`` in every layer's output and changes nothing elsewhere.
A max over bins at the end removes the last trace of the choice.
"""

import numpy as np

from mdgcnn import conv, shapes
from mdgcnn.gpc import compute_all_gpc
from mdgcnn.windows import WindowSpec, build_windows, rotate_reference

rng = np.random.default_rng(0)
mesh = shapes.perturb(shapes.icosphere(2), 0.02, seed=1)
spec = WindowSpec(2, 8, 0.5)
T = build_windows(mesh, compute_all_gpc(mesh, 0.8), spec)

layers = [conv.LayerParams.random(2, 8, a, b, rng) for a, b in ((1, 4), (4, 4), (4, 2))]


def network(tensors, phi):
    for p in layers:
        phi = conv.dir_layer(phi, p, tensors)
    return phi


f = rng.normal(size=(mesh.n_vertices, 1))
phi = conv.lift(f, 8)
base = network(T, phi)

v, k = 40, 3
turned = network(rotate_reference(T, v, k), phi)  # a lifted input looks the same in any chart
print("vertex", v, "bins before:", np.round(base[v, :, 0], 3))
print("vertex", v, "bins after: ", np.round(turned[v, :, 0], 3))
print("rolled by k matches:", np.allclose(turned[v], np.roll(base[v], -k, axis=0)))
others = np.delete(np.arange(mesh.n_vertices), v)
print("other vertices unchanged:", np.allclose(turned[others], base[others]))
print("after angular max pooling identical:",
      np.allclose(conv.angular_max_pool(turned), conv.angular_max_pool(base)))
