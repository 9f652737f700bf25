import numpy as np
import pytest

from mdgcnn import shapes
from mdgcnn.pyramid import build_pyramid, default_r_max
from mdgcnn.synthetic import oriented_texture_dataset
from mdgcnn.windows import WindowSpec


def test_levels_shrink_and_radius_doubles(small_pyramid):
    p = small_pyramid
    assert p.n_levels == 2
    n0, n1 = (m.n_vertices for m in p.meshes)
    assert abs(n1 - n0 // 4) <= 0.05 * (n0 // 4)
    assert p.tensors[1].spec.radius == pytest.approx(2 * p.tensors[0].spec.radius)
    assert p.maps[0].fine is p.meshes[0] and p.maps[0].coarse is p.meshes[1]
    assert all(g.r_max == p.r_max[k] for k in range(2) for g in p.gpcs[k])


def test_default_and_explicit_cutoff(sphere2):
    spec = WindowSpec(2, 8, 0.4)
    assert default_r_max(sphere2, spec) >= 1.5 * spec.radius
    p = build_pyramid(sphere2, spec, levels=1, r_max=0.9)
    assert p.r_max == [0.9, 1.8]


def test_dataset_balanced_and_reproducible(sphere2):
    x, y = oriented_texture_dataset(sphere2, 10, seed=4)
    assert x.shape == (10, sphere2.n_vertices, 2) and y.sum() == 5
    x2, y2 = oriented_texture_dataset(sphere2, 10, seed=4)
    np.testing.assert_array_equal(x, x2)
    np.testing.assert_array_equal(y, y2)


def test_marker_and_stripes_bounded():
    mesh = shapes.icosphere(3)
    a, _ = oriented_texture_dataset(mesh, 40, seed=0, noise=0.0)
    # the nearest vertex to the blob centre is at most about half an edge away
    assert np.all(a[:, :, 1].max(axis=1) > 0.8)
    assert np.all(a[:, :, 1].max(axis=1) <= 1.0)
    assert np.all(np.abs(a[:, :, 0]).max(axis=1) <= 1.0)
