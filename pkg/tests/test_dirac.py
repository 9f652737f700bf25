import numpy as np
import pytest

from mdgcnn.dirac import annulus_mass_fraction, propagate, shifted_dirac_kernel
from mdgcnn.errors import ShapeMismatch
from mdgcnn.gpc import compute_all_gpc, compute_gpc
from mdgcnn.windows import WindowSpec, build_windows


@pytest.fixture(scope="module")
def fine_windows(sphere3):
    return sphere3, build_windows(sphere3, compute_all_gpc(sphere3, 0.6), WindowSpec(3, 16, 0.4))


def test_kernel_is_one_hot():
    K = shifted_dirac_kernel(WindowSpec(3, 8, 0.4), 0.2)
    assert K.sum() == 1 and K[1, 0, 0, 0] == 1
    with pytest.raises(ShapeMismatch):
        shifted_dirac_kernel(WindowSpec(3, 8, 0.4), 0.25)


def test_single_step_modes_share_support(fine_windows):
    mesh, T = fine_windows
    t = 0.3
    a = propagate(T, 0, t, 1, "dir")
    b = propagate(T, 0, t, 1, "geo")
    np.testing.assert_allclose(a, b, atol=1e-12)
    r = compute_gpc(mesh, 0, 1.0).dense("r")
    hit = a > 1e-12
    assert np.abs(r[hit] - t).max() < np.linalg.norm(np.diff(mesh.positions[mesh.edges], axis=1), axis=-1).max()


def test_second_step_stays_on_the_circle(fine_windows):
    mesh, T = fine_windows
    t = 0.3
    r = compute_gpc(mesh, 0, 1.0).dense("r")
    r = np.where(np.isfinite(r), r, np.inf)
    half = T.spec.radius / (T.spec.n_rho + 1)
    d = annulus_mass_fraction(mesh, propagate(T, 0, t, 2, "dir"), r, 2 * t, half)
    g = annulus_mass_fraction(mesh, propagate(T, 0, t, 2, "geo"), r, 2 * t, half)
    assert d > 0.75 and g < 0.5


def test_bad_arguments(sphere_windows):
    T = sphere_windows[2]
    with pytest.raises(ValueError):
        propagate(T, 0, T.spec.rhos[0], 0)
    with pytest.raises(ValueError):
        propagate(T, 0, T.spec.rhos[0], 1, mode="both")
    assert annulus_mass_fraction(sphere_windows[0], np.zeros(T.n_vertices), np.zeros(T.n_vertices), 0, 1) == 0.0
