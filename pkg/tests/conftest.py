import numpy as np
import pytest

from mdgcnn import shapes
from mdgcnn.gpc import compute_all_gpc
from mdgcnn.windows import WindowSpec, build_windows


@pytest.fixture(scope="session")
def sphere3():
    return shapes.icosphere(3)


@pytest.fixture(scope="session")
def sphere2():
    return shapes.icosphere(2)


@pytest.fixture(scope="session")
def grid20():
    return shapes.grid(20)


@pytest.fixture(scope="session")
def grid_windows(grid20):
    spec = WindowSpec(2, 8, 3.0)
    gpcs = compute_all_gpc(grid20, 4.5)
    return grid20, gpcs, build_windows(grid20, gpcs, spec)


@pytest.fixture(scope="session")
def sphere_windows(sphere2):
    spec = WindowSpec(2, 8, 0.5)
    gpcs = compute_all_gpc(sphere2, 0.8)
    return sphere2, gpcs, build_windows(sphere2, gpcs, spec)


@pytest.fixture(scope="session")
def noisy_windows():
    mesh = shapes.perturb(shapes.icosphere(2), 0.02, seed=3)
    spec = WindowSpec(2, 8, 0.5)
    gpcs = compute_all_gpc(mesh, 0.8)
    return mesh, gpcs, build_windows(mesh, gpcs, spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_pyramid(sphere2):
    from mdgcnn.pyramid import build_pyramid

    return build_pyramid(sphere2, WindowSpec(2, 8, 0.4), levels=1)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; returns the flag so tests can assert on it."""

    def record(number, title, passed, detail):
        _CRITERIA.append((number, title, bool(passed), detail))
        print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
