import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdgcnn import conv
from mdgcnn.errors import ShapeMismatch
from mdgcnn.windows import WindowSpec, WindowTensors
from oracles import naive_contract, naive_dir_pull, naive_pull


def handmade(frac=0.25, floor=2):
    """Two vertices, one radius, four bins; every window point of vertex 0 sits on vertex 1."""
    spec = WindowSpec(1, 4, 1.0)
    E = np.zeros((2, 1, 4, 3), dtype=np.int64)
    E[0] = [1, 0, 0]
    W = np.zeros((2, 1, 4, 3))
    W[0, ..., 0] = 1.0
    fl = np.zeros_like(E)
    fl[0, ..., 0] = floor
    fr = np.zeros((2, 1, 4, 3))
    fr[0, ..., 0] = frac
    valid = np.zeros((2, 1, 4), dtype=bool)
    valid[0] = True
    return WindowTensors(spec, E, W, fl, fr, valid)


def test_fractional_bin_interpolates():
    T = handmade()
    phi = np.zeros((2, 4, 1))
    phi[1, 2], phi[1, 3] = 4.0, 8.0
    X = conv.dir_pull_back(phi, T)
    np.testing.assert_allclose(X[0, 0, :, 0], 0.75 * 4 + 0.25 * 8)
    np.testing.assert_allclose(X[1], 0.0)


def test_wraparound_bin():
    T = handmade(frac=0.5, floor=3)
    phi = np.zeros((2, 4, 1))
    phi[1, 3], phi[1, 0] = 2.0, 6.0
    np.testing.assert_allclose(conv.dir_pull_back(phi, T)[0, 0, :, 0], 4.0)


def test_pull_backs_match_loops(sphere_windows, noisy_windows, rng):
    for _, _, T in (sphere_windows, noisy_windows):
        f = rng.normal(size=(T.n_vertices, 2))
        phi = rng.normal(size=(T.n_vertices, T.n_theta, 2))
        np.testing.assert_allclose(conv.pull_back(f, T), naive_pull(f, T), atol=1e-12)
        np.testing.assert_allclose(conv.dir_pull_back(phi, T), naive_dir_pull(phi, T), atol=1e-12)


def test_adjoints(noisy_windows, rng):
    T = noisy_windows[2]
    nv, nr, nt = T.E.shape[:3]
    f = rng.normal(size=(3, nv, 2))
    phi = rng.normal(size=(3, nv, nt, 2))
    g = rng.normal(size=(3, nv, nr, nt, 2))
    assert np.sum(conv.pull_back(f, T) * g) == pytest.approx(np.sum(f * conv.pull_back_adjoint(g, T)))
    assert np.sum(conv.dir_pull_back(phi, T) * g) == pytest.approx(np.sum(phi * conv.dir_pull_back_adjoint(g, T)))
    K = rng.normal(size=(nr, nt, 2, 3))
    X = g[0]
    h = rng.normal(size=(nv, nt, 3))
    dX, dK = conv.contract_adjoint(X, K, h)
    assert np.sum(conv.contract(X, K) * h) == pytest.approx(np.sum(X * dX))
    dKn = np.zeros_like(K)
    for l in range(nt):
        for j in range(nt):
            dKn[:, (j - l) % nt] += np.einsum("vip,vq->ipq", X[:, :, j], h[:, l])
    np.testing.assert_allclose(dK, dKn, atol=1e-10)


def test_contract_matches_loops(rng):
    X = rng.normal(size=(5, 2, 6, 3))
    K = rng.normal(size=(2, 6, 3, 4))
    np.testing.assert_allclose(conv.contract(X, K), naive_contract(X, K), atol=1e-12)


def test_one_hot_kernel_reads_one_bin(rng):
    X = rng.normal(size=(4, 2, 8, 1))
    K = np.zeros((2, 8, 1, 1))
    K[1, 3] = 1.0
    out = conv.contract(X, K)
    for l in range(8):
        np.testing.assert_allclose(out[:, l, 0], X[:, 1, (3 + l) % 8, 0])


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**16))
def test_linearity(a, b, seed):
    T = _HAND
    r = np.random.default_rng(seed)
    p, q = r.normal(size=(2, 2, 4, 2))
    K = r.normal(size=(1, 4, 2, 2))
    lhs = conv.dir_conv(a * p + b * q, K, T)
    rhs = a * conv.dir_conv(p, K, T) + b * conv.dir_conv(q, K, T)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


_HAND = handmade(frac=0.3, floor=1)


def test_geodesic_is_pooled_directional_of_lift(noisy_windows, rng):
    T = noisy_windows[2]
    f = rng.normal(size=(T.n_vertices, 3))
    for _ in range(5):
        K = rng.normal(size=(2, T.n_theta, 3, 2))
        a = conv.geodesic_conv(f, K, T)
        b = conv.angular_max_pool(conv.dir_conv(conv.lift(f, T.n_theta), K, T))
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_fixed_variant_matches_loops(noisy_windows, rng):
    T = noisy_windows[2]
    phi = rng.normal(size=(T.n_vertices, T.n_theta, 2))
    K = rng.normal(size=(2, T.n_theta, 2, 2))
    out = conv.dir_conv_fixed(phi, K, T)
    for l in (0, 3, 7):
        want = naive_contract(naive_dir_pull(phi, T, fixed_l=l), K)[:, l]
        np.testing.assert_allclose(out[:, l], want, atol=1e-10)


def test_dir_layer_central_only(sphere_windows, rng):
    T = sphere_windows[2]
    p = conv.LayerParams.zeros(2, 8, 3, 3)
    p.central[:] = np.eye(3)
    p.bias[:] = [0.0, -1.0, 1.0]
    phi = rng.normal(size=(T.n_vertices, 8, 3))
    np.testing.assert_allclose(conv.dir_layer(phi, p, T), np.maximum(phi + p.bias, 0))
    f = phi[:, 0]
    np.testing.assert_allclose(conv.gc_layer(f, p, T), np.maximum(f + p.bias, 0))


def test_gc_layer_pools_after_activation(sphere_windows, rng):
    T = sphere_windows[2]
    p = conv.LayerParams.random(2, 8, 2, 3, rng, activation="tanh")
    f = rng.normal(size=(T.n_vertices, 2))
    resp = naive_contract(naive_pull(f, T), p.kernel) + (f @ p.central)[:, None] + p.bias
    np.testing.assert_allclose(conv.gc_layer(f, p, T), np.tanh(resp).max(axis=1), atol=1e-12)


def test_normalize(grid_windows, sphere_windows, rng):
    T = sphere_windows[2]
    phi = rng.normal(size=(T.n_vertices, 8, 1))
    K = rng.normal(size=(2, 8, 1, 1))
    np.testing.assert_allclose(conv.dir_conv(phi, K, T, normalize=True), conv.dir_conv(phi, K, T))
    G = grid_windows[2]
    phi = np.ones((G.n_vertices, 8, 1))
    K = np.ones((2, 8, 1, 1))
    out = conv.dir_conv(phi, K, G, normalize=True)
    np.testing.assert_allclose(out, 16.0)  # every truncated window rescaled to a full one


def test_shape_errors(sphere_windows):
    T = sphere_windows[2]
    with pytest.raises(ShapeMismatch):
        conv.dir_pull_back(np.zeros((T.n_vertices, 6, 1)), T)
    with pytest.raises(ShapeMismatch):
        conv.pull_back(np.zeros((5, 1)), T)
    with pytest.raises(ShapeMismatch):
        conv.contract(np.zeros((3, 2, 8, 1)), np.zeros((2, 8, 2, 1)))
    with pytest.raises(ShapeMismatch):
        conv.LayerParams(np.zeros((1, 4, 2, 3)), np.zeros((2, 2)), np.zeros(3))


def test_batch_axis(sphere_windows, rng):
    T = sphere_windows[2]
    phi = rng.normal(size=(3, T.n_vertices, 8, 2))
    K = rng.normal(size=(2, 8, 2, 2))
    batched = conv.dir_conv(phi, K, T)
    np.testing.assert_allclose(batched[1], conv.dir_conv(phi[1], K, T))


def test_float32_path(sphere_windows, rng):
    T = sphere_windows[2]
    phi = rng.normal(size=(T.n_vertices, 8, 2)).astype(np.float32)
    K = rng.normal(size=(2, 8, 2, 2)).astype(np.float32)
    out = conv.dir_conv(phi, K, T)
    assert out.dtype == np.float32
    np.testing.assert_allclose(out, conv.dir_conv(phi.astype(float), K.astype(float), T), rtol=1e-4, atol=1e-4)


def test_csv_roundtrip(tmp_path, rng):
    phi = rng.normal(size=(7, 4, 2))
    conv.save_signal_csv(tmp_path / "s.csv", phi)
    np.testing.assert_array_equal(conv.load_signal_csv(tmp_path / "s.csv", n_theta=4), phi)
    with pytest.raises(ShapeMismatch):
        conv.load_signal_csv(tmp_path / "s.csv", n_theta=3)
