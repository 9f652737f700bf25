"""Lifting, pull-backs, directional and geodesic convolution.

Array layouts (a leading batch axis is optional everywhere):

* regular signal      ``(V, C)``
* directional signal  ``(V, n_theta, C)``
* window values       ``(V, n_rho, n_theta, C)``
* polar kernel        ``(n_rho, n_theta, C_in, C_out)``

Kernel alignment: the response in direction ``l`` uses the kernel turned by
``+l`` bins, ``K[i, (j - l) mod n_theta]`` at window bin ``j``. With this sign
the output bins follow the reference direction of the vertex exactly as the
input bins do, so stacked directional layers stay equivariant.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch

ACTIVATIONS = {
    "relu": (lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0).astype(x.dtype)),
    "tanh": (np.tanh, lambda x, y: 1.0 - y * y),
    "identity": (lambda x: x, lambda x, y: np.ones_like(x)),
}


def activation(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}, choose from {sorted(ACTIVATIONS)}") from None


@dataclass
class LayerParams:
    """Kernel ``K``, central matrix ``C``, bias ``B`` and activation name."""

    kernel: np.ndarray
    central: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        nr, nt, cin, cout = self.kernel.shape
        if self.central.shape != (cin, cout) or self.bias.shape != (cout,):
            raise ShapeMismatch(f"central {self.central.shape} / bias {self.bias.shape} "
                                f"do not match kernel {self.kernel.shape}")
        activation(self.activation)

    @classmethod
    def zeros(cls, n_rho, n_theta, c_in, c_out, activation="relu", dtype=np.float64):
        return cls(np.zeros((n_rho, n_theta, c_in, c_out), dtype), np.zeros((c_in, c_out), dtype),
                   np.zeros(c_out, dtype), activation)

    @classmethod
    def random(cls, n_rho, n_theta, c_in, c_out, rng, activation="relu", dtype=np.float64):
        """He-style init with variance ``2 / (n_rho n_theta c_in + c_in)``, zero bias."""
        std = np.sqrt(2.0 / (n_rho * n_theta * c_in + c_in))
        return cls(rng.normal(scale=std, size=(n_rho, n_theta, c_in, c_out)).astype(dtype),
                   rng.normal(scale=std, size=(c_in, c_out)).astype(dtype),
                   np.zeros(c_out, dtype), activation)


# -- sparse application helpers ----------------------------------------------

def _apply_rows(op, x):
    """Apply a sparse operator to the vertex-major rows of ``x`` of shape ``(B, ..., C)``.

    Returns ``(B, op.shape[0], C)``.
    """
    b = x.shape[0]
    c = x.shape[-1]
    flat = np.moveaxis(x.reshape(b, -1, c), 0, 1).reshape(-1, b * c)
    y = op @ flat
    y = y.reshape(-1, b, c)
    return np.moveaxis(y, 1, 0)


def _batched(x, core_ndim):
    """Add a batch axis when missing; returns (array, had_batch)."""
    x = np.asarray(x)
    if x.ndim == core_ndim:
        return x[None], False
    if x.ndim == core_ndim + 1:
        return x, True
    raise ShapeMismatch(f"expected {core_ndim} or {core_ndim + 1} dims, got shape {x.shape}")


def _unbatch(y, had_batch):
    return y if had_batch else y[0]


def _check_vertices(x, tensors, axis=1):
    if x.shape[axis] != tensors.n_vertices:
        raise ShapeMismatch(f"signal has {x.shape[axis]} vertices, windows have {tensors.n_vertices}")


def _check_theta(phi, tensors):
    if phi.shape[2] != tensors.n_theta:
        raise ShapeMismatch(f"signal has {phi.shape[2]} angular bins, windows have {tensors.n_theta}")


def _window_shape(tensors):
    return tensors.n_vertices, tensors.spec.n_rho, tensors.n_theta


# -- lifting and pull-backs ----------------------------------------------------

def lift(f, n_theta):
    """Angularly constant directional signal ``phi[v, j] = f[v]``."""
    f = np.asarray(f)
    return np.repeat(f[..., None, :], n_theta, axis=-2)


def angular_max_pool(phi, return_argmax=False):
    """Max over the angular axis; ties resolve to the lowest bin."""
    phi = np.asarray(phi)
    arg = np.argmax(phi, axis=-2)
    val = np.take_along_axis(phi, arg[..., None, :], axis=-2)[..., 0, :]
    return (val, arg) if return_argmax else val


def pull_back(f, tensors):
    """Window values ``sum_m W[v,i,j,m] f[E[v,i,j,m]]``; zero at invalid points."""
    x, had = _batched(f, 2)
    _check_vertices(x, tensors)
    op = tensors.operators("spatial", x.dtype)
    y = _apply_rows(op, x)
    return _unbatch(y.reshape(x.shape[0], *_window_shape(tensors), x.shape[-1]), had)


def pull_back_adjoint(g, tensors):
    x, had = _batched(g, 4)
    y = _apply_rows(tensors.operators("spatial_T", x.dtype), x)
    return _unbatch(y.reshape(x.shape[0], tensors.n_vertices, x.shape[-1]), had)


def _next_bin(phi):
    """``phi`` shifted so that bin ``b`` holds the value of bin ``b + 1``."""
    return np.roll(phi, -1, axis=2)


def _dir_pull(phi, a_floor, a_frac, tensors):
    y = _apply_rows(a_floor, phi)
    y += _apply_rows(a_frac, _next_bin(phi) - phi)
    return y.reshape(phi.shape[0], *_window_shape(tensors), phi.shape[-1])


def _dir_pull_adjoint(g, a_floor_t, a_frac_t, tensors):
    b, c = g.shape[0], g.shape[-1]
    nv, nt = tensors.n_vertices, tensors.n_theta
    u = _apply_rows(a_floor_t, g).reshape(b, nv, nt, c)
    h = _apply_rows(a_frac_t, g).reshape(b, nv, nt, c)
    return u + np.roll(h, 1, axis=2) - h


def dir_pull_back(phi, tensors):
    """Pull-back of a directional signal with linear interpolation between angular bins."""
    x, had = _batched(phi, 3)
    _check_vertices(x, tensors)
    _check_theta(x, tensors)
    a_floor, a_frac = tensors.operators("angular", x.dtype)
    return _unbatch(_dir_pull(x, a_floor, a_frac, tensors), had)


def dir_pull_back_adjoint(g, tensors):
    x, had = _batched(g, 4)
    a_floor_t, a_frac_t = tensors.operators("angular_T", x.dtype)
    return _unbatch(_dir_pull_adjoint(x, a_floor_t, a_frac_t, tensors), had)


# -- kernel contraction --------------------------------------------------------

def rotated_kernels(K):
    """Matrix ``(n_rho n_theta C_in, n_theta C_out)`` stacking ``K[i, (j - l) mod n_theta]`` per ``l``."""
    nr, nt, cin, cout = K.shape
    j = np.arange(nt)
    idx = (j[:, None] - j[None, :]) % nt  # [j, l]
    rot = K[:, idx]  # (nr, nt_j, nt_l, cin, cout)
    return np.moveaxis(rot, 2, 3).reshape(nr * nt * cin, nt * cout)


def fold_rotated_gradient(g, shape):
    """Adjoint of :func:`rotated_kernels`: sum gradient blocks back onto ``K``."""
    nr, nt, cin, cout = shape
    g = g.reshape(nr, nt, cin, nt, cout)
    out = np.zeros(shape, dtype=g.dtype)
    for l in range(nt):
        out += np.roll(g[:, :, :, l], -l, axis=1)
    return out


def contract(X, K):
    """``out[..., v, l, q] = sum_{i,j,p} X[..., v, i, j, p] K[i, (j-l) % n_theta, p, q]``."""
    nr, nt, cin, cout = K.shape
    if X.shape[-3:] != (nr, nt, cin):
        raise ShapeMismatch(f"window values {X.shape} do not match kernel {K.shape}")
    lead = X.shape[:-3]
    y = X.reshape(-1, nr * nt * cin) @ rotated_kernels(K).astype(X.dtype, copy=False)
    return y.reshape(*lead, nt, cout)


def contract_adjoint(X, K, g):
    """Gradients ``(dX, dK)`` of :func:`contract` for upstream ``g``."""
    nr, nt, cin, cout = K.shape
    g2 = g.reshape(-1, nt * cout)
    dX = (g2 @ rotated_kernels(K).astype(g.dtype, copy=False).T).reshape(X.shape)
    dK = fold_rotated_gradient(X.reshape(-1, nr * nt * cin).T @ g2, K.shape)
    return dX, dK


def _normalizer(tensors, dtype):
    frac = tensors.valid_fraction.astype(dtype)
    return np.where(frac > 0, 1.0 / np.maximum(frac, 1e-12), 0.0)[:, None, None]


# -- convolutions --------------------------------------------------------------

def dir_conv(phi, K, tensors, normalize=False):
    """Directional convolution of ``phi`` with the polar kernel ``K``.

    ``normalize`` rescales each vertex by the inverse share of located window
    points, so windows truncated by a boundary respond like full ones.
    """
    out = contract(dir_pull_back(phi, tensors), K)
    return out * _normalizer(tensors, out.dtype) if normalize else out


def geodesic_conv(f, K, tensors, normalize=False):
    """Max over kernel rotations of the response to the regular signal ``f``."""
    out = contract(pull_back(f, tensors), K)
    if normalize:
        out = out * _normalizer(tensors, out.dtype)
    return angular_max_pool(out)


def dir_conv_fixed(phi, K, tensors):
    """Directional convolution sampling the transported query direction itself.

    Response in direction ``l`` reads, at every window point, the bin that
    direction ``l`` reaches after transport, instead of the transported radial
    direction of the window point.
    """
    x, had = _batched(phi, 3)
    _check_vertices(x, tensors)
    _check_theta(x, tensors)
    nr, nt, cin, cout = K.shape
    out = np.empty((x.shape[0], tensors.n_vertices, nt, cout), dtype=np.result_type(x, K))
    for l, (a_floor, a_frac) in enumerate(tensors.operators("fixed", x.dtype)):
        X = _dir_pull(x, a_floor, a_frac, tensors)
        out[:, :, l] = contract(X, K)[:, :, l]
    return _unbatch(out, had)


def _central(x, C, B):
    return x @ C.astype(x.dtype, copy=False) + B.astype(x.dtype, copy=False)


def dir_layer(phi, params, tensors, normalize=False):
    """``xi(dir_conv(phi, K) + phi C + B)`` with ``C`` shared across directions."""
    xi, _ = activation(params.activation)
    return xi(dir_conv(phi, params.kernel, tensors, normalize) + _central(np.asarray(phi), params.central, params.bias))


def gc_layer(f, params, tensors, normalize=False):
    """``max_l xi(rotated response_l + f C + B)``."""
    xi, _ = activation(params.activation)
    resp = contract(pull_back(f, tensors), params.kernel)
    if normalize:
        resp = resp * _normalizer(tensors, resp.dtype)
    pre = resp + _central(np.asarray(f), params.central, params.bias)[..., None, :]
    return angular_max_pool(xi(pre))


# -- CSV exchange --------------------------------------------------------------

def save_signal_csv(path, values):
    """Write a signal vertex-major: one row per vertex, trailing axes flattened."""
    values = np.asarray(values)
    np.savetxt(path, values.reshape(values.shape[0], -1), delimiter=",", fmt="%.17g")


def load_signal_csv(path, n_theta=None):
    """Read a vertex-major CSV; with ``n_theta`` the columns are split into bins."""
    a = np.loadtxt(path, delimiter=",", ndmin=2)
    if n_theta is not None:
        if a.shape[1] % n_theta:
            raise ShapeMismatch(f"{a.shape[1]} columns not divisible by n_theta={n_theta}")
        a = a.reshape(a.shape[0], n_theta, -1)
    return a
