"""Differentiable layer operations.

Every op maps a list of input arrays (batch axis first) to one output and
returns a context for :meth:`Op.backward`, which yields the input gradients
and a dict of parameter gradients keyed like the parameter dict.
"""

import math

import numpy as np
from scipy import sparse

from .. import conv
from ..errors import MissingContext, ShapeMismatch

TWO_PI = 2.0 * math.pi


class Op:
    """Base class. ``param_shapes`` maps parameter suffixes to shapes."""

    n_inputs = 1
    name = None

    def param_shapes(self):
        return {}

    def out_shape(self, in_shapes):
        """Shape (without batch axis) of the output for input shapes."""
        raise NotImplementedError

    def forward(self, inputs, params):
        raise NotImplementedError

    def backward(self, ctx, grad, params):
        if ctx is None:
            raise MissingContext(f"{type(self).__name__}.backward called without a forward context")
        return self._backward(ctx, grad, params)

    def p(self, params, key):
        return params[f"{self.name}.{key}"]

    def init_params(self, rng, dtype=np.float64):
        return {}


def _expect(shape, expected, what):
    if tuple(shape) != tuple(expected):
        raise ShapeMismatch(f"{what}: expected {tuple(expected)}, got {tuple(shape)}")


class Lift(Op):
    def __init__(self, n_vertices, n_theta):
        self.n_vertices, self.n_theta = n_vertices, n_theta

    def out_shape(self, in_shapes):
        (v, c), = in_shapes
        _expect((v,), (self.n_vertices,), "lift vertices")
        return (v, self.n_theta, c)

    def forward(self, inputs, params):
        return conv.lift(inputs[0], self.n_theta), True

    def _backward(self, ctx, grad, params):
        return [grad.sum(axis=2)], {}


class _ConvBase(Op):
    def __init__(self, tensors, c_in, c_out, activation="relu", normalize=False):
        self.tensors = tensors
        self.c_in, self.c_out = c_in, c_out
        self.activation = activation
        self.normalize = normalize

    def param_shapes(self):
        s = self.tensors.spec
        return {"kernel": (s.n_rho, s.n_theta, self.c_in, self.c_out),
                "central": (self.c_in, self.c_out), "bias": (self.c_out,)}

    def init_params(self, rng, dtype=np.float64):
        s = self.tensors.spec
        lp = conv.LayerParams.random(s.n_rho, s.n_theta, self.c_in, self.c_out, rng, self.activation, dtype)
        return {f"{self.name}.kernel": lp.kernel, f"{self.name}.central": lp.central,
                f"{self.name}.bias": lp.bias}

    def _scale(self, dtype):
        if not self.normalize:
            return None
        return conv._normalizer(self.tensors, dtype)[None]


class DirConv(_ConvBase):
    """Directional geodesic convolution layer ``xi(phi * K + phi C + B)``."""

    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        _expect(shape, (self.tensors.n_vertices, self.tensors.n_theta, self.c_in), f"{self.name} input")
        return (self.tensors.n_vertices, self.tensors.n_theta, self.c_out)

    def forward(self, inputs, params):
        phi = inputs[0]
        K, C, B = (self.p(params, k) for k in ("kernel", "central", "bias"))
        X = conv.dir_pull_back(phi, self.tensors)
        resp = conv.contract(X, K)
        scale = self._scale(resp.dtype)
        if scale is not None:
            resp = resp * scale
        pre = resp + phi @ C + B
        xi, _ = conv.activation(self.activation)
        y = xi(pre)
        return y, (phi, X, pre, y)

    def _backward(self, ctx, grad, params):
        phi, X, pre, y = ctx
        K, C = self.p(params, "kernel"), self.p(params, "central")
        _, dxi = conv.activation(self.activation)
        gp = grad * dxi(pre, y)
        gr = gp
        scale = self._scale(gp.dtype)
        if scale is not None:
            gr = gp * scale
        dX, dK = conv.contract_adjoint(X, K, gr)
        dphi = conv.dir_pull_back_adjoint(dX, self.tensors) + gp @ C.T
        dC = phi.reshape(-1, self.c_in).T @ gp.reshape(-1, self.c_out)
        dB = gp.reshape(-1, self.c_out).sum(axis=0)
        return [dphi], {f"{self.name}.kernel": dK, f"{self.name}.central": dC, f"{self.name}.bias": dB}


class GcConv(_ConvBase):
    """Geodesic convolution layer ``max_l xi(rotated response_l + f C + B)``."""

    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        _expect(shape, (self.tensors.n_vertices, self.c_in), f"{self.name} input")
        return (self.tensors.n_vertices, self.c_out)

    def forward(self, inputs, params):
        f = inputs[0]
        K, C, B = (self.p(params, k) for k in ("kernel", "central", "bias"))
        X = conv.pull_back(f, self.tensors)
        resp = conv.contract(X, K)
        scale = self._scale(resp.dtype)
        if scale is not None:
            resp = resp * scale
        pre = resp + (f @ C + B)[:, :, None, :]
        xi, _ = conv.activation(self.activation)
        a = xi(pre)
        y, arg = conv.angular_max_pool(a, return_argmax=True)
        return y, (f, X, pre, a, arg)

    def _backward(self, ctx, grad, params):
        f, X, pre, a, arg = ctx
        K, C = self.p(params, "kernel"), self.p(params, "central")
        _, dxi = conv.activation(self.activation)
        ga = np.zeros_like(a)
        np.put_along_axis(ga, arg[:, :, None, :], grad[:, :, None, :], axis=2)
        gp = ga * dxi(pre, a)
        gr = gp
        scale = self._scale(gp.dtype)
        if scale is not None:
            gr = gp * scale
        dX, dK = conv.contract_adjoint(X, K, gr)
        gc = gp.sum(axis=2)
        df = conv.pull_back_adjoint(dX, self.tensors) + gc @ C.T
        dC = f.reshape(-1, self.c_in).T @ gc.reshape(-1, self.c_out)
        dB = gc.reshape(-1, self.c_out).sum(axis=0)
        return [df], {f"{self.name}.kernel": dK, f"{self.name}.central": dC, f"{self.name}.bias": dB}


class AngularMaxPool(Op):
    def out_shape(self, in_shapes):
        (v, nt, c), = in_shapes
        return (v, c)

    def forward(self, inputs, params):
        y, arg = conv.angular_max_pool(inputs[0], return_argmax=True)
        return y, (inputs[0].shape, arg)

    def _backward(self, ctx, grad, params):
        shape, arg = ctx
        g = np.zeros(shape, dtype=grad.dtype)
        np.put_along_axis(g, arg[:, :, None, :], grad[:, :, None, :], axis=2)
        return [g], {}


def _bin_interp_matrix(rows_vertex, cols_vertex, shift, n_theta, n_rows_v, n_cols_v):
    """Sparse map ``out[r, b] = (1-t) in[c, fl] + t in[c, fl+1]`` with ``fl + t = b + shift[r]``."""
    b = np.arange(n_theta)
    x = shift[:, None] + b[None, :]
    near = np.rint(x)
    x = np.where(np.abs(x - near) < 1e-9, near, x)
    fl = np.floor(x)
    t = x - fl
    fl = fl.astype(np.int64) % n_theta
    rows = (rows_vertex[:, None] * n_theta + b[None, :]).ravel()
    c0 = (cols_vertex[:, None] * n_theta + fl).ravel()
    c1 = (cols_vertex[:, None] * n_theta + (fl + 1) % n_theta).ravel()
    data = np.r_[(1.0 - t).ravel(), t.ravel()]
    m = sparse.csr_matrix((data, (np.r_[rows, rows], np.r_[c0, c1])),
                          shape=(n_rows_v * n_theta, n_cols_v * n_theta))
    m.eliminate_zeros()
    return m


def pool_matrix(smap, n_theta=None):
    """Fine-to-coarse transfer; directional when ``n_theta`` is given.

    Coarse vertex ``u`` reads its representative fine vertex; a coarse bin
    ``b`` reads the fine direction ``b - offset`` (in bins).
    """
    rep = smap.representative
    nc, nf = smap.n_coarse, smap.n_fine
    if n_theta is None:
        return sparse.csr_matrix((np.ones(nc), (np.arange(nc), rep)), shape=(nc, nf))
    shift = -smap.angle_offset[rep] * n_theta / TWO_PI
    return _bin_interp_matrix(np.arange(nc), rep, shift, n_theta, nc, nf)


def unpool_matrix(smap, n_theta=None):
    """Coarse-to-fine transfer: fine vertex ``w`` reads its coarse vertex, bin ``b + offset``."""
    f2c = smap.fine_to_coarse
    nc, nf = smap.n_coarse, smap.n_fine
    if n_theta is None:
        return sparse.csr_matrix((np.ones(nf), (np.arange(nf), f2c)), shape=(nf, nc))
    shift = smap.angle_offset * n_theta / TWO_PI
    return _bin_interp_matrix(np.arange(nf), f2c, shift, n_theta, nf, nc)


class _Transfer(Op):
    def __init__(self, smap, n_theta=None):
        self.smap = smap
        self.n_theta = n_theta
        self._cache = {}

    def _matrix(self, dtype, transpose=False):
        key = (np.dtype(dtype), transpose)
        if key not in self._cache:
            m = self._build().astype(dtype)
            self._cache[key] = m.T.tocsr() if transpose else m
        return self._cache[key]

    def _io(self):
        raise NotImplementedError

    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        n_in, n_out = self._io()
        _expect(shape[:1], (n_in,), f"{type(self).__name__} vertices")
        if self.n_theta is not None:
            _expect(shape[1:2], (self.n_theta,), f"{type(self).__name__} angular bins")
        return (n_out,) + tuple(shape[1:])

    def forward(self, inputs, params):
        x = inputs[0]
        n_in, n_out = self._io()
        if x.shape[1] != n_in:
            raise ShapeMismatch(f"transfer expects {n_in} vertices, got {x.shape[1]}")
        y = conv._apply_rows(self._matrix(x.dtype), x)
        return y.reshape((x.shape[0], n_out) + x.shape[2:]), x.shape

    def _backward(self, ctx, grad, params):
        y = conv._apply_rows(self._matrix(grad.dtype, True), grad)
        return [y.reshape(ctx)], {}


class Pool(_Transfer):
    def _build(self):
        return pool_matrix(self.smap, self.n_theta)

    def _io(self):
        return self.smap.n_fine, self.smap.n_coarse


class Unpool(_Transfer):
    def _build(self):
        return unpool_matrix(self.smap, self.n_theta)

    def _io(self):
        return self.smap.n_coarse, self.smap.n_fine


class Add(Op):
    n_inputs = 2

    def out_shape(self, in_shapes):
        a, b = in_shapes
        _expect(b, a, "residual add")
        return tuple(a)

    def forward(self, inputs, params):
        return inputs[0] + inputs[1], True

    def _backward(self, ctx, grad, params):
        return [grad, grad], {}


class GlobalAverage(Op):
    """Mean over vertices."""

    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        return tuple(shape[1:])

    def forward(self, inputs, params):
        return inputs[0].mean(axis=1), inputs[0].shape

    def _backward(self, ctx, grad, params):
        n = ctx[1]
        return [np.broadcast_to(grad[:, None] / n, ctx).copy()], {}


class Dense(Op):
    """Affine map on the last axis."""

    def __init__(self, c_in, c_out):
        self.c_in, self.c_out = c_in, c_out

    def param_shapes(self):
        return {"weight": (self.c_in, self.c_out), "bias": (self.c_out,)}

    def init_params(self, rng, dtype=np.float64):
        std = np.sqrt(1.0 / self.c_in)
        return {f"{self.name}.weight": rng.normal(scale=std, size=(self.c_in, self.c_out)).astype(dtype),
                f"{self.name}.bias": np.zeros(self.c_out, dtype)}

    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        _expect(shape[-1:], (self.c_in,), f"{self.name} input channels")
        return tuple(shape[:-1]) + (self.c_out,)

    def forward(self, inputs, params):
        x = inputs[0]
        return x @ self.p(params, "weight") + self.p(params, "bias"), x

    def _backward(self, ctx, grad, params):
        x = ctx
        g2 = grad.reshape(-1, self.c_out)
        return [grad @ self.p(params, "weight").T], {
            f"{self.name}.weight": x.reshape(-1, self.c_in).T @ g2,
            f"{self.name}.bias": g2.sum(axis=0)}


class Softmax(Op):
    """Softmax over the last axis."""

    def out_shape(self, in_shapes):
        return tuple(in_shapes[0])

    def forward(self, inputs, params):
        y = softmax(inputs[0])
        return y, y

    def _backward(self, ctx, grad, params):
        y = ctx
        return [y * (grad - (grad * y).sum(axis=-1, keepdims=True))], {}


def softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)
