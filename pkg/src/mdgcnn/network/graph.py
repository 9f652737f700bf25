"""Layer graphs and the ResNet / U-ResNet builders."""

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ..errors import ConfigInvalid, MissingContext, ShapeMismatch
from .ops import (Add, AngularMaxPool, Dense, DirConv, GcConv, GlobalAverage, Lift, Pool, Softmax,
                  Unpool)


class LayerGraph:
    """Directed acyclic graph of ops evaluated in insertion order.

    Parameters
    ----------
    input_shape : tuple
        Shape of one sample, without the batch axis.
    """

    def __init__(self, input_shape):
        self.input_shape = tuple(input_shape)
        self.nodes = []  # (name, op, input names)
        self.shapes = {"input": self.input_shape}
        self._ctx = None

    def add(self, name, op, inputs):
        if name in self.shapes:
            raise ConfigInvalid(f"duplicate node name {name!r}")
        inputs = [inputs] if isinstance(inputs, str) else list(inputs)
        for i in inputs:
            if i not in self.shapes:
                raise ConfigInvalid(f"node {name!r} reads unknown node {i!r}")
        op.name = name
        self.shapes[name] = op.out_shape([self.shapes[i] for i in inputs])
        self.nodes.append((name, op, inputs))
        return name

    @property
    def output(self):
        return self.nodes[-1][0]

    @property
    def logits(self):
        """Node feeding the final softmax (or the output when there is none)."""
        name, op, inputs = self.nodes[-1]
        return inputs[0] if isinstance(op, Softmax) else name

    def param_shapes(self):
        out = {}
        for name, op, _ in self.nodes:
            for k, s in op.param_shapes().items():
                out[f"{name}.{k}"] = tuple(s)
        return out

    def init_params(self, rng, dtype=np.float64):
        params = {}
        for _, op, _ in self.nodes:
            params.update(op.init_params(rng, dtype))
        return params

    def check_params(self, params):
        want = self.param_shapes()
        if set(want) != set(params):
            raise ShapeMismatch(f"parameter names differ: missing {sorted(set(want) - set(params))}, "
                                f"unexpected {sorted(set(params) - set(want))}")
        for k, s in want.items():
            if tuple(params[k].shape) != s:
                raise ShapeMismatch(f"parameter {k}: expected {s}, got {params[k].shape}")

    def forward(self, x, params, until=None, keep_context=True):
        """Run the graph on a batch ``x`` of shape ``(B, *input_shape)``."""
        x = np.asarray(x)
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeMismatch(f"graph input expects {self.input_shape}, got {tuple(x.shape[1:])}")
        values = {"input": x}
        ctx = {}
        until = self.output if until is None else until
        for name, op, inputs in self.nodes:
            values[name], ctx[name] = op.forward([values[i] for i in inputs], params)
            if name == until:
                break
        self._ctx = (ctx, until) if keep_context else None
        return values[until]

    def backward(self, grad, params):
        """Gradients of ``sum(grad * output)`` for the last :meth:`forward` call.

        Returns ``(input_gradient, parameter_gradients)``.
        """
        if self._ctx is None:
            raise MissingContext("backward called before forward")
        ctx, until = self._ctx
        grads = {until: grad}
        pgrads = {k: np.zeros_like(v) for k, v in params.items()}
        names = [n for n, _, _ in self.nodes]
        for name, op, inputs in reversed(self.nodes[: names.index(until) + 1]):
            g = grads.pop(name, None)
            if g is None:
                continue
            gin, gp = op.backward(ctx[name], g, params)
            for k, v in gp.items():
                pgrads[k] += v
            for i, gi in zip(inputs, gin):
                grads[i] = grads[i] + gi if i in grads else gi
        return grads.get("input"), pgrads


@dataclass
class ArchConfig:
    """Architecture description shared by :func:`build_resnet` and :func:`build_uresnet`.

    ``blocks`` residual blocks (two convolutions plus identity skip) per stack;
    between stacks the signal is pooled to the next pyramid level and the
    filter count doubles.
    """

    kind: str = "resnet"
    stacks: int = 1
    blocks: int = 1
    filters: int = 16
    in_channels: int = 1
    n_classes: int = 2
    model: str = "mdgcnn"
    activation: str = "relu"
    normalize: bool = False

    def validate(self):
        if self.kind not in ("resnet", "uresnet"):
            raise ConfigInvalid(f"kind must be resnet or uresnet, got {self.kind!r}")
        if self.model not in ("mdgcnn", "gcnn"):
            raise ConfigInvalid(f"model must be mdgcnn or gcnn, got {self.model!r}")
        for k in ("stacks", "filters", "in_channels", "n_classes"):
            if getattr(self, k) < 1:
                raise ConfigInvalid(f"{k} must be >= 1")
        if self.blocks < 0:
            raise ConfigInvalid("blocks must be >= 0")
        return self

    @classmethod
    def from_dict(cls, d):
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigInvalid(f"unknown config keys {sorted(unknown)}")
        out = {}
        for k, v in d.items():
            default = getattr(cls, k)
            try:
                if isinstance(default, bool):
                    out[k] = v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")
                else:
                    out[k] = type(default)(v)
            except (TypeError, ValueError) as exc:
                raise ConfigInvalid(f"bad value for {k}: {v!r}") from exc
        return cls(**out).validate()

    @classmethod
    def load(cls, path):
        """Read a JSON object or ``key=value`` lines."""
        text = Path(path).read_text()
        try:
            d = json.loads(text)
        except json.JSONDecodeError:
            d = {}
            for line in text.splitlines():
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigInvalid(f"cannot parse config line {line!r}")
                k, v = line.split("=", 1)
                d[k.strip()] = v.strip()
        if not isinstance(d, dict):
            raise ConfigInvalid("config must be an object")
        return cls.from_dict(d)

    def to_dict(self):
        return asdict(self)


def _needed_levels(cfg, pyramid):
    if cfg.stacks > pyramid.n_levels:
        raise ConfigInvalid(f"{cfg.stacks} stacks need {cfg.stacks} pyramid levels, have {pyramid.n_levels}")


class _Builder:
    def __init__(self, cfg, pyramid):
        self.cfg = cfg
        self.pyr = pyramid
        self.dir = cfg.model == "mdgcnn"
        self.nt = pyramid.spec.n_theta
        self.g = LayerGraph((pyramid.meshes[0].n_vertices, cfg.in_channels))
        self.count = 0

    def _name(self, prefix):
        self.count += 1
        return f"{prefix}{self.count}"

    def conv(self, x, level, c_in, c_out, activation=None, prefix="conv"):
        cls = DirConv if self.dir else GcConv
        op = cls(self.pyr.tensors[level], c_in, c_out, activation or self.cfg.activation, self.cfg.normalize)
        return self.g.add(self._name(prefix), op, x)

    def block(self, x, level, f):
        h = self.conv(x, level, f, f, prefix="res_a")
        h = self.conv(h, level, f, f, activation="identity", prefix="res_b")
        return self.g.add(self._name("add"), Add(), [x, h])

    def transfer(self, x, level, down):
        smap = self.pyr.maps[level]
        nt = self.nt if self.dir else None
        op = Pool(smap, nt) if down else Unpool(smap, nt)
        return self.g.add(self._name("pool" if down else "unpool"), op, x)

    def trunk(self):
        """Encoder; returns the last node and per-level outputs."""
        cfg = self.cfg
        x = "input"
        if self.dir:
            x = self.g.add("lift", Lift(self.pyr.meshes[0].n_vertices, self.nt), x)
        x = self.conv(x, 0, cfg.in_channels, cfg.filters, prefix="stem")
        skips = []
        f = cfg.filters
        for s in range(cfg.stacks):
            if s > 0:
                x = self.transfer(x, s - 1, down=True)
                x = self.conv(x, s, f, 2 * f, prefix="widen")
                f *= 2
            for _ in range(cfg.blocks):
                x = self.block(x, s, f)
            skips.append((x, f))
        return x, skips


def build_resnet(cfg, pyramid):
    """Classification network: encoder, angular max pooling, vertex average, dense, softmax."""
    cfg = cfg.validate()
    _needed_levels(cfg, pyramid)
    b = _Builder(cfg, pyramid)
    x, skips = b.trunk()
    f = skips[-1][1]
    if b.dir:
        x = b.g.add("amp", AngularMaxPool(), x)
    x = b.g.add("average", GlobalAverage(), x)
    x = b.g.add("dense", Dense(f, cfg.n_classes), x)
    b.g.add("softmax", Softmax(), x)
    return b.g


def build_uresnet(cfg, pyramid):
    """Per-vertex labelling network: encoder, mirrored decoder with skips, dense, softmax.

    The decoder runs one stack on the coarsest level, then for every finer
    level unpools, halves the filters, adds the encoder output of that level
    and runs another stack.
    """
    cfg = cfg.validate()
    _needed_levels(cfg, pyramid)
    b = _Builder(cfg, pyramid)
    x, skips = b.trunk()
    f = skips[-1][1]
    for _ in range(cfg.blocks):
        x = b.block(x, cfg.stacks - 1, f)
    for s in range(cfg.stacks - 2, -1, -1):
        x = b.transfer(x, s, down=False)
        x = b.conv(x, s, f, f // 2, prefix="narrow")
        f //= 2
        x = b.g.add(b._name("skip"), Add(), [x, skips[s][0]])
        for _ in range(cfg.blocks):
            x = b.block(x, s, f)
    if b.dir:
        x = b.g.add("amp", AngularMaxPool(), x)
    x = b.g.add("dense", Dense(f, cfg.n_classes), x)
    b.g.add("softmax", Softmax(), x)
    return b.g


def build(cfg, pyramid):
    return (build_resnet if cfg.kind == "resnet" else build_uresnet)(cfg, pyramid)
