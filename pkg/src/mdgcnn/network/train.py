"""Cross-entropy loss, ADAM and the training loop."""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteLoss, ShapeMismatch
from .ops import softmax

logger = logging.getLogger(__name__)


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient with respect to ``logits``.

    ``labels`` index the last axis of ``logits``; every other axis is averaged.
    """
    p = softmax(logits)
    flat = p.reshape(-1, p.shape[-1])
    lab = np.asarray(labels).reshape(-1)
    if len(lab) != len(flat):
        raise ShapeMismatch(f"{len(lab)} labels for {len(flat)} predictions")
    n = len(lab)
    logp = np.log(np.maximum(flat[np.arange(n), lab], np.finfo(flat.dtype).tiny))
    loss = -float(logp.mean())
    g = flat.copy()
    g[np.arange(n), lab] -= 1.0
    return loss, (g / n).reshape(p.shape)


@dataclass
class Adam:
    """ADAM with bias correction."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params, grads):
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(params[k].dtype)


def predict(graph, params, x, batch=10):
    """Class probabilities for every sample of ``x``."""
    out = [graph.forward(x[i:i + batch], params, keep_context=False) for i in range(0, len(x), batch)]
    return np.concatenate(out)


def accuracy(probs, labels):
    return float(np.mean(np.argmax(probs, axis=-1) == np.asarray(labels)))


def train(graph, x, y, epochs=50, batch=10, seed=0, params=None, dtype=np.float64,
          x_test=None, y_test=None, log_path=None, lr=1e-3):
    """Minimize cross-entropy with ADAM.

    Parameters
    ----------
    graph : LayerGraph
    x : ndarray, shape (n_samples, *graph.input_shape)
    y : ndarray of int
        One label per sample (classification) or per vertex (segmentation).
    epochs, batch, seed : int
        The seed fixes initialization and the shuffling order.
    params : dict, optional
        Starting parameters; initialized from ``seed`` when omitted.
    dtype : numpy dtype
        Float type used for parameters and activations.

    Returns
    -------
    params : dict
    history : list of dict
        Per epoch: ``epoch``, ``loss``, ``accuracy`` and, with test data,
        ``test_accuracy``.
    """
    x = np.asarray(x, dtype=dtype)
    y = np.asarray(y)
    if tuple(x.shape[1:]) != graph.input_shape:
        raise ShapeMismatch(f"data samples have shape {x.shape[1:]}, graph expects {graph.input_shape}")
    if len(y) != len(x):
        raise ShapeMismatch(f"{len(y)} labels for {len(x)} samples")
    rng = np.random.default_rng(seed)
    if params is None:
        params = graph.init_params(rng, dtype)
    else:
        graph.check_params(params)
        params = {k: np.array(v, dtype=dtype) for k, v in params.items()}
    opt = Adam(lr=lr)
    history = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(x))
        losses, correct, seen = [], 0.0, 0
        for start in range(0, len(x), batch):
            idx = order[start:start + batch]
            logits = graph.forward(x[idx], params, until=graph.logits)
            loss, g = cross_entropy(logits, y[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss} at epoch {epoch}")
            _, grads = graph.backward(g.astype(dtype), params)
            opt.step(params, grads)
            losses.append(loss * len(idx))
            correct += np.sum(np.argmax(logits, axis=-1) == y[idx]) / np.prod(y[idx].shape[1:], dtype=float)
            seen += len(idx)
        row = {"epoch": epoch, "loss": float(np.sum(losses) / seen), "accuracy": float(correct / seen)}
        if x_test is not None:
            row["test_accuracy"] = accuracy(predict(graph, params, np.asarray(x_test, dtype=dtype)), y_test)
        history.append(row)
        logger.info("epoch %d %s", epoch, row)
    if log_path is not None:
        write_log(log_path, history)
    return params, history


def write_log(path, history):
    cols = ["epoch", "loss", "accuracy"] + (["test_accuracy"] if history and "test_accuracy" in history[0] else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in history:
            w.writerow({k: (f"{row[k]:.10g}" if isinstance(row[k], float) else row[k]) for k in cols})
