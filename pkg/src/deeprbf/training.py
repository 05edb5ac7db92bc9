"""Losses, analytic backpropagation and gradient-descent training."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError, LabelError, NonFiniteLossError
from .network import ForwardTrace, RbfNetwork, kernel_bank, network_forward, output_activation_apply

LOSS_KINDS = ("mse", "cross_entropy")
BATCH_MODES = ("full_batch", "per_sample")
PROB_CLAMP = 1e-12


def _pair(predicted, actual):
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise DimensionError(f"predicted shape {p.shape} != actual shape {a.shape}")
    if p.size == 0:
        raise DimensionError("empty prediction")
    return p, a


def mse_loss(predicted, actual) -> float:
    """Mean of the squared error over every scalar component."""
    p, a = _pair(predicted, actual)
    return float(np.mean((p - a) ** 2))


def _is_binary(p):
    return p.ndim == 0 or p.shape[-1] == 1


def _check_labels(a, binary):
    if not np.all((a == 0.0) | (a == 1.0)):
        raise LabelError("labels must be 0/1 (binary) or one-hot rows (multiclass)")
    if not binary:
        rows = a.reshape(-1, a.shape[-1])
        if not np.all(rows.sum(axis=1) == 1.0):
            raise LabelError("multiclass targets must be one-hot rows")


def cross_entropy_loss(predicted, actual) -> float:
    """Binary or categorical cross-entropy, averaged over samples.

    A trailing dimension of 1 (or a scalar) selects the binary form
    ``-[y ln p + (1-y) ln(1-p)]``; otherwise each row is one sample's class
    distribution scored with ``-sum t ln p``.  Probabilities are clamped to
    ``[1e-12, 1 - 1e-12]`` before taking logs.
    """
    p, a = _pair(predicted, actual)
    binary = _is_binary(p)
    _check_labels(a, binary)
    q = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    if binary:
        return float(np.mean(-(a * np.log(q) + (1.0 - a) * np.log1p(-q))))
    per_sample = -np.sum(a * np.log(q), axis=-1)
    return float(np.mean(per_sample))


def compute_loss(predicted, actual, loss_kind) -> float:
    if loss_kind == "mse":
        return mse_loss(predicted, actual)
    if loss_kind == "cross_entropy":
        return cross_entropy_loss(predicted, actual)
    raise ConfigError(f"unknown loss kind {loss_kind!r}")


def mean_loss(net: RbfNetwork, X, Y, loss_kind="mse") -> float:
    """Loss of ``net`` over a whole dataset (rows of ``X`` against rows of ``Y``)."""
    return compute_loss(network_forward(np.atleast_2d(X), net).output, np.atleast_2d(Y), loss_kind)


def _loss_grad(y, t, loss_kind):
    """dL/d(output) for a batch ``(n, k)`` where L is the batch loss."""
    n, k = y.shape
    if loss_kind == "mse":
        return 2.0 * (y - t) / (n * k)
    if loss_kind == "cross_entropy":
        binary = k == 1
        _check_labels(t, binary)
        q = np.clip(y, PROB_CLAMP, 1.0 - PROB_CLAMP)
        inside = (y > PROB_CLAMP) & (y < 1.0 - PROB_CLAMP)
        if binary:
            g = -t / q + (1.0 - t) / (1.0 - q)
        else:
            g = -t / q
        return np.where(inside, g, 0.0) / n
    raise ConfigError(f"unknown loss kind {loss_kind!r}")


def _activation_vjp(g, y, kind):
    if kind == "linear":
        return g
    if kind == "sigmoid":
        return g * y * (1.0 - y)
    if kind == "softmax":
        return y * (g - np.sum(g * y, axis=1, keepdims=True))
    raise ConfigError(f"unknown output activation {kind!r}")


@dataclass(frozen=True)
class Gradients:
    """dL/dW and dL/db per hidden layer, then for the output layer."""

    hidden: tuple[tuple[np.ndarray, np.ndarray], ...]
    output: tuple[np.ndarray, np.ndarray]

    def arrays(self):
        out = []
        for w, b in self.hidden:
            out += [w, b]
        return out + list(self.output)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def scaled(self, s) -> "Gradients":
        return Gradients(tuple((s * w, s * b) for w, b in self.hidden), (s * self.output[0], s * self.output[1]))

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients(
            tuple((w1 + w2, b1 + b2) for (w1, b1), (w2, b2) in zip(self.hidden, other.hidden)),
            (self.output[0] + other.output[0], self.output[1] + other.output[1]),
        )


def _backward(hidden_weights, out_weights, geometry, activation, acts, affs, x, y, t, loss_kind):
    """Core chain rule on plain arrays (batch rows).  Returns list of (dW, db)."""
    delta = _activation_vjp(_loss_grad(y, t, loss_kind), y, activation)
    last = affs[-1] if affs else x
    out_grad = (delta.T @ last, delta.sum(axis=0))
    dh = delta @ out_weights
    hidden = [None] * len(hidden_weights)
    for i in range(len(hidden_weights) - 1, -1, -1):
        a = acts[i]
        hidden[i] = (dh.T @ a, dh.sum(axis=0))
        if i == 0:
            break
        centers, widths = geometry[i]
        h = affs[i - 1]
        da = dh @ hidden_weights[i]
        # d a_j / d h = -a_j (h - c_j) / sigma_j^2
        coef = da * a / (widths * widths)
        dh = coef @ centers - coef.sum(axis=1, keepdims=True) * h
    return hidden, out_grad


def backprop(net: RbfNetwork, trace: ForwardTrace, target, loss_kind="mse") -> Gradients:
    """Analytic gradients of the loss of ``trace`` against ``target``.

    Handles a single-sample trace or a batch trace; for a batch the gradient
    is that of the batch-mean loss.  Centers and widths get no gradient.
    """
    single = trace.output.ndim == 1
    t = np.asarray(target, dtype=np.float64)
    if t.shape != trace.output.shape:
        raise DimensionError(f"target shape {t.shape} != output shape {trace.output.shape}")
    if single:
        lift = lambda v: v[None, :]
        x, y, t = lift(trace.input), lift(trace.output), lift(t)
        acts = [lift(a) for a in trace.rbf_activations]
        affs = [lift(z) for z in trace.affine_outputs]
    else:
        x, y = trace.input, trace.output
        acts, affs = list(trace.rbf_activations), list(trace.affine_outputs)
    if len(acts) != len(net.hidden_layers):
        raise DimensionError("trace does not match the network's depth")
    hidden, out = _backward(
        [l.weights for l in net.hidden_layers],
        net.output_weights,
        net.geometry,
        net.output_activation,
        acts, affs, x, y, t, loss_kind,
    )
    return Gradients(tuple(hidden), out)


def finite_difference_gradients(net: RbfNetwork, input, target, loss_kind="mse", eps=1e-6) -> Gradients:
    """Central differences ``(L(theta+eps) - L(theta-eps)) / 2eps`` for every weight and bias."""
    if not eps > 0:
        raise ConfigError("eps must be > 0")
    X = np.asarray(input, dtype=np.float64)
    T = np.asarray(target, dtype=np.float64)
    params = [[l.weights.copy(), l.biases.copy()] for l in net.hidden_layers]
    params.append([net.output_weights.copy(), net.output_biases.copy()])

    def loss_now():
        candidate = net.with_parameters([tuple(p) for p in params[:-1]], tuple(params[-1]))
        return compute_loss(network_forward(X, candidate).output, T, loss_kind)

    grads = []
    for pair in params:
        pair_grads = []
        for arr in pair:
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + eps
                up = loss_now()
                arr[idx] = orig - eps
                down = loss_now()
                arr[idx] = orig
                g[idx] = (up - down) / (2.0 * eps)
            pair_grads.append(g)
        grads.append(tuple(pair_grads))
    return Gradients(tuple(grads[:-1]), grads[-1])


def max_relative_error(a: Gradients, b: Gradients, floor=1e-8) -> float:
    """max |a - b| / max(|a|, |b|, floor) over all components."""
    fa, fb = a.flat(), b.flat()
    if fa.shape != fb.shape:
        raise DimensionError("gradient layouts differ")
    if fa.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(fa), np.abs(fb)), floor)
    return float(np.max(np.abs(fa - fb) / denom))


def sgd_update(net: RbfNetwork, grads: Gradients, learning_rate) -> RbfNetwork:
    """One descent step ``p <- p - learning_rate * dL/dp`` on every weight and bias."""
    if len(grads.hidden) != len(net.hidden_layers):
        raise DimensionError("gradient depth does not match network")
    hidden = []
    for layer, (dw, db) in zip(net.hidden_layers, grads.hidden):
        if dw.shape != layer.weights.shape or db.shape != layer.biases.shape:
            raise DimensionError("hidden gradient shape mismatch")
        hidden.append((layer.weights - learning_rate * dw, layer.biases - learning_rate * db))
    dw, db = grads.output
    if dw.shape != net.output_weights.shape or db.shape != net.output_biases.shape:
        raise DimensionError("output gradient shape mismatch")
    output = (net.output_weights - learning_rate * dw, net.output_biases - learning_rate * db)
    return net.with_parameters(hidden, output)


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.01
    num_epochs: int = 100
    loss_kind: str = "mse"
    batch_mode: str = "full_batch"
    # (min_delta, patience): stop once the epoch loss improves by less than
    # min_delta for `patience` consecutive epochs
    convergence: Optional[tuple[float, int]] = None
    seed: int = 0

    def __post_init__(self):
        # 0 is accepted: a frozen run that only records the loss
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise ConfigError("learning_rate must be finite and >= 0")
        if int(self.num_epochs) < 1:
            raise ConfigError("num_epochs must be >= 1")
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.loss_kind!r}")
        if self.batch_mode not in BATCH_MODES:
            raise ConfigError(f"unknown batch mode {self.batch_mode!r}")
        if self.convergence is not None:
            delta, patience = self.convergence
            if delta < 0 or int(patience) < 1:
                raise ConfigError("convergence needs min_delta >= 0 and patience >= 1")


@dataclass
class LossHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: Optional[list[float]] = None

    def __len__(self):
        return len(self.train_loss)

    def to_csv(self) -> str:
        buf = io.StringIO()
        has_val = self.val_loss is not None
        buf.write("epoch,train_loss,val_loss\n" if has_val else "epoch,train_loss\n")
        for i, loss in enumerate(self.train_loss):
            row = [str(i), repr(float(loss))]
            if has_val:
                row.append(repr(float(self.val_loss[i])))
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def _forward_raw(x, geometry, hidden, out, activation):
    acts, affs = [], []
    h = x
    for (centers, widths), (w, b) in zip(geometry, hidden):
        a = kernel_bank(h, centers, widths)
        h = a @ w.T + b
        acts.append(a)
        affs.append(h)
    pre = h @ out[0].T + out[1]
    return acts, affs, output_activation_apply(pre, activation)


def train(net: RbfNetwork, X, Y, config: TrainingConfig = TrainingConfig(), X_val=None, Y_val=None):
    """Gradient-descent training; returns ``(trained_network, LossHistory)``.

    The recorded loss of an epoch is the mean loss seen during that epoch,
    before its updates (full batch) or before each sample's update
    (per sample).  ``config.seed`` drives the per-sample visiting order.
    """
    X = np.array(X, dtype=np.float64, ndmin=2)
    Y = np.array(Y, dtype=np.float64, ndmin=2)
    if X.shape[0] == 0:
        raise DimensionError("empty training set")
    if X.shape[0] != Y.shape[0]:
        raise DimensionError("X and Y have different sample counts")
    if X.shape[1] != net.input_dim or Y.shape[1] != net.output_dim:
        raise DimensionError(
            f"data dims ({X.shape[1]}, {Y.shape[1]}) do not match network ({net.input_dim}, {net.output_dim})"
        )
    has_val = X_val is not None
    if has_val:
        X_val = np.array(X_val, dtype=np.float64, ndmin=2)
        Y_val = np.array(Y_val, dtype=np.float64, ndmin=2)

    geometry = net.geometry
    activation = net.output_activation
    hidden = [[l.weights.copy(), l.biases.copy()] for l in net.hidden_layers]
    out = [net.output_weights.copy(), net.output_biases.copy()]
    lr = config.learning_rate
    kind = config.loss_kind
    rng = np.random.default_rng(config.seed)
    history = LossHistory(val_loss=[] if has_val else None)

    def step(xb, tb):
        acts, affs, y = _forward_raw(xb, geometry, hidden, out, activation)
        loss = compute_loss(y, tb, kind)
        g_hidden, g_out = _backward(
            [w for w, _ in hidden], out[0], geometry, activation, acts, affs, xb, y, tb, kind
        )
        for p, (dw, db) in zip(hidden, g_hidden):
            p[0] -= lr * dw
            p[1] -= lr * db
        out[0] -= lr * g_out[0]
        out[1] -= lr * g_out[1]
        return loss

    stall = 0
    for epoch in range(int(config.num_epochs)):
        if config.batch_mode == "full_batch":
            loss = step(X, Y)
        else:
            order = rng.permutation(X.shape[0])
            total = 0.0
            for i in order:
                total += step(X[i : i + 1], Y[i : i + 1])
            loss = total / X.shape[0]
        if not math.isfinite(loss):
            raise NonFiniteLossError(epoch, loss)
        history.train_loss.append(loss)
        if has_val:
            _, _, yv = _forward_raw(X_val, geometry, hidden, out, activation)
            history.val_loss.append(compute_loss(yv, Y_val, kind))
        if config.convergence is not None and epoch > 0:
            min_delta, patience = config.convergence
            stall = stall + 1 if history.train_loss[-2] - loss < min_delta else 0
            if stall >= patience:
                break

    trained = net.with_parameters([tuple(p) for p in hidden], tuple(out))
    return trained, history
