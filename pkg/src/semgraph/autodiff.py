"""Dense float64 tensors with reverse-mode differentiation.

A :class:`Value` wraps a numpy array (scalar, vector, or matrix) and records
the backward closure of the primitive that produced it.  Calling
:func:`backward` on a scalar loss walks the recorded :class:`Tape` in reverse
topological order and accumulates gradients into every ``requires_grad`` leaf.

The primitive set is fixed and small: matmul, add, scalar_mul, mul, relu,
sigmoid, softmax_rows, log_softmax_rows, layer_norm, dropout, concat,
row_mean, row_max_pool, embedding_lookup, cross_entropy, mean_squared_error,
plus the pure data-movement ops transpose and reshape.  Conventions pinned
here: layer_norm epsilon is 1e-5, the relu subgradient at 0 is 0, and dropout
uses inverted scaling so evaluation needs no rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LAYER_NORM_EPS = 1e-5


class ShapeError(ValueError):
    """Operands have incompatible shapes for a primitive."""


class Value:
    """A tensor node: data, gradient slot, and the closure that backpropagates."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, op="leaf"):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 2:
            raise ShapeError(f"Value supports scalars, vectors, matrices; got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values entering op {op!r}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        return f"Value(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"


def param(data) -> Value:
    """A trainable leaf."""
    return Value(data, requires_grad=True)


def constant(data) -> Value:
    return Value(data, requires_grad=False)


def as_value(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


def _result(data, parents, backward_fn, op) -> Value:
    needs = any(p.requires_grad for p in parents)
    return Value(
        data,
        requires_grad=needs,
        _parents=tuple(parents) if needs else (),
        _backward=backward_fn if needs else None,
        op=op,
    )


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` over axes that numpy broadcasting introduced or stretched."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


@dataclass
class Tape:
    """Executed primitives of one expression, in topological order."""

    nodes: list

    @classmethod
    def from_output(cls, out: Value) -> "Tape":
        order, visited = [], set()
        stack = [(out, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in visited:
                continue
            if expanded:
                visited.add(id(node))
                order.append(node)
            else:
                stack.append((node, True))
                for parent in node._parents:
                    if id(parent) not in visited:
                        stack.append((parent, False))
        return cls(nodes=order)

    def run_backward(self, seed: np.ndarray) -> None:
        self.nodes[-1]._accumulate(seed)
        for node in reversed(self.nodes):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def backward(loss: Value) -> None:
    """Accumulate d(loss)/d(leaf) into every requires_grad leaf below ``loss``."""
    if loss.data.ndim != 0:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    Tape.from_output(loss).run_backward(np.asarray(1.0))


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _result(out, (a, b), bwd, "add")


def mul(a, b) -> Value:
    """Elementwise product, with numpy broadcasting."""
    a, b = as_value(a), as_value(b)
    out = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _result(out, (a, b), bwd, "mul")


def scalar_mul(a, c: float) -> Value:
    a = as_value(a)
    c = float(c)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * c)

    return _result(a.data * c, (a,), bwd, "scalar_mul")


def matmul(a, b) -> Value:
    """Matrix product; 1-D operands follow numpy's vector conventions."""
    a, b = as_value(a), as_value(b)
    if a.data.ndim == 0 or b.data.ndim == 0:
        raise ShapeError("matmul needs vector or matrix operands")
    a2 = a.data[None, :] if a.data.ndim == 1 else a.data
    b2 = b.data[:, None] if b.data.ndim == 1 else b.data
    if a2.shape[1] != b2.shape[0]:
        raise ShapeError(f"matmul mismatch: {a.data.shape} @ {b.data.shape}")
    out2 = a2 @ b2
    out = out2
    if a.data.ndim == 1:
        out = out[0]
    if b.data.ndim == 1:
        out = out[..., 0]

    def bwd(g):
        g2 = np.asarray(g, dtype=np.float64)
        if a.data.ndim == 1:
            g2 = g2[None, ...]
        if b.data.ndim == 1:
            g2 = g2[..., None]
        if a.requires_grad:
            ga = g2 @ b2.T
            a._accumulate(ga[0] if a.data.ndim == 1 else ga)
        if b.requires_grad:
            gb = a2.T @ g2
            b._accumulate(gb[:, 0] if b.data.ndim == 1 else gb)

    return _result(out, (a, b), bwd, "matmul")


def relu(a) -> Value:
    a = as_value(a)
    mask = a.data > 0  # subgradient at 0 defined as 0

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _result(np.maximum(a.data, 0.0), (a,), bwd, "relu")


def sigmoid(a) -> Value:
    a = as_value(a)
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * out * (1.0 - out))

    return _result(out, (a,), bwd, "sigmoid")


def softmax_rows(a) -> Value:
    """Softmax along the last axis (each row of a matrix sums to 1)."""
    a = as_value(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=-1, keepdims=True)

    def bwd(g):
        if a.requires_grad:
            inner = (g * out).sum(axis=-1, keepdims=True)
            a._accumulate(out * (g - inner))

    return _result(out, (a,), bwd, "softmax_rows")


def log_softmax_rows(a) -> Value:
    a = as_value(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g - soft * g.sum(axis=-1, keepdims=True))

    return _result(out, (a,), bwd, "log_softmax_rows")


def layer_norm(a, gain, offset, eps: float = LAYER_NORM_EPS) -> Value:
    """Normalize along the last axis, then apply the learned affine."""
    a, gain, offset = as_value(a), as_value(gain), as_value(offset)
    if a.data.shape[-1] != gain.data.shape[-1] or a.data.shape[-1] != offset.data.shape[-1]:
        raise ShapeError("layer_norm gain/offset must match the normalized axis")
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = gain.data * xhat + offset.data

    def bwd(g):
        if gain.requires_grad:
            gg = g * xhat
            gain._accumulate(_unbroadcast(gg, gain.data.shape))
        if offset.requires_grad:
            offset._accumulate(_unbroadcast(g, offset.data.shape))
        if a.requires_grad:
            dxhat = g * gain.data
            term = dxhat - dxhat.mean(axis=-1, keepdims=True)
            term -= xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            a._accumulate(term * inv_std)

    return _result(out, (a, gain, offset), bwd, "layer_norm")


def dropout(a, p: float, train: bool, seed: int) -> Value:
    """Inverted dropout: at train time keep with prob 1-p and scale by 1/(1-p)."""
    a = as_value(a)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout p must be in [0,1), got {p}")
    if not train or p == 0.0:
        def bwd_id(g):
            if a.requires_grad:
                a._accumulate(g)

        return _result(a.data.copy(), (a,), bwd_id, "dropout")
    rng = np.random.default_rng(seed)
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _result(a.data * mask, (a,), bwd, "dropout")


def concat(values, axis: int = 0) -> Value:
    vals = [as_value(v) for v in values]
    if not vals:
        raise ShapeError("concat needs at least one operand")
    out = np.concatenate([v.data for v in vals], axis=axis)
    sizes = [v.data.shape[axis] for v in vals]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for piece, v in zip(np.split(g, splits, axis=axis), vals):
            if v.requires_grad:
                v._accumulate(piece)

    return _result(out, tuple(vals), bwd, "concat")


def row_mean(a) -> Value:
    """Mean across rows (axis 0): a matrix becomes a vector."""
    a = as_value(a)
    if a.data.ndim == 0:
        raise ShapeError("row_mean needs a vector or matrix")
    n = a.data.shape[0]
    if n == 0:
        raise ShapeError("row_mean of an empty array")

    def bwd(g):
        if a.requires_grad:
            a._accumulate(np.broadcast_to(np.asarray(g) / n, a.data.shape).copy())

    return _result(a.data.mean(axis=0), (a,), bwd, "row_mean")


def row_max_pool(a) -> Value:
    """Columnwise max across rows; ties route gradient to the first argmax."""
    a = as_value(a)
    if a.data.ndim != 2:
        raise ShapeError("row_max_pool needs a matrix")
    if a.data.shape[0] == 0:
        raise ShapeError("row_max_pool of an empty matrix")
    idx = a.data.argmax(axis=0)
    out = a.data[idx, np.arange(a.data.shape[1])]

    def bwd(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[idx, np.arange(a.data.shape[1])] = g
            a._accumulate(full)

    return _result(out, (a,), bwd, "row_max_pool")


def embedding_lookup(table, ids) -> Value:
    """Gather rows of ``table`` by integer index; gradients scatter-add back."""
    table = as_value(table)
    ids = np.asarray(ids, dtype=np.intp)
    if ids.ndim != 1:
        raise ShapeError("embedding_lookup ids must be 1-D")
    if table.data.ndim != 2:
        raise ShapeError("embedding_lookup table must be a matrix")
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ShapeError("embedding_lookup index out of range")

    def bwd(g):
        if table.requires_grad:
            full = np.zeros_like(table.data)
            np.add.at(full, ids, g)
            table._accumulate(full)

    return _result(table.data[ids], (table,), bwd, "embedding_lookup")


def cross_entropy(logits, targets, reduction: str = "mean") -> Value:
    """Mean (or sum) of -log softmax(logits)[target] over rows."""
    logits = as_value(logits)
    targets = np.asarray(targets, dtype=np.intp)
    if logits.data.ndim != 2:
        raise ShapeError("cross_entropy logits must be (rows, classes)")
    n, k = logits.data.shape
    if targets.shape != (n,):
        raise ShapeError(f"targets shape {targets.shape} != ({n},)")
    if targets.size and (targets.min() < 0 or targets.max() >= k):
        raise ShapeError("target class out of range")
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    losses = -logp[np.arange(n), targets]
    scale = 1.0 / n if reduction == "mean" else 1.0
    out = losses.sum() * scale

    def bwd(g):
        if logits.requires_grad:
            soft = np.exp(logp)
            soft[np.arange(n), targets] -= 1.0
            logits._accumulate(float(g) * scale * soft)

    return _result(out, (logits,), bwd, "cross_entropy")


def mean_squared_error(pred, target) -> Value:
    pred, target = as_value(pred), as_value(target)
    if pred.data.shape != target.data.shape:
        raise ShapeError(f"mse shapes differ: {pred.data.shape} vs {target.data.shape}")
    diff = pred.data - target.data
    n = max(diff.size, 1)

    def bwd(g):
        scale = 2.0 * float(g) / n
        if pred.requires_grad:
            pred._accumulate(scale * diff)
        if target.requires_grad:
            target._accumulate(-scale * diff)

    return _result((diff**2).sum() / n, (pred, target), bwd, "mse")


def transpose(a) -> Value:
    a = as_value(a)
    if a.data.ndim != 2:
        raise ShapeError("transpose needs a matrix")

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g.T)

    return _result(a.data.T, (a,), bwd, "transpose")


def reshape(a, shape) -> Value:
    a = as_value(a)
    out = a.data.reshape(shape)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(np.asarray(g).reshape(a.data.shape))

    return _result(out, (a,), bwd, "reshape")


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckResult:
    """Outcome of a central-difference sweep over every input coordinate."""

    max_rel_error: float
    checked: int
    excluded: list  # (input index, flat coordinate) at non-smooth points

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol


def grad_check(f, inputs, eps: float = 1e-5, kink_tol: float = 1e-3) -> GradCheckResult:
    """Compare analytic gradients of ``f(*inputs)`` against central differences.

    ``f`` must be deterministic (dropout off or seed-pinned) and return a
    scalar Value.  A coordinate where the two one-sided difference quotients
    disagree (a relu-style kink) is reported as excluded rather than failed,
    since the numeric estimate is unreliable there.  The relative error is
    ``|analytic - numeric| / max(1, |analytic|, |numeric|)``.
    """
    for v in inputs:
        v.zero_grad()
    out = f(*inputs)
    if out.data.ndim != 0:
        raise ShapeError("grad_check expression must produce a scalar")
    f0 = out.item()
    if not np.isfinite(f0):
        raise FloatingPointError("non-finite forward value")
    backward(out)
    analytic = [
        np.zeros_like(v.data) if v.grad is None else v.grad.copy() for v in inputs
    ]

    def evaluate() -> float:
        return f(*inputs).item()

    max_rel, checked, excluded = 0.0, 0, []
    for vi, v in enumerate(inputs):
        flat = v.data.reshape(-1)
        aflat = analytic[vi].reshape(-1)
        for ci in range(flat.size):
            orig = flat[ci]
            flat[ci] = orig + eps
            fp = evaluate()
            flat[ci] = orig - eps
            fm = evaluate()
            flat[ci] = orig
            fwd = (fp - f0) / eps
            bwd_ = (f0 - fm) / eps
            if abs(fwd - bwd_) / max(1.0, abs(fwd), abs(bwd_)) > kink_tol:
                excluded.append((vi, ci))
                continue
            numeric = (fp - fm) / (2.0 * eps)
            a = aflat[ci]
            rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            max_rel = max(max_rel, rel)
            checked += 1
    return GradCheckResult(max_rel_error=max_rel, checked=checked, excluded=excluded)
