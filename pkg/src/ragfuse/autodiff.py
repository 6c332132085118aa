"""Dense-tensor reverse-mode differentiation on numpy arrays.

Tensors record their producing operation on a tape (the implicit graph of
``_parents`` links); ``backward`` walks that graph once in reverse topological
order and accumulates gradients additively. Sparse matrices participate as
constants only -- no gradient ever flows to an adjacency matrix.

All math is float64. Gradients are accumulated across backward calls until
the caller zeroes them.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

LAYER_NORM_EPS = 1e-10


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    # operator sugar; every op routes through the module-level primitives
    def __add__(self, other):
        return add(self, _lift(other))

    def __sub__(self, other):
        return subtract(self, _lift(other))

    def __mul__(self, other):
        return multiply(self, _lift(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return multiply(self, Tensor(-1.0))

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out: Tensor, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    """Attach tape links iff some parent participates in differentiation."""
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss: Tensor):
    """Accumulate dLoss/dTensor into every reachable requires_grad tensor."""
    if loss.data.size != 1:
        raise ValueError("backward requires a scalar loss")
    if not loss.requires_grad:
        return
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)
            if node is not loss and node._parents:
                node.grad = None  # keep accumulators only on leaf tensors


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _record(out, (a, b), bwd)


def subtract(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data)

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _record(out, (a, b), bwd)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _record(out, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; supports stacked (batched) operands via np.matmul."""
    out = Tensor(np.matmul(a.data, b.data))

    def bwd(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            _accumulate(a, _unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            if gb.ndim > b.data.ndim:
                gb = gb.sum(axis=tuple(range(gb.ndim - b.data.ndim)))
            _accumulate(b, gb)

    return _record(out, (a, b), bwd)


def spmm(a_sparse: sp.spmatrix, h: Tensor) -> Tensor:
    """Sparse-dense product A @ H. A is a constant; grad_H = A^T @ grad_out."""
    if a_sparse.shape[1] != h.data.shape[0]:
        raise ValueError(
            f"spmm dimension mismatch: A is {a_sparse.shape}, H has {h.data.shape[0]} rows"
        )
    out = Tensor(a_sparse @ h.data)

    def bwd(g):
        _accumulate(h, a_sparse.T @ g)

    return _record(out, (h,), bwd)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0))

    def bwd(g):
        _accumulate(x, g * (x.data > 0))

    return _record(out, (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-np.clip(x.data, -500, 500)))
    out = Tensor(s)

    def bwd(g):
        _accumulate(x, g * s * (1.0 - s))

    return _record(out, (x,), bwd)


def softmax(x: Tensor) -> Tensor:
    """Row softmax over the last axis, computed shift-invariantly."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s)

    def bwd(g):
        inner = (g * s).sum(axis=-1, keepdims=True)
        _accumulate(x, s * (g - inner))

    return _record(out, (x,), bwd)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize over the last axis to zero mean / unit variance, then scale+shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = Tensor(gamma.data * xhat + beta.data)
    d = x.data.shape[-1]

    def bwd(g):
        if gamma.requires_grad:
            _accumulate(gamma, _unbroadcast(g * xhat, gamma.data.shape))
        if beta.requires_grad:
            _accumulate(beta, _unbroadcast(g, beta.data.shape))
        if x.requires_grad:
            gx_hat = g * gamma.data
            gx = inv_std * (
                gx_hat
                - gx_hat.mean(axis=-1, keepdims=True)
                - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
            )
            _accumulate(x, gx)

    return _record(out, (x, gamma, beta), bwd)


def dropout(x: Tensor, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout. Eval mode is the identity (returns x unchanged)."""
    if not train or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    out = Tensor(x.data * mask)

    def bwd(g):
        _accumulate(x, g * mask)

    return _record(out, (x,), bwd)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(idx)])

    return _record(out, tuple(tensors), bwd)


def take(x: Tensor, indices: np.ndarray, axis: int = 0) -> Tensor:
    """Gather slices along an axis; backward scatter-adds into x."""
    indices = np.asarray(indices, dtype=np.int64)
    out = Tensor(np.take(x.data, indices, axis=axis))

    def bwd(g):
        gx = np.zeros_like(x.data)
        moved = np.moveaxis(gx, axis, 0)
        np.add.at(moved, indices, np.moveaxis(g, axis, 0))
        _accumulate(x, gx)

    return _record(out, (x,), bwd)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Integer-indexed row gather from a learnable table."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ValueError("embedding id out of table range")
    out = Tensor(table.data[ids])

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        _accumulate(table, gt)

    return _record(out, (table,), bwd)


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape))

    def bwd(g):
        _accumulate(x, g.reshape(x.data.shape))

    return _record(out, (x,), bwd)


def swapaxes(x: Tensor, a: int, b: int) -> Tensor:
    out = Tensor(np.swapaxes(x.data, a, b))

    def bwd(g):
        _accumulate(x, np.swapaxes(g, a, b))

    return _record(out, (x,), bwd)


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    out = Tensor(x.data.mean(axis=axis))
    count = x.data.size if axis is None else x.data.shape[axis]

    def bwd(g):
        if axis is None:
            _accumulate(x, np.full_like(x.data, g / count))
        else:
            _accumulate(x, np.expand_dims(g, axis) / count * np.ones_like(x.data))

    return _record(out, (x,), bwd)


def tensor_sum(x: Tensor, axis: int | None = None) -> Tensor:
    out = Tensor(x.data.sum(axis=axis))

    def bwd(g):
        if axis is None:
            _accumulate(x, np.full_like(x.data, g))
        else:
            _accumulate(x, np.expand_dims(g, axis) * np.ones_like(x.data))

    return _record(out, (x,), bwd)


def bce_with_logits(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean binary cross-entropy in the numerically stable log-sum-exp form.

    loss = mean(max(z,0) - z*y + log(1 + exp(-|z|))); dL/dz = (sigmoid(z) - y)/n.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != logits.data.shape:
        raise ValueError("logits/labels shape mismatch")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    z = logits.data
    per = np.maximum(z, 0.0) - z * labels + np.log1p(np.exp(-np.abs(z)))
    out = Tensor(per.mean())
    n = z.size

    def bwd(g):
        s = 1.0 / (1.0 + np.exp(-z))
        _accumulate(logits, g * (s - labels) / n)

    return _record(out, (logits,), bwd)


# ---------------------------------------------------------------------------
# finite-difference verification


def grad_check(
    f,
    inputs: list[Tensor],
    step: float = 1e-5,
    tolerance: float = 1e-4,
) -> dict:
    """Compare tape gradients of scalar f(inputs) against central differences.

    f must be deterministic (run dropout in eval mode). Returns a report with
    the max relative error and the list of flagged (tensor_index, flat_index)
    elements; relative error uses max(|analytic|, |numeric|, 1e-3) as scale.
    """
    for t in inputs:
        t.zero_grad()
    loss = f(inputs)
    backward(loss)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    flagged = []
    max_rel = 0.0
    for ti, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = float(f(inputs).data)
            flat[i] = orig - step
            f_minus = float(f(inputs).data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = analytic[ti].reshape(-1)[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
            max_rel = max(max_rel, rel)
            if rel > tolerance:
                flagged.append((ti, i, a, numeric, rel))
    return {"max_relative_error": max_rel, "flagged": flagged, "passed": not flagged}


def zero_grads(params) -> None:
    for p in params.values() if isinstance(params, dict) else params:
        p.zero_grad()
