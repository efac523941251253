"""Minimal reverse-mode tensor machinery for the neural grounders.

Everything is float64 numpy with rank <= 2; gradients flow through a small
tape of elementwise ops, matrix products, row gathers, and a fused
softmax/cross-entropy head.  Sized for vocabularies of a few hundred words
and hidden widths up to ~128, where plain numpy batching is plenty.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class InvalidShapeError(ValueError):
    pass


class EmptySequenceError(ValueError):
    pass


class Tensor:
    """A value in the computation graph; call ``backward`` on a scalar."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(),
                 backward: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        if self.data.ndim > 2:
            raise InvalidShapeError(f"rank must be <= 2, got {self.data.ndim}")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def backward(self) -> None:
        if self.data.size != 1:
            raise InvalidShapeError("backward() requires a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in order:
            if node.requires_grad and node.grad is None:
                node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    def zero_grad(self) -> None:
        self.grad = None


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def uniform_init(rng: np.random.Generator, shape, scale: float = 0.08) -> Tensor:
    return parameter(rng.uniform(-scale, scale, size=shape))


def _needs_grad(*tensors: Tensor) -> bool:
    return any(t.requires_grad or t._parents for t in tensors)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient down to a broadcast operand's shape."""
    if grad.shape == tuple(shape):
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accum(node: Tensor, grad: np.ndarray, aliased: bool) -> None:
    """Add into the node's gradient; ``aliased`` marks grads that share
    memory with a downstream buffer and need a defensive copy on first
    assignment."""
    if node.grad is None:
        node.grad = grad.copy() if aliased else grad
    else:
        node.grad += grad


def _binary(a: Tensor, b: Tensor, out_data, da, db) -> Tensor:
    out = Tensor(out_data, parents=(a, b))
    need_a = a.requires_grad or bool(a._parents)
    need_b = b.requires_grad or bool(b._parents)
    if not (need_a or need_b):
        return out
    a_shape, b_shape = a.data.shape, b.data.shape

    def backward():
        g = out.grad
        if need_a:
            ga = da(g)
            if ga.shape != a_shape:
                ga = _unbroadcast(ga, a_shape)
            _accum(a, ga, ga is g)
        if need_b:
            gb = db(g)
            if gb.shape != b_shape:
                gb = _unbroadcast(gb, b_shape)
            _accum(b, gb, gb is g)

    out._backward = backward
    return out


def _unary(a: Tensor, out_data, da) -> Tensor:
    out = Tensor(out_data, parents=(a,))
    if not (a.requires_grad or a._parents):
        return out

    def backward():
        ga = da(out.grad)
        _accum(a, ga, ga is out.grad)

    out._backward = backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data + b.data, lambda g: g, lambda g: g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data * b.data,
                   lambda g: g * b.data, lambda g: g * a.data)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(
        a, b, a.data @ b.data,
        lambda g: g @ b.data.T,
        lambda g: a.data.T @ g,
    )


def affine(a: Tensor, scale: float, shift: float) -> Tensor:
    """Elementwise scale*a + shift (used for 1 - z and friends)."""
    return _unary(a, scale * a.data + shift, lambda g: scale * g)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _unary(a, a.data * mask, lambda g: g * mask)


def sigmoid(a: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-a.data))
    return _unary(a, out_data, lambda g: g * out_data * (1.0 - out_data))


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)
    return _unary(a, out_data, lambda g: g * (1.0 - out_data * out_data))


def gather_rows(a: Tensor, indices) -> Tensor:
    """Row lookup (embedding fetch / batch-subset selection)."""
    idx = np.asarray(indices, dtype=np.int64)
    out = Tensor(a.data[idx], parents=(a,))

    def backward():
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        np.add.at(a.grad, idx, out.grad)

    if _needs_grad(a):
        out._backward = backward
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax over the last axis (inference path)."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0:
        raise InvalidShapeError("softmax of zero-length logits")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(logits: Tensor, targets, scale: float = 1.0) -> Tensor:
    """Scaled sum of −log softmax(logits)[target] over the batch rows.

    Fusing the softmax keeps the backward pass the usual (p − onehot).
    """
    if logits.data.ndim != 2 or logits.data.shape[1] == 0:
        raise InvalidShapeError(f"logits must be (batch, k>0), got {logits.shape}")
    idx = np.asarray(targets, dtype=np.int64)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    log_z = np.log(exp.sum(axis=1))
    picked = shifted[np.arange(len(idx)), idx]
    out = Tensor(scale * np.sum(log_z - picked), parents=(logits,))

    def backward():
        delta = probs.copy()
        delta[np.arange(len(idx)), idx] -= 1.0
        _accum(logits, out.grad * scale * delta, False)

    if _needs_grad(logits):
        out._backward = backward
    return out


def dropout(a: Tensor, p: float, train: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: scaling happens at train time, evaluation is pure."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return a
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)
    return _unary(a, a.data * mask, lambda g: g * mask)


def dense_relu(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return relu(add(matmul(x, w), b))


def embed_bow(embedding: Tensor, counts) -> Tensor:
    """Frequency-weighted sum of embedding rows: counts (B,V) @ E (V,D)."""
    return matmul(constant(np.asarray(counts, dtype=np.float64)), embedding)


# ---------------------------------------------------------------------------
# GRU cell
# ---------------------------------------------------------------------------


@dataclass
class GruCell:
    """Single-hidden-state recurrent cell with update and reset gates."""

    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_n: Tensor  # candidate bias, distinct from the update-gate bias
    input_size: int
    hidden_size: int

    @classmethod
    def create(cls, input_size: int, hidden_size: int,
               rng: np.random.Generator) -> "GruCell":
        def w(rows, cols):
            return uniform_init(rng, (rows, cols))

        return cls(
            w_z=w(input_size, hidden_size), u_z=w(hidden_size, hidden_size),
            b_z=uniform_init(rng, (1, hidden_size)),
            w_r=w(input_size, hidden_size), u_r=w(hidden_size, hidden_size),
            b_r=uniform_init(rng, (1, hidden_size)),
            w_h=w(input_size, hidden_size), u_h=w(hidden_size, hidden_size),
            b_n=uniform_init(rng, (1, hidden_size)),
            input_size=input_size, hidden_size=hidden_size,
        )

    def parameters(self) -> list[Tensor]:
        return [self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r,
                self.w_h, self.u_h, self.b_n]


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data - b.data, lambda g: g, lambda g: -g)


def gru_step(cell: GruCell, x: Tensor, h_prev: Tensor) -> Tensor:
    """One recurrence: convex blend of the previous state and the candidate.

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    n = tanh(x Wh + (r*h) Uh + bn)
    h' = (1 - z) * h + z * n

    Implemented as one fused graph node with a closed-form backward pass;
    a step otherwise costs ~13 nodes of tape overhead, which dominates
    training time at these matrix sizes.
    """
    xd, hd = x.data, h_prev.data
    z = 1.0 / (1.0 + np.exp(-(xd @ cell.w_z.data + hd @ cell.u_z.data
                              + cell.b_z.data)))
    r = 1.0 / (1.0 + np.exp(-(xd @ cell.w_r.data + hd @ cell.u_r.data
                              + cell.b_r.data)))
    rh = r * hd
    n = np.tanh(xd @ cell.w_h.data + rh @ cell.u_h.data + cell.b_n.data)
    params = cell.parameters()
    out = Tensor(hd + z * (n - hd), parents=(x, h_prev, *params))

    def backward():
        g = out.grad
        dan = (g * z) * (1.0 - n * n)
        daz = (g * (n - hd)) * z * (1.0 - z)
        drh = dan @ cell.u_h.data.T
        dar = (drh * hd) * r * (1.0 - r)
        if x.requires_grad or x._parents:
            _accum(x, dan @ cell.w_h.data.T + dar @ cell.w_r.data.T
                   + daz @ cell.w_z.data.T, False)
        if h_prev.requires_grad or h_prev._parents:
            _accum(h_prev, g * (1.0 - z) + drh * r + dar @ cell.u_r.data.T
                   + daz @ cell.u_z.data.T, False)
        for param, grad in (
            (cell.w_z, lambda: xd.T @ daz),
            (cell.u_z, lambda: hd.T @ daz),
            (cell.b_z, lambda: daz.sum(axis=0, keepdims=True)),
            (cell.w_r, lambda: xd.T @ dar),
            (cell.u_r, lambda: hd.T @ dar),
            (cell.b_r, lambda: dar.sum(axis=0, keepdims=True)),
            (cell.w_h, lambda: xd.T @ dan),
            (cell.u_h, lambda: rh.T @ dan),
            (cell.b_n, lambda: dan.sum(axis=0, keepdims=True)),
        ):
            if param.requires_grad:
                _accum(param, grad(), False)

    if _needs_grad(x, h_prev, *params):
        out._backward = backward
    return out


def gru_encode(cell: GruCell, inputs: list[Tensor],
               masks: list[np.ndarray] | None = None) -> Tensor:
    """Fold gru_step over a sequence from a zero initial state.

    ``masks`` (one (B,1) array per step) freezes finished rows when encoding
    a padded batch of different-length sequences.
    """
    if not inputs:
        raise EmptySequenceError("cannot encode an empty sequence")
    batch = inputs[0].data.shape[0]
    h = constant(np.zeros((batch, cell.hidden_size)))
    for t, x in enumerate(inputs):
        h_next = gru_step(cell, x, h)
        if masks is not None:
            # finished rows keep their state: h + m*(h_next - h)
            h = add(h, mul(constant(masks[t]), sub(h_next, h)))
        else:
            h = h_next
    return h


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment buffers and the shared step counter."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_update(params: list[Tensor], grads: list[np.ndarray],
                state: AdamState) -> None:
    """Bias-corrected Adam step, in place on the parameter tensors."""
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        state.m[i] = b1 * state.m[i] + (1 - b1) * g
        state.v[i] = b2 * state.v[i] + (1 - b2) * (g * g)
        m_hat = state.m[i] / (1 - b1 ** state.t)
        v_hat = state.v[i] / (1 - b2 ** state.t)
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Optimizer facade over :func:`adam_update`."""

    def __init__(self, params: list[Tensor], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self) -> None:
        adam_update(self.params, [p.grad for p in self.params], self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
