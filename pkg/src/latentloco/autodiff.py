"""Reverse-mode automatic differentiation over dense float64 arrays, plus Adam.

Tape-based: every op records its parents and a backward closure, and
``backward()`` walks the graph once in reverse topological order.  The tape is
rebuilt on every forward pass.  Everything is float64 -- the gradient-check
tolerances used throughout the test suite assume double precision.
"""

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform to the requested op."""


class Tensor:
    """A node in the autodiff graph: float64 data, gradient, provenance.

    ``op`` names the producing operation ("leaf" for inputs/parameters) and
    ``parents`` are the input nodes, so the graph can be traversed and
    inspected.  Gradients are allocated lazily by ``backward``.
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "_backward")

    def __init__(self, data, requires_grad=False, op="leaf", parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.op = op
        self.parents = tuple(parents)
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = None

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))

def _accum(t, g):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g, shape):
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(kind, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} do not conform") from None


# --- op kinds -------------------------------------------------------------
#
# Each op returns a fresh node and never mutates its inputs.  Elementwise ops
# accept same-shape operands plus the bias-style broadcasts numpy allows
# ((B,n) op (n,), scalar op array); no broadcasting beyond that is supported.

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("add", a, b)
    out = Tensor(a.data + b.data, a.requires_grad or b.requires_grad, "add", (a, b))

    def backward():
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad, b.shape))

    out._backward = backward
    return out


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("sub", a, b)
    out = Tensor(a.data - b.data, a.requires_grad or b.requires_grad, "sub", (a, b))

    def backward():
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-out.grad, b.shape))

    out._backward = backward
    return out


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("mul", a, b)
    out = Tensor(a.data * b.data, a.requires_grad or b.requires_grad, "mul", (a, b))

    def backward():
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad * b.data, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad * a.data, b.shape))

    out._backward = backward
    return out


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    out = Tensor(a.data @ b.data, a.requires_grad or b.requires_grad, "matmul", (a, b))

    def backward():
        if a.requires_grad:
            _accum(a, out.grad @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ out.grad)

    out._backward = backward
    return out


def scale(a, c):
    """Multiply by a Python float constant (no gradient w.r.t. ``c``)."""
    a = _as_tensor(a)
    c = float(c)
    out = Tensor(a.data * c, a.requires_grad, "scale", (a,))

    def backward():
        if a.requires_grad:
            _accum(a, out.grad * c)

    out._backward = backward
    return out


def neg(a):
    return scale(a, -1.0)


def tanh(a):
    a = _as_tensor(a)
    out = Tensor(np.tanh(a.data), a.requires_grad, "tanh", (a,))

    def backward():
        if a.requires_grad:
            _accum(a, out.grad * (1.0 - out.data * out.data))

    out._backward = backward
    return out


def elu(a):
    a = _as_tensor(a)
    neg_part = np.expm1(np.minimum(a.data, 0.0))
    out = Tensor(np.where(a.data > 0.0, a.data, neg_part), a.requires_grad, "elu", (a,))

    def backward():
        if a.requires_grad:
            _accum(a, out.grad * np.where(a.data > 0.0, 1.0, neg_part + 1.0))

    out._backward = backward
    return out


def exp(a):
    a = _as_tensor(a)
    out = Tensor(np.exp(a.data), a.requires_grad, "exp", (a,))

    def backward():
        if a.requires_grad:
            _accum(a, out.grad * out.data)

    out._backward = backward
    return out


def log(a):
    a = _as_tensor(a)
    out = Tensor(np.log(a.data), a.requires_grad, "log", (a,))

    def backward():
        if a.requires_grad:
            _accum(a, out.grad / a.data)

    out._backward = backward
    return out


def tsum(a):
    """Sum over all elements, producing a scalar node."""
    a = _as_tensor(a)
    out = Tensor(np.sum(a.data), a.requires_grad, "sum", (a,))

    def backward():
        if a.requires_grad:
            _accum(a, np.full_like(a.data, out.grad))

    out._backward = backward
    return out


def mean(a):
    a = _as_tensor(a)
    out = Tensor(np.mean(a.data), a.requires_grad, "mean", (a,))

    def backward():
        if a.requires_grad:
            _accum(a, np.full_like(a.data, out.grad / a.data.size))

    out._backward = backward
    return out


def row_sum(a):
    """Sum over the last axis: (B, n) -> (B,)."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"row_sum: expected 2-D input, got shape {a.shape}")
    out = Tensor(a.data.sum(axis=1), a.requires_grad, "row_sum", (a,))

    def backward():
        if a.requires_grad:
            _accum(a, np.repeat(out.grad[:, None], a.shape[1], axis=1))

    out._backward = backward
    return out


def sq_err(a, b):
    """Squared-error reduction: sum((a - b)^2) over all elements (scalar)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"sq_err: shapes {a.shape} and {b.shape} do not conform")
    diff = a.data - b.data
    out = Tensor(np.sum(diff * diff), a.requires_grad or b.requires_grad, "sq_err", (a, b))

    def backward():
        if a.requires_grad:
            _accum(a, 2.0 * diff * out.grad)
        if b.requires_grad:
            _accum(b, -2.0 * diff * out.grad)

    out._backward = backward
    return out


def concat(tensors, axis=-1):
    tensors = [_as_tensor(t) for t in tensors]
    base = tensors[0].data.ndim
    if any(t.data.ndim != base for t in tensors):
        raise ShapeError(
            "concat: mixed ranks " + str([t.shape for t in tensors])
        )
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = Tensor(data, any(t.requires_grad for t in tensors), "concat", tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward():
        pieces = np.split(out.grad, splits, axis=axis)
        for t, g in zip(tensors, pieces):
            if t.requires_grad:
                _accum(t, g)

    out._backward = backward
    return out


def clip(a, lo, hi):
    """Clamp to [lo, hi]; gradient is zero outside the open interval."""
    a = _as_tensor(a)
    lo, hi = float(lo), float(hi)
    out = Tensor(np.clip(a.data, lo, hi), a.requires_grad, "clip", (a,))

    def backward():
        if a.requires_grad:
            inside = (a.data > lo) & (a.data < hi)
            _accum(a, out.grad * inside)

    out._backward = backward
    return out


def minimum(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("minimum", a, b)
    take_a = a.data <= b.data
    out = Tensor(np.where(take_a, a.data, b.data), a.requires_grad or b.requires_grad,
                 "minimum", (a, b))

    def backward():
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad * take_a, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad * ~take_a, b.shape))

    out._backward = backward
    return out


def maximum(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("maximum", a, b)
    take_a = a.data >= b.data
    out = Tensor(np.where(take_a, a.data, b.data), a.requires_grad or b.requires_grad,
                 "maximum", (a, b))

    def backward():
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad * take_a, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad * ~take_a, b.shape))

    out._backward = backward
    return out


OPS = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "tanh": tanh,
    "elu": elu,
    "exp": exp,
    "log": log,
    "mean": mean,
    "sum": tsum,
    "row_sum": row_sum,
    "sq_err": sq_err,
    "concatenate": concat,
    "clip": clip,
    "minimum": minimum,
    "maximum": maximum,
}


def forward_op(kind, inputs, **kwargs):
    """Dispatch an op by registered kind name."""
    if kind not in OPS:
        raise KeyError(f"unknown op kind {kind!r}")
    if kind == "concatenate":
        return OPS[kind](inputs, **kwargs)
    return OPS[kind](*inputs, **kwargs)


def backward(loss):
    """Populate ``grad`` on every requires_grad ancestor of a scalar loss.

    Gradients accumulate additively across multiple uses of a node; each node's
    closure runs exactly once (reverse topological order over the tape).
    """
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")

    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in visited:
                stack.append((p, False))

    for node in topo:
        if node.requires_grad and node.grad is None:
            node.grad = np.zeros_like(node.data)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.requires_grad:
            node._backward()


def grad_check(f, point, h=1e-5):
    """Max relative error between autodiff and central-difference gradients.

    ``f`` maps a parameter Tensor to a scalar Tensor.  Returns
    max_i |g_ad_i - g_fd_i| / max(1, |g_fd_i|).
    """
    if h <= 0:
        raise ValueError("grad_check: h must be positive")
    point = np.asarray(point, dtype=np.float64)

    p = Tensor(point.copy(), requires_grad=True)
    out = f(p)
    if not np.all(np.isfinite(out.data)):
        raise ValueError("grad_check: f returned a non-finite value")
    backward(out)
    # f may not touch p at all (constant function): gradient is zero then.
    g_ad = (p.grad if p.grad is not None else np.zeros_like(p.data)).ravel().copy()

    g_fd = np.empty_like(g_ad)
    flat = point.ravel()
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = h
        up = f(Tensor((flat + bump).reshape(point.shape))).item()
        dn = f(Tensor((flat - bump).reshape(point.shape))).item()
        if not (np.isfinite(up) and np.isfinite(dn)):
            raise ValueError("grad_check: f returned a non-finite value")
        g_fd[i] = (up - dn) / (2.0 * h)

    return float(np.max(np.abs(g_ad - g_fd) / np.maximum(1.0, np.abs(g_fd)))) if flat.size else 0.0


# --- Adam -----------------------------------------------------------------

@dataclass
class AdamState:
    """Per-parameter-vector Adam moments and hyperparameters."""

    step: int = 0
    m: np.ndarray = None
    v: np.ndarray = None
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_init(n, lr=3e-4, beta1=0.9, beta2=0.999, epsilon=1e-8):
    return AdamState(0, np.zeros(n), np.zeros(n), lr, beta1, beta2, epsilon)


def adam_step(params, grads, state):
    """One bias-corrected Adam update; returns (new_params, state).

    ``state`` is updated in place (moments, step counter).  Rejects non-finite
    gradients, naming the offending index.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError(
            f"adam_step: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise ValueError(f"adam_step: non-finite gradient at parameter index {bad[0]}")

    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon), state


class Adam:
    """Adam over a list of parameter Tensors, updating them in place.

    Wraps the flat-vector ``adam_step`` with gather/scatter so each network
    keeps its per-layer tensors while the optimizer sees one vector.
    """

    def __init__(self, tensors, lr=3e-4, beta1=0.9, beta2=0.999, epsilon=1e-8,
                 max_grad_norm=0.0):
        self.tensors = list(tensors)
        n = sum(t.data.size for t in self.tensors)
        self.state = adam_init(n, lr, beta1, beta2, epsilon)
        self.max_grad_norm = max_grad_norm

    def set_tensors(self, tensors):
        """Swap the tracked tensor list (same total size), e.g. after re-init."""
        tensors = list(tensors)
        n = sum(t.data.size for t in tensors)
        if n != self.state.m.size:
            self.state = adam_init(n, self.state.lr, self.state.beta1,
                                   self.state.beta2, self.state.epsilon)
        self.tensors = tensors

    def zero_grad(self):
        for t in self.tensors:
            t.grad = None

    def step(self):
        flat_p = np.concatenate([t.data.ravel() for t in self.tensors])
        flat_g = np.concatenate([
            (t.grad if t.grad is not None else np.zeros_like(t.data)).ravel()
            for t in self.tensors
        ])
        if self.max_grad_norm > 0.0:
            norm = float(np.sqrt(np.sum(flat_g * flat_g)))
            if norm > self.max_grad_norm:
                flat_g = flat_g * (self.max_grad_norm / norm)
        new_p, _ = adam_step(flat_p, flat_g, self.state)
        i = 0
        for t in self.tensors:
            n = t.data.size
            t.data[...] = new_p[i:i + n].reshape(t.data.shape)
            i += n
