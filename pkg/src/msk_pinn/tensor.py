"""Dense float64 tensors with reverse-mode automatic differentiation.

Small by design: just enough operations to run a 1-D convolutional
regression network and to backpropagate through an equation-of-motion
residual. Values are immutable after creation; every operation checks
its result for NaN/Inf and raises instead of propagating garbage.
"""
from __future__ import annotations

import numpy as np


class TensorError(Exception):
    pass


class ShapeError(TensorError):
    """Operand shapes do not match the operation's contract."""


class NumericsError(TensorError):
    """A non-finite value appeared where only finite values are allowed."""


class GraphError(TensorError):
    """Malformed computation graph (non-scalar loss, cycle, ...)."""


def _as_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    return arr


def _check_finite(arr: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite value in {context}")


class Tensor:
    """Immutable float64 array, optionally tracked for gradients."""

    __slots__ = ("values", "requires_grad", "grad", "_parents", "_grad_fn")

    def __init__(self, values, requires_grad: bool = False):
        arr = _as_array(values)
        _check_finite(arr, "tensor construction")
        arr.setflags(write=False)
        self.values = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._grad_fn = None

    @classmethod
    def _from_op(cls, values: np.ndarray, parents: tuple, grad_fn, op: str) -> "Tensor":
        arr = np.asarray(values, dtype=np.float64)
        _check_finite(arr, f"result of {op}")
        arr.setflags(write=False)
        out = cls.__new__(cls)
        out.values = arr
        out.grad = None
        tracked = tuple(p for p in parents if p.requires_grad)
        if tracked:
            out.requires_grad = True
            out._parents = parents
            out._grad_fn = grad_fn
        else:
            out.requires_grad = False
            out._parents = ()
            out._grad_fn = None
        return out

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(other, self.shape), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _lift(x, like_shape=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _is_scalar(t: Tensor) -> bool:
    return t.values.ndim == 0


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape or _is_scalar(a) or _is_scalar(b):
        return
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are not scalar-broadcastable")


def _reduce_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if shape == grad.shape:
        return grad
    return np.sum(grad).reshape(shape) if shape == () else grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise and reduction primitives
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _binary_shapes(a, b, "add")

    def grad_fn(g):
        return (_reduce_to(g, a.shape), _reduce_to(g, b.shape))

    return Tensor._from_op(a.values + b.values, (a, b), grad_fn, "add")


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _binary_shapes(a, b, "sub")

    def grad_fn(g):
        return (_reduce_to(g, a.shape), _reduce_to(-g, b.shape))

    return Tensor._from_op(a.values - b.values, (a, b), grad_fn, "sub")


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _binary_shapes(a, b, "mul")
    av, bv = a.values, b.values

    def grad_fn(g):
        return (_reduce_to(g * bv, a.shape), _reduce_to(g * av, b.shape))

    return Tensor._from_op(av * bv, (a, b), grad_fn, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def grad_fn(g):
        return (g * c,)

    return Tensor._from_op(a.values * c, (a,), grad_fn, "scale")


def relu(a: Tensor) -> Tensor:
    mask = a.values > 0.0  # subgradient 0 at the kink

    def grad_fn(g):
        return (g * mask,)

    return Tensor._from_op(np.where(mask, a.values, 0.0), (a,), grad_fn, "relu")


def sigmoid(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.values))

    def grad_fn(g):
        return (g * s * (1.0 - s),)

    return Tensor._from_op(s, (a,), grad_fn, "sigmoid")


def sin(a: Tensor) -> Tensor:
    cos_v = np.cos(a.values)

    def grad_fn(g):
        return (g * cos_v,)

    return Tensor._from_op(np.sin(a.values), (a,), grad_fn, "sin")


def square(a: Tensor) -> Tensor:
    av = a.values

    def grad_fn(g):
        return (g * 2.0 * av,)

    return Tensor._from_op(av * av, (a,), grad_fn, "square")


def tsum(a: Tensor) -> Tensor:
    shape = a.shape

    def grad_fn(g):
        return (np.full(shape, float(g)),)

    return Tensor._from_op(np.sum(a.values), (a,), grad_fn, "sum")


def tmean(a: Tensor) -> Tensor:
    shape = a.shape
    n = a.values.size

    def grad_fn(g):
        return (np.full(shape, float(g) / n),)

    return Tensor._from_op(np.mean(a.values), (a,), grad_fn, "mean")


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: (m,k)@(k,n) -> (m,n) or (m,k)@(k,) -> (m,)."""
    a, b = _lift(a), _lift(b)
    av, bv = a.values, b.values
    if av.ndim != 2:
        raise ShapeError(f"matmul: left operand must be 2-D, got {a.shape}")
    if bv.ndim not in (1, 2):
        raise ShapeError(f"matmul: right operand must be 1-D or 2-D, got {b.shape}")
    if av.shape[1] != bv.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions disagree ({av.shape[1]} vs {bv.shape[0]})"
        )

    if bv.ndim == 2:
        def grad_fn(g):
            return (g @ bv.T, av.T @ g)
    else:
        def grad_fn(g):
            return (np.outer(g, bv), av.T @ g)

    return Tensor._from_op(av @ bv, (a, b), grad_fn, "matmul")


def bias_add(x: Tensor, b: Tensor) -> Tensor:
    """Add a per-row bias: x[h] + b[h] or x[h,L] + b[h] broadcast over columns."""
    xv, bv = x.values, b.values
    if bv.ndim != 1 or xv.shape[0] != bv.shape[0]:
        raise ShapeError(f"bias_add: bias {b.shape} does not match rows of {x.shape}")
    if xv.ndim == 1:
        out = xv + bv

        def grad_fn(g):
            return (g, g)
    elif xv.ndim == 2:
        out = xv + bv[:, None]

        def grad_fn(g):
            return (g, g.sum(axis=1))
    else:
        raise ShapeError(f"bias_add: input must be 1-D or 2-D, got {x.shape}")
    return Tensor._from_op(out, (x, b), grad_fn, "bias_add")


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map weights @ x + bias; x may be a vector or a [d, L] stack."""
    if weights.ndim != 2:
        raise ShapeError(f"dense: weights must be 2-D, got {weights.shape}")
    if x.values.shape[0] != weights.shape[1]:
        raise ShapeError(
            f"dense: input dimension {x.values.shape[0]} does not match "
            f"weights fan-in {weights.shape[1]}"
        )
    return bias_add(matmul(weights, x), bias)


def conv1d(x: Tensor, kernels: Tensor, bias: Tensor, padding: int, stride: int) -> Tensor:
    """1-D convolution (cross-correlation) over the last axis.

    x: [C_in, L], kernels: [C_out, C_in, K], bias: [C_out] ->
    [C_out, floor((L + 2*padding - K)/stride) + 1].
    """
    xv, wv, bv = x.values, kernels.values, bias.values
    if xv.ndim != 2:
        raise ShapeError(f"conv1d: input must be [C_in, L], got {x.shape}")
    if wv.ndim != 3:
        raise ShapeError(f"conv1d: kernels must be [C_out, C_in, K], got {kernels.shape}")
    c_in, length = xv.shape
    c_out, kc_in, k = wv.shape
    if kc_in != c_in:
        raise ShapeError(f"conv1d: kernel C_in={kc_in} does not match input C_in={c_in}")
    if bv.shape != (c_out,):
        raise ShapeError(f"conv1d: bias shape {bias.shape} does not match C_out={c_out}")
    if stride < 1:
        raise ShapeError(f"conv1d: stride must be >= 1, got {stride}")
    if padding < 0:
        raise ShapeError(f"conv1d: padding must be >= 0, got {padding}")
    if k > length + 2 * padding:
        raise ShapeError(
            f"conv1d: kernel size K={k} exceeds padded length {length + 2 * padding}"
        )

    xp = np.pad(xv, ((0, 0), (padding, padding))) if padding else xv
    l_out = (length + 2 * padding - k) // stride + 1
    out = np.repeat(bv[:, None], l_out, axis=1)
    for j in range(k):
        out += wv[:, :, j] @ xp[:, j : j + stride * l_out : stride]

    def grad_fn(g):
        dxp = np.zeros_like(xp)
        dw = np.empty_like(wv)
        for j in range(k):
            sl = np.s_[:, j : j + stride * l_out : stride]
            dw[:, :, j] = g @ xp[sl].T
            dxp[sl] += wv[:, :, j].T @ g
        dx = dxp[:, padding : padding + length] if padding else dxp
        return (dx, dw, g.sum(axis=1))

    return Tensor._from_op(out, (x, kernels, bias), grad_fn, "conv1d")


# ---------------------------------------------------------------------------
# normalization and regularization
# ---------------------------------------------------------------------------

def _norm(x: Tensor, gain: Tensor, shift: Tensor, epsilon: float, axis: int, op: str) -> Tensor:
    xv = x.values
    if xv.shape[axis] < 2:
        raise ShapeError(f"{op}: need at least 2 elements along axis {axis}, got shape {x.shape}")
    gv, sv = gain.values, shift.values
    if gv.shape != (xv.shape[0],) or sv.shape != (xv.shape[0],):
        raise ShapeError(
            f"{op}: gain/shift shapes {gain.shape}/{shift.shape} do not match "
            f"{xv.shape[0]} rows"
        )
    mu = xv.mean(axis=axis, keepdims=True)
    var = xv.var(axis=axis, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + epsilon)
    xhat = (xv - mu) * inv_std
    gcol = gv if xv.ndim == 1 else gv[:, None]
    scol = sv if xv.ndim == 1 else sv[:, None]
    out = gcol * xhat + scol

    def grad_fn(g):
        dxhat = g * gcol
        m1 = dxhat.mean(axis=axis, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=axis, keepdims=True)
        dx = (dxhat - m1 - xhat * m2) * inv_std
        if xv.ndim == 1:
            dgain = g * xhat
            dshift = g.copy()
        else:
            dgain = (g * xhat).sum(axis=1)
            dshift = g.sum(axis=1)
        return (dx, dgain, dshift)

    return Tensor._from_op(out, (x, gain, shift), grad_fn, op)


def seq_norm(x: Tensor, gain: Tensor, shift: Tensor, epsilon: float = 1e-8) -> Tensor:
    """Normalize each channel of x[C, L] to zero mean / unit variance over L."""
    if x.ndim != 2:
        raise ShapeError(f"seq_norm: input must be [C, L], got {x.shape}")
    return _norm(x, gain, shift, epsilon, axis=1, op="seq_norm")


def feature_norm(x: Tensor, gain: Tensor, shift: Tensor, epsilon: float = 1e-8) -> Tensor:
    """Normalize each feature vector (column of x[h, L], or a 1-D x) to zero
    mean / unit variance over the features."""
    return _norm(x, gain, shift, epsilon, axis=0, op="feature_norm")


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability `rate`, scale survivors by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout: rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        def grad_fn(g):
            return (g,)

        return Tensor._from_op(x.values.copy(), (x,), grad_fn, "dropout")
    keep = rng.random(x.shape) >= rate
    factor = keep / (1.0 - rate)

    def grad_fn(g):
        return (g * factor,)

    return Tensor._from_op(x.values * factor, (x,), grad_fn, "dropout")


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------

def narrow(x: Tensor, start: int, length: int, axis: int = -1) -> Tensor:
    """Contiguous slice of `length` elements starting at `start` along `axis`."""
    dim = x.values.shape[axis]
    if start < 0 or length < 1 or start + length > dim:
        raise ShapeError(
            f"narrow: slice [{start}, {start + length}) out of range for axis "
            f"of size {dim}"
        )
    index = [np.s_[:]] * x.values.ndim
    index[axis] = np.s_[start : start + length]
    index = tuple(index)

    def grad_fn(g):
        dx = np.zeros(x.shape)
        dx[index] = g
        return (dx,)

    return Tensor._from_op(x.values[index], (x,), grad_fn, "narrow")


def reshape(x: Tensor, shape: tuple) -> Tensor:
    old = x.shape

    def grad_fn(g):
        return (g.reshape(old),)

    return Tensor._from_op(x.values.reshape(shape), (x,), grad_fn, "reshape")


def transpose2d(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"transpose2d: input must be 2-D, got {x.shape}")

    def grad_fn(g):
        return (g.T,)

    return Tensor._from_op(x.values.T, (x,), grad_fn, "transpose2d")


def affine_cols(x: Tensor, col_scale, col_shift) -> Tensor:
    """Per-column affine map with constant coefficients: out[:, j] = x[:, j]*s[j] + c[j].

    The coefficients are plain arrays, not tracked; the map is linear in x.
    """
    s = np.asarray(col_scale, dtype=np.float64)
    c = np.asarray(col_shift, dtype=np.float64)
    if x.ndim != 2 or s.shape != (x.shape[1],) or c.shape != (x.shape[1],):
        raise ShapeError(
            f"affine_cols: input {x.shape} with coefficients {s.shape}/{c.shape}"
        )

    def grad_fn(g):
        return (g * s,)

    return Tensor._from_op(x.values * s + c, (x,), grad_fn, "affine_cols")


# ---------------------------------------------------------------------------
# reverse pass
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> dict:
    """Reverse-mode sweep from a scalar loss.

    Returns a map {tensor: gradient array} covering every gradient-tracked
    tensor reachable from `loss`; leaf tensors additionally get `.grad` set.
    """
    if loss.values.ndim != 0:
        raise GraphError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GraphError("backward: loss is not connected to any gradient-tracked tensor")

    # iterative topological sort; a node on the active DFS stack twice is a cycle
    order: list[Tensor] = []
    visited: set[int] = set()
    on_stack: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        nid = id(node)
        if processed:
            on_stack.discard(nid)
            order.append(node)
            continue
        if nid in on_stack:
            raise GraphError("backward: cycle detected in computation graph")
        if nid in visited:
            continue
        visited.add(nid)
        on_stack.add(nid)
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.array(1.0)}
    by_id: dict[int, Tensor] = {id(loss): loss}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node._grad_fn is None:
            continue
        parent_grads = node._grad_fn(g)
        for parent, pg in zip(node._parents, parent_grads):
            if not parent.requires_grad or pg is None:
                continue
            pid = id(parent)
            if pid in grads:
                grads[pid] = grads[pid] + pg
            else:
                grads[pid] = np.asarray(pg, dtype=np.float64)
                by_id[pid] = parent

    result: dict[Tensor, np.ndarray] = {}
    for nid, g in grads.items():
        node = by_id[nid]
        g = np.asarray(g, dtype=np.float64)
        if g.shape != node.shape:
            g = g.reshape(node.shape)
        _check_finite(g, "gradient")
        result[node] = g
        if node._grad_fn is None:  # leaf
            node.grad = g
    return result
