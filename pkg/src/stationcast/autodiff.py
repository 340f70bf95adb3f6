"""Dense float64 arrays with tape-based reverse-mode differentiation.

Usage::

    tape = Tape()
    w = tape.watch(np.ones((3, 2)), name="w")
    loss = ad.mean(ad.matmul(x, w))
    grads = tape.gradient(loss, {"w": w})

Every operation returns a new :class:`Array`; inputs are never modified.
Operations whose inputs carry no tape run eagerly without recording,
which is what inference uses.

Broadcasting is deliberately absent.  The only implicit expansion is
:func:`add_bias`, which adds a vector to every row of its input.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, NumericalError

# Set to False to skip the per-operation finiteness check (it costs one
# reduction per op).
CHECK_FINITE = True


def _frozen(x) -> np.ndarray:
    a = np.array(x, dtype=np.float64)
    a.flags.writeable = False
    return a


class Array:
    """Immutable float64 array, optionally a node on a :class:`Tape`."""

    __slots__ = ("data", "tape", "node")
    __array_priority__ = 100

    def __init__(self, data, tape: Tape | None = None, node: int | None = None):
        if isinstance(data, np.ndarray) and data.dtype == np.float64 and not data.flags.writeable:
            self.data = data
        else:
            self.data = _frozen(data)
        self.tape = tape
        self.node = node

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        tag = f", node={self.node}" if self.node is not None else ""
        return f"Array(shape={self.shape}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Records primitive operations in execution order.

    Node ids are assigned monotonically, so recorded order is already a
    topological order and the backward sweep is a single reversed pass.
    """

    def __init__(self):
        self._ops: list[tuple[int, tuple[int | None, ...], Callable]] = []
        self._next = 0
        self.names: dict[int, str] = {}

    def __len__(self) -> int:
        return len(self._ops)

    def _new_node(self) -> int:
        n = self._next
        self._next += 1
        return n

    def watch(self, value, name: str | None = None) -> Array:
        """Register a leaf whose gradient can be requested."""
        arr = Array(value.data if isinstance(value, Array) else value, self, self._new_node())
        if name is not None:
            self.names[arr.node] = name
        return arr

    def watch_all(self, params: dict[str, np.ndarray]) -> dict[str, Array]:
        return {k: self.watch(v, name=k) for k, v in params.items()}

    def record(self, data: np.ndarray, inputs: Sequence[Array], vjp: Callable) -> Array:
        node = self._new_node()
        self._ops.append((node, tuple(a.node if a.tape is self else None for a in inputs), vjp))
        return Array(data, self, node)

    def backward(self, loss: Array) -> dict[int, np.ndarray]:
        """Propagate d(loss)/d(node) for every node reachable from ``loss``."""
        if loss.tape is not self:
            raise ContractError("loss was not recorded on this tape")
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {loss.node: np.ones_like(loss.data)}
        for node, inputs, vjp in reversed(self._ops):
            if node > loss.node:
                continue
            g = grads.pop(node, None)
            if g is None:
                continue
            for inp, gi in zip(inputs, vjp(g)):
                if inp is None or gi is None:
                    continue
                if inp in grads:
                    grads[inp] = grads[inp] + gi
                else:
                    grads[inp] = gi
        return grads

    def gradient(self, loss: Array, wrt):
        """Gradients of ``loss`` with respect to watched leaves.

        ``wrt`` may be a single Array, a sequence, or a dict; the result has
        the same structure.  Unreached leaves get zero gradients.
        """
        grads = self.backward(loss)

        def one(a: Array) -> np.ndarray:
            if a.tape is not self:
                raise ContractError("gradient requested for an array not on this tape")
            g = grads.get(a.node)
            return np.zeros(a.shape) if g is None else np.asarray(g, dtype=np.float64)

        if isinstance(wrt, Array):
            return one(wrt)
        if isinstance(wrt, dict):
            return {k: one(v) for k, v in wrt.items()}
        return [one(a) for a in wrt]


def backward(tape: Tape, loss: Array, params: dict[str, Array]) -> dict[str, np.ndarray]:
    """Functional form of :meth:`Tape.gradient` for a parameter dict."""
    return tape.gradient(loss, params)


# ---------------------------------------------------------------- plumbing


def asarray(x) -> Array:
    return x if isinstance(x, Array) else Array(x)


def constant(x) -> Array:
    return Array(x.data if isinstance(x, Array) else x)


def _tape_of(arrays: Iterable[Array]) -> Tape | None:
    tape = None
    for a in arrays:
        if a.tape is not None:
            if tape is not None and a.tape is not tape:
                raise ContractError("inputs belong to different tapes")
            tape = a.tape
    return tape


def _emit(data: np.ndarray, inputs: Sequence[Array], vjp: Callable) -> Array:
    if CHECK_FINITE and not np.isfinite(np.sum(data)):
        if not np.all(np.isfinite(data)):
            raise NumericalError("operation produced NaN or Inf")
    tape = _tape_of(inputs)
    if tape is None:
        return Array(data)
    return tape.record(data, inputs, vjp)


def _same_shape(a: Array, b: Array, op: str):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Array:
    a, b = asarray(a), asarray(b)
    _same_shape(a, b, "add")
    return _emit(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b) -> Array:
    a, b = asarray(a), asarray(b)
    _same_shape(a, b, "sub")
    return _emit(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b) -> Array:
    a, b = asarray(a), asarray(b)
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return _emit(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def scale(a, c: float) -> Array:
    a = asarray(a)
    c = float(c)
    return _emit(a.data * c, (a,), lambda g: (g * c,))


def add_bias(a, bias) -> Array:
    """Add a length-n vector to every row of ``a`` (last axis n)."""
    a, bias = asarray(a), asarray(bias)
    if bias.ndim != 1 or a.shape[-1] != bias.shape[0]:
        raise DimensionError(f"add_bias: cannot add {bias.shape} to rows of {a.shape}")
    lead = tuple(range(a.ndim - 1))
    return _emit(a.data + bias.data, (a, bias), lambda g: (g, g.sum(axis=lead)))


def relu(a) -> Array:
    a = asarray(a)
    mask = a.data > 0
    return _emit(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


# ---------------------------------------------------------------- linear algebra


def matmul(a, b) -> Array:
    """Matrix product of ``[m, k]`` and ``[k, n]``."""
    a, b = asarray(a), asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data
    return _emit(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def bmm(a, b) -> Array:
    """Batched matrix product of ``[B, m, k]`` and ``[B, k, n]``."""
    a, b = asarray(a), asarray(b)
    if a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
        raise DimensionError(f"bmm: cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data
    return _emit(
        np.matmul(ad, bd),
        (a, b),
        lambda g: (np.matmul(g, bd.transpose(0, 2, 1)), np.matmul(ad.transpose(0, 2, 1), g)),
    )


def linear(x, weight, bias=None) -> Array:
    """``x @ weight + bias`` applied over the last axis of any-rank ``x``."""
    x, weight = asarray(x), asarray(weight)
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"linear: input width {x.shape[-1]} != weight rows {weight.shape[0]}")
    lead = x.shape[:-1]
    y = matmul(reshape(x, (-1, x.shape[-1])), weight) if x.ndim != 2 else matmul(x, weight)
    if bias is not None:
        y = add_bias(y, bias)
    return reshape(y, lead + (weight.shape[1],)) if x.ndim != 2 else y


# ---------------------------------------------------------------- structural


def reshape(a, shape) -> Array:
    a = asarray(a)
    src = a.shape
    out = a.data.reshape(shape)
    return _emit(out, (a,), lambda g: (g.reshape(src),))


def transpose(a, axes: Sequence[int]) -> Array:
    a = asarray(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _emit(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def concat(arrays: Sequence, axis: int = -1) -> Array:
    arrays = [asarray(a) for a in arrays]
    if not arrays:
        raise DimensionError("concat of nothing")
    nd = arrays[0].ndim
    ax = axis % nd
    for a in arrays[1:]:
        if a.ndim != nd or any(a.shape[i] != arrays[0].shape[i] for i in range(nd) if i != ax):
            raise DimensionError(f"concat: incompatible shapes {[x.shape for x in arrays]}")
    sizes = [a.shape[ax] for a in arrays]
    cuts = np.cumsum(sizes)[:-1]
    return _emit(
        np.concatenate([a.data for a in arrays], axis=ax),
        arrays,
        lambda g: tuple(np.split(g, cuts, axis=ax)),
    )


def slice(a, index) -> Array:
    """Basic (slice/int) indexing; the gradient scatters back into zeros."""
    a = asarray(a)
    src = a.shape

    def vjp(g):
        out = np.zeros(src)
        out[index] = g
        return (out,)

    return _emit(np.array(a.data[index]), (a,), vjp)


def _scatter_rows(idx: np.ndarray, rows: np.ndarray, n: int) -> np.ndarray:
    """``out[idx[i]] += rows[i]`` along the first axis, via a sorted reduce."""
    out = np.zeros((n,) + rows.shape[1:])
    if len(idx) == 0:
        return out
    order = np.argsort(idx, kind="stable")
    sidx = idx[order]
    starts = np.flatnonzero(np.r_[True, sidx[1:] != sidx[:-1]])
    out[sidx[starts]] = np.add.reduceat(rows[order], starts, axis=0)
    return out


def take(a, indices, axis: int = 0) -> Array:
    """Gather entries along ``axis``; repeated indices accumulate gradient."""
    a = asarray(a)
    idx = np.asarray(indices, dtype=np.intp)
    ax = axis % a.ndim
    n = a.shape[ax]

    def vjp(g):
        return (np.moveaxis(_scatter_rows(idx, np.moveaxis(g, ax, 0), n), 0, ax),)

    return _emit(np.take(a.data, idx, axis=ax), (a,), vjp)


def tile(a, n: int) -> Array:
    """Stack ``n`` copies of ``a`` along a new leading axis."""
    a = asarray(a)
    return _emit(np.broadcast_to(a.data, (n,) + a.shape).copy(), (a,), lambda g: (g.sum(axis=0),))


def segment_mean(a, segments, n_segments: int, axis: int = 0) -> Array:
    """Average slices of ``a`` along ``axis`` that share a segment id.

    Empty segments produce zeros.
    """
    a = asarray(a)
    seg = np.asarray(segments, dtype=np.intp)
    ax = axis % a.ndim
    if seg.shape != (a.shape[ax],):
        raise DimensionError(f"segment_mean: {seg.shape[0]} ids for axis of length {a.shape[ax]}")
    counts = np.bincount(seg, minlength=n_segments).astype(np.float64)
    inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
    shape = [1] * a.ndim
    shape[ax] = n_segments
    inv_b = inv.reshape(shape)
    total = np.moveaxis(_scatter_rows(seg, np.moveaxis(a.data, ax, 0), n_segments), 0, ax)

    def vjp(g):
        return (np.take(g * inv_b, seg, axis=ax),)

    return _emit(total * inv_b, (a,), vjp)


# ---------------------------------------------------------------- reductions


def sum(a) -> Array:  # noqa: A001 - mirrors numpy naming
    a = asarray(a)
    src = a.shape
    return _emit(np.array(a.data.sum()), (a,), lambda g: (np.full(src, float(g)),))


def mean(a) -> Array:
    a = asarray(a)
    src, n = a.shape, a.size
    return _emit(np.array(a.data.mean()), (a,), lambda g: (np.full(src, float(g) / n),))


def mean_rows(a) -> Array:
    """Average over the first axis: ``[m, n] -> [n]``."""
    a = asarray(a)
    src, m = a.shape, a.shape[0]
    return _emit(a.data.mean(axis=0), (a,), lambda g: (np.broadcast_to(g / m, src).copy(),))


# ---------------------------------------------------------------- normalisers


def softmax_rows(a) -> Array:
    """Softmax over the last axis, stabilised by subtracting the row max."""
    a = asarray(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _emit(s, (a,), vjp)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Array:
    """Normalise the last axis to zero mean and unit variance, then scale and shift."""
    x, gain, bias = asarray(x), asarray(gain), asarray(bias)
    d = x.shape[-1]
    if d < 2:
        raise DimensionError("layer_norm needs at least 2 features")
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(f"layer_norm: gain/bias must have shape ({d},)")
    if eps <= 0:
        raise ContractError("layer_norm eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    gd = gain.data
    lead = tuple(range(x.ndim - 1))

    def vjp(g):
        gx = g * gd
        dx = rstd * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _emit(xhat * gd + bias.data, (x, gain, bias), vjp)


def mse(pred, target) -> Array:
    """Mean squared error over every entry."""
    d = sub(pred, target)
    return mean(mul(d, d))
