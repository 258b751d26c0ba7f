"""Reverse-mode tape over float64 arrays.

A :class:`Tape` is an append-only record of operations.  Every
:class:`Variable` is a node index into exactly one tape plus the value it
holds.  Values may be 0-d (plain scalars) or arrays batched over sample
points; the reverse sweep treats each array element as an independent
scalar, so nothing here is a general tensor library -- only the handful of
array ops the PINN losses need are provided.
"""
from __future__ import annotations

from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

ArrayLike = Union[float, int, np.ndarray]
Operand = Union["Variable", ArrayLike]


class TapeMismatchError(ValueError):
    """Raised when variables from two different tapes are combined."""


class NumericRangeError(FloatingPointError):
    """Raised when an operation on finite operands produces inf/nan."""


class Variable:
    """A node on a :class:`Tape`."""

    __slots__ = ("tape", "index", "value", "requires_grad")
    __array_priority__ = 1000  # make ndarray <op> Variable defer to us

    def __init__(self, tape: "Tape", index: int, value: np.ndarray, requires_grad: bool):
        self.tape = tape
        self.index = index
        self.value = value
        self.requires_grad = requires_grad

    def __repr__(self) -> str:
        return f"Variable(index={self.index}, shape={self.value.shape})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def T(self) -> "Variable":
        return transpose(self)

    def item(self) -> float:
        return float(self.value)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """Append-only operation record with a reverse sweep.

    The tape is reusable: :meth:`reset` drops all nodes so the same object
    can host the next batch.  Parameter leaves are registered by name with
    :meth:`param` and :meth:`backward` returns gradients keyed by those
    names.
    """

    def __init__(self) -> None:
        self.reset()

    def reset(self) -> None:
        self._values: list = []
        self._parents: list = []
        self._vjps: list = []
        self._params: Dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._values)

    # node creation -------------------------------------------------------

    def _push(self, value: np.ndarray, parents: Tuple[int, ...], vjp: Optional[VJP], requires_grad: bool) -> Variable:
        index = len(self._values)
        self._values.append(value)
        if requires_grad:
            self._parents.append(parents)
            self._vjps.append(vjp)
        else:
            self._parents.append(())
            self._vjps.append(None)
        return Variable(self, index, value, requires_grad)

    def constant(self, value: ArrayLike) -> Variable:
        return self._push(np.asarray(value, dtype=np.float64), (), None, False)

    def param(self, name: str, value: ArrayLike) -> Variable:
        """Register a parameter leaf; its value is copied (snapshot)."""
        if name in self._params:
            raise ValueError(f"parameter {name!r} already registered on this tape")
        var = self._push(np.array(value, dtype=np.float64), (), None, True)
        self._params[name] = var.index
        return var

    @property
    def param_names(self) -> Tuple[str, ...]:
        return tuple(self._params)

    # reverse sweep -------------------------------------------------------

    def backward(self, seed: Variable) -> Dict[str, np.ndarray]:
        """Return d(seed)/d(param) for every registered parameter leaf.

        The tape itself is not modified, so it can be swept again or reset.
        """
        if not isinstance(seed, Variable) or seed.tape is not self:
            raise TapeMismatchError("seed does not belong to this tape")
        if seed.value.size != 1:
            raise ValueError(f"seed must be a scalar, got shape {seed.value.shape}")
        adjoints: list = [None] * (seed.index + 1)
        adjoints[seed.index] = np.ones_like(seed.value)
        param_nodes = set(self._params.values())
        parents_of = self._parents
        vjps = self._vjps
        for i in range(seed.index, -1, -1):
            g = adjoints[i]
            if g is None:
                continue
            vjp = vjps[i]
            if vjp is None:
                continue
            grads = vjp(g)
            for p, gp in zip(parents_of[i], grads):
                if gp is None:
                    continue
                prev = adjoints[p]
                adjoints[p] = gp if prev is None else prev + gp
            if i not in param_nodes:
                adjoints[i] = None
        out = {}
        for name, idx in self._params.items():
            g = adjoints[idx] if idx <= seed.index else None
            out[name] = np.zeros_like(self._values[idx]) if g is None else np.asarray(g, dtype=np.float64)
        return out


# ---------------------------------------------------------------------------
# helpers


def _tape_of(*operands: Operand) -> Tape:
    tape = None
    for op in operands:
        if isinstance(op, Variable):
            if tape is None:
                tape = op.tape
            elif op.tape is not tape:
                raise TapeMismatchError("operands live on different tapes")
    if tape is None:
        raise TypeError("at least one operand must be a Variable")
    return tape


def _val(x: Operand) -> np.ndarray:
    return x.value if isinstance(x, Variable) else np.asarray(x, dtype=np.float64)


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _op(value: np.ndarray, inputs: Sequence[Operand], vjp: Callable) -> Variable:
    """Record ``value`` computed from ``inputs``.

    ``vjp(g)`` must return one gradient per input (``None`` allowed); only
    entries for grad-requiring Variables are kept.
    """
    tape = _tape_of(*inputs)
    live = [i for i, x in enumerate(inputs) if isinstance(x, Variable) and x.requires_grad]
    if not live:
        return tape._push(value, (), None, False)
    parents = tuple(inputs[i].index for i in live)
    if len(live) == len(inputs):
        return tape._push(value, parents, vjp, True)

    def pruned(g, _vjp=vjp, _live=live):
        full = _vjp(g)
        return [full[i] for i in _live]

    return tape._push(value, parents, pruned, True)


def _check_finite(value: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NumericRangeError(f"{name} produced a non-finite value")
    return value


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: Operand, b: Operand) -> Variable:
    av, bv = _val(a), _val(b)
    sa, sb = av.shape, bv.shape
    return _op(av + bv, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Operand, b: Operand) -> Variable:
    av, bv = _val(a), _val(b)
    sa, sb = av.shape, bv.shape
    return _op(av - bv, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a: Operand, b: Operand) -> Variable:
    av, bv = _val(a), _val(b)
    return _op(av * bv, (a, b), lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def div(a: Operand, b: Operand) -> Variable:
    av, bv = _val(a), _val(b)
    out = av / bv
    return _op(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / bv, av.shape), _unbroadcast(-g * out / bv, bv.shape)),
    )


def neg(a: Variable) -> Variable:
    return _op(-a.value, (a,), lambda g: (-g,))


def square(a: Variable) -> Variable:
    av = a.value
    return _op(av * av, (a,), lambda g: (2.0 * g * av,))


def exp(a: Variable) -> Variable:
    with np.errstate(over="ignore"):
        out = np.exp(a.value)
    _check_finite(out, "exp")
    return _op(out, (a,), lambda g: (g * out,))


def log(a: Variable) -> Variable:
    av = a.value
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(av)
    _check_finite(out, "log")
    return _op(out, (a,), lambda g: (g / av,))


def sqrt(a: Variable) -> Variable:
    out = np.sqrt(a.value)
    return _op(out, (a,), lambda g: (0.5 * g / out,))


def tanh(a: Variable) -> Variable:
    out = np.tanh(a.value)
    return _op(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Variable) -> Variable:
    out = _sigmoid(a.value)
    return _op(out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a: Variable) -> Variable:
    av = a.value
    out = _softplus(av)
    return _op(out, (a,), lambda g: (g * _sigmoid(av),))


def relu(a: Variable) -> Variable:
    av = a.value
    mask = (av > 0.0).astype(np.float64)
    return _op(av * mask, (a,), lambda g: (g * mask,))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


# ---------------------------------------------------------------------------
# structural ops


def matmul(a: Operand, b: Operand) -> Variable:
    av, bv = _val(a), _val(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError("matmul expects 2-d operands")
    return _op(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a: Variable) -> Variable:
    return _op(a.value.T, (a,), lambda g: (g.T,))


def reshape(a: Variable, shape) -> Variable:
    old = a.value.shape
    return _op(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def sum_(a: Variable, axis=None, keepdims: bool = False) -> Variable:
    av = a.value
    out = av.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, av.shape).copy(),)

    return _op(np.asarray(out), (a,), vjp)


def mean(a: Variable, axis=None, keepdims: bool = False) -> Variable:
    n = a.value.size if axis is None else np.prod([a.value.shape[ax] for ax in np.atleast_1d(axis)])
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def getitem(a: Variable, key) -> Variable:
    av = a.value
    out = np.array(av[key], dtype=np.float64)

    basic = _is_basic_index(key)

    def vjp(g):
        full = np.zeros_like(av)
        if basic:
            full[key] = g
        else:
            np.add.at(full, key, g)
        return (full,)

    return _op(out, (a,), vjp)


def _is_basic_index(key) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (int, np.integer, slice)) or k is Ellipsis or k is None for k in parts)


def take_rows(a: Variable, rows: np.ndarray) -> Variable:
    """``a[rows]`` for *unique* integer ``rows`` (cheaper than getitem)."""
    av = a.value

    def vjp(g):
        full = np.zeros_like(av)
        full[rows] = g
        return (full,)

    return _op(av[rows], (a,), vjp)


def assemble_rows(size: int, parts: Iterable[Tuple[np.ndarray, Variable]]) -> Variable:
    """Scatter-add row blocks into a zero array of length ``size``.

    ``parts`` holds ``(rows, values)`` pairs; rows within one pair must be
    unique, rows across pairs may overlap (contributions add).
    """
    parts = list(parts)
    if not parts:
        raise ValueError("assemble_rows needs at least one part")
    trailing = parts[0][1].value.shape[1:]
    out = np.zeros((size,) + trailing)
    for rows, v in parts:
        out[rows] += v.value
    index_list = [rows for rows, _ in parts]
    return _op(out, tuple(v for _, v in parts), lambda g: [g[rows] for rows in index_list])


def stack(parts: Sequence[Operand], axis: int = 0) -> Variable:
    vals = [_val(p) for p in parts]
    out = np.stack(vals, axis=axis)

    def vjp(g):
        return [np.take(g, i, axis=axis) for i in range(len(vals))]

    return _op(out, tuple(parts), vjp)


def concat(parts: Sequence[Operand], axis: int = 0) -> Variable:
    vals = [_val(p) for p in parts]
    out = np.concatenate(vals, axis=axis)
    bounds = np.cumsum([0] + [v.shape[axis] for v in vals])

    def vjp(g):
        return [np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(vals))]

    return _op(out, tuple(parts), vjp)
