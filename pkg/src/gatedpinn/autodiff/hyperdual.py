"""Hyper-dual numbers whose components are tape variables.

A :class:`HyperDual` carries a value together with first derivatives with
respect to up to three tracked inputs (x, y, t) and *pure* second
derivatives for a chosen subset of them.  Every component is a
:class:`~gatedpinn.autodiff.tape.Variable`, so anything built from the
derivatives (a PDE residual, say) stays reverse-differentiable with
respect to the network parameters.

``None`` in a derivative slot means "identically zero" and lets the
arithmetic skip work.  Mixed partials are never formed.
"""
from __future__ import annotations

from typing import FrozenSet, Optional, Sequence, Tuple, Union

import numpy as np

from . import tape as T
from .tape import Tape, Variable

N_TRACKED = 3
Component = Optional[Variable]


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return T.add(a, b)


def _mul(a, b):
    if a is None or b is None:
        return None
    return T.mul(a, b)


class HyperDual:
    __slots__ = ("value", "d", "dd", "second")

    def __init__(
        self,
        value: Variable,
        d: Sequence[Component] = (None, None, None),
        dd: Sequence[Component] = (None, None, None),
        second: FrozenSet[int] = frozenset(),
    ):
        self.value = value
        self.d = tuple(d)
        self.dd = tuple(dd)
        self.second = frozenset(second)

    def __repr__(self) -> str:
        return f"HyperDual(shape={self.value.shape}, second={sorted(self.second)})"

    @property
    def tape(self) -> Tape:
        return self.value.tape

    @property
    def shape(self):
        return self.value.shape

    def first(self, i: int) -> np.ndarray:
        """First derivative w.r.t. tracked input ``i`` as an array."""
        c = self.d[i]
        return np.zeros(self.value.shape) if c is None else c.value

    def second_derivative(self, i: int) -> np.ndarray:
        c = self.dd[i]
        return np.zeros(self.value.shape) if c is None else c.value

    # arithmetic --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, key):
        return map_linear(self, lambda c: T.getitem(c, key))

    def sum(self, axis=None, keepdims=False):
        return map_linear(self, lambda c: T.sum_(c, axis=axis, keepdims=keepdims))


def lift_input(tape: Tape, value, tracked_index: Optional[int] = None, second: bool = True) -> HyperDual:
    """Seed an input: d/d(own index) = 1, everything else zero."""
    v = tape.constant(value)
    if tracked_index is None:
        return HyperDual(v)
    if not 0 <= tracked_index < N_TRACKED:
        raise ValueError(f"tracked_index must be in 0..{N_TRACKED - 1}")
    d = [None] * N_TRACKED
    d[tracked_index] = tape.constant(np.ones_like(v.value))
    return HyperDual(v, d, second=frozenset({tracked_index}) if second else frozenset())


def as_hyperdual(x, tape: Optional[Tape] = None) -> HyperDual:
    if isinstance(x, HyperDual):
        return x
    if isinstance(x, Variable):
        return HyperDual(x)
    if tape is None:
        raise TypeError("a tape is needed to lift a constant")
    return HyperDual(tape.constant(x))


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, HyperDual):
            return x.tape
        if isinstance(x, Variable):
            return x.tape
    raise TypeError("no tape-bound operand")


def map_linear(a: HyperDual, fn) -> HyperDual:
    """Apply a linear map to every component (sums, slicing, scaling)."""
    return HyperDual(
        fn(a.value),
        [None if c is None else fn(c) for c in a.d],
        [None if c is None else fn(c) for c in a.dd],
        a.second,
    )


def add(a, b) -> HyperDual:
    tape = _tape_of(a, b)
    a, b = as_hyperdual(a, tape), as_hyperdual(b, tape)
    second = a.second | b.second
    return HyperDual(
        T.add(a.value, b.value),
        [_add(x, y) for x, y in zip(a.d, b.d)],
        [_add(x, y) if i in second else None for i, (x, y) in enumerate(zip(a.dd, b.dd))],
        second,
    )


def neg(a: HyperDual) -> HyperDual:
    return map_linear(a, T.neg)


def sub(a, b) -> HyperDual:
    tape = _tape_of(a, b)
    return add(as_hyperdual(a, tape), neg(as_hyperdual(b, tape)))


def mul(a, b) -> HyperDual:
    tape = _tape_of(a, b)
    if not isinstance(a, (HyperDual, Variable)):
        return map_linear(b if isinstance(b, HyperDual) else as_hyperdual(b, tape), lambda c: T.mul(a, c))
    if not isinstance(b, (HyperDual, Variable)):
        return map_linear(as_hyperdual(a, tape), lambda c: T.mul(c, b))
    a, b = as_hyperdual(a, tape), as_hyperdual(b, tape)
    second = a.second | b.second
    d = [_add(_mul(a.value, db), _mul(da, b.value)) for da, db in zip(a.d, b.d)]
    dd = []
    for i in range(N_TRACKED):
        if i not in second:
            dd.append(None)
            continue
        cross = _mul(a.d[i], b.d[i])
        term = _add(_mul(a.value, b.dd[i]), _mul(a.dd[i], b.value))
        dd.append(_add(term, None if cross is None else T.mul(cross, 2.0)))
    return HyperDual(T.mul(a.value, b.value), d, dd, second)


def _unary(a: HyperDual, f: Variable, f1, f2) -> HyperDual:
    """Chain rule: (f(a))' = f1 a', (f(a))'' = f1 a'' + f2 (a')^2."""
    d = [_mul(f1, c) for c in a.d]
    dd = []
    for i in range(N_TRACKED):
        if i not in a.second:
            dd.append(None)
            continue
        curv = None if (a.d[i] is None or f2 is None) else T.mul(f2, T.square(a.d[i]))
        dd.append(_add(_mul(f1, a.dd[i]), curv))
    return HyperDual(f, d, dd, a.second)


def tanh(a: HyperDual) -> HyperDual:
    t = T.tanh(a.value)
    f1 = T.sub(1.0, T.square(t))
    return _unary(a, t, f1, T.mul(T.mul(t, f1), -2.0))


def exp(a: HyperDual) -> HyperDual:
    e = T.exp(a.value)
    return _unary(a, e, e, e)


def softplus(a: HyperDual) -> HyperDual:
    s = T.sigmoid(a.value)
    return _unary(a, T.softplus(a.value), s, T.mul(s, T.sub(1.0, s)))


def square(a: HyperDual) -> HyperDual:
    f1 = T.mul(a.value, 2.0)
    two = a.tape.constant(np.full(a.value.shape, 2.0))
    return _unary(a, T.square(a.value), f1, two)


def relu(a: HyperDual) -> HyperDual:
    # second derivative taken as zero everywhere, including the kink
    step = a.tape.constant((a.value.value > 0.0).astype(np.float64))
    return _unary(a, T.relu(a.value), step, None)


def reciprocal(a: HyperDual) -> HyperDual:
    r = T.div(1.0, a.value)
    r2 = T.square(r)
    return _unary(a, r, T.neg(r2), T.mul(T.mul(r2, r), 2.0))


def div(a, b) -> HyperDual:
    tape = _tape_of(a, b)
    if not isinstance(b, (HyperDual, Variable)):
        return map_linear(as_hyperdual(a, tape), lambda c: T.mul(c, 1.0 / np.asarray(b, dtype=np.float64)))
    return mul(a, reciprocal(as_hyperdual(b, tape)))


def take_rows(a: HyperDual, rows: np.ndarray) -> HyperDual:
    return map_linear(a, lambda c: T.take_rows(c, rows))


def assemble_rows(size: int, parts: Sequence[Tuple[np.ndarray, HyperDual]]) -> HyperDual:
    """Scatter-add hyper-dual row blocks (see :func:`tape.assemble_rows`)."""
    second = frozenset().union(*(p.second for _, p in parts))

    def gather(get):
        chunks = [(rows, get(p)) for rows, p in parts if get(p) is not None]
        if not chunks:
            return None
        return T.assemble_rows(size, chunks)

    value = gather(lambda p: p.value)
    d = [gather(lambda p, i=i: p.d[i]) for i in range(N_TRACKED)]
    dd = [gather(lambda p, i=i: p.dd[i]) if i in second else None for i in range(N_TRACKED)]
    return HyperDual(value, d, dd, second)
