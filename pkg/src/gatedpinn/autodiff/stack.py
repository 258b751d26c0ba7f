"""Packed hyper-dual stacks for dense layers.

An MLP pushes every hyper-dual channel through the same weights, so instead
of one tape node per component we keep all channels of a layer in one array
of shape ``(C, B, n)``: channel 0 holds values, then first derivatives,
then pure second derivatives (see :class:`StackLayout`).  A dense layer is
one matmul node, an activation one fused-kernel node.  :func:`unpack`
splits the result back into :class:`HyperDual` components for the
residual arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .hyperdual import HyperDual, N_TRACKED
from .tape import Tape, TapeMismatchError, Variable, _op


@dataclass(frozen=True)
class StackLayout:
    first: Tuple[int, ...] = (0, 1, 2)
    second: Tuple[int, ...] = (0, 1)
    dd_src: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if any(i not in self.first for i in self.second):
            raise ValueError("second-derivative inputs must also be first-derivative inputs")
        if any(not 0 <= i < N_TRACKED for i in self.first):
            raise ValueError("tracked inputs are 0 (x), 1 (y), 2 (t)")
        src = np.array([1 + self.first.index(i) for i in self.second], dtype=np.intp)
        object.__setattr__(self, "dd_src", src)

    @property
    def channels(self) -> int:
        return 1 + len(self.first) + len(self.second)

    @property
    def n_first(self) -> int:
        return len(self.first)

    def first_channel(self, i: int) -> Optional[int]:
        return 1 + self.first.index(i) if i in self.first else None

    def second_channel(self, i: int) -> Optional[int]:
        return 1 + len(self.first) + self.second.index(i) if i in self.second else None


VALUES_ONLY = StackLayout(first=(), second=())
PINN_LAYOUT = StackLayout()


def pack_points(tape: Tape, X: np.ndarray, layout: StackLayout, scale=None, shift=None) -> Variable:
    """Constant stack for input points ``X`` (B, 3), optionally affinely mapped.

    The stack describes ``X * scale + shift`` as a function of the raw
    coordinates, so derivative channels carry ``scale``.
    """
    X = np.asarray(X, dtype=np.float64)
    B, n_in = X.shape
    scale = np.ones(n_in) if scale is None else np.asarray(scale, dtype=np.float64)
    shift = np.zeros(n_in) if shift is None else np.asarray(shift, dtype=np.float64)
    S = np.zeros((layout.channels, B, n_in))
    S[0] = X * scale + shift
    for a, i in enumerate(layout.first):
        S[1 + a, :, i] = scale[i]
    return tape.constant(S)


def pack(inputs: Sequence[HyperDual], layout: StackLayout) -> Variable:
    """Stack scalar-per-point hyper-duals (one per input column)."""
    tape = inputs[0].tape
    B = inputs[0].value.value.shape
    comps: List[Tuple[int, int, Variable]] = []
    for j, hd in enumerate(inputs):
        if hd.tape is not tape:
            raise TapeMismatchError("inputs live on different tapes")
        comps.append((0, j, hd.value))
        for i in layout.first:
            if hd.d[i] is not None:
                comps.append((layout.first_channel(i), j, hd.d[i]))
        for i in layout.second:
            if hd.dd[i] is not None:
                comps.append((layout.second_channel(i), j, hd.dd[i]))
    S = np.zeros((layout.channels,) + B + (len(inputs),))
    for c, j, v in comps:
        S[c, ..., j] = v.value
    return _op(S, tuple(v for _, _, v in comps), lambda g: [g[c, ..., j] for c, j, _ in comps])


def linear(S: Variable, W: Variable, b: Optional[Variable] = None) -> Variable:
    """``S @ W.T`` on every channel, ``+ b`` on the value channel only."""
    Sv, Wv = S.value, W.value
    C, B, n = Sv.shape
    m, n_w = Wv.shape
    if n_w != n:
        raise ValueError(f"layer expects {n_w} inputs, stack has {n}")
    flat = Sv.reshape(C * B, n)
    out = (flat @ Wv.T).reshape(C, B, m)
    if b is not None:
        out[0] += b.value
    need_s = S.requires_grad

    def vjp(g):
        g2 = g.reshape(C * B, m)
        gS = (g2 @ Wv).reshape(C, B, n) if need_s else None
        gW = g2.T @ flat
        if b is None:
            return (gS, gW)
        return (gS, gW, g[0].sum(axis=0))

    inputs = (S, W) if b is None else (S, W, b)
    return _op(out, inputs, vjp)


def activation(S: Variable, kind: str, layout: StackLayout) -> Variable:
    if kind == "linear":
        return S
    z = S.value
    if z.shape[0] != layout.channels:
        raise ValueError("stack does not match layout")
    y, saved = kernels.activation_forward(kind, z, layout.n_first, layout.dd_src)
    return _op(y, (S,), lambda g: (kernels.activation_backward(kind, g, z, saved, layout.n_first, layout.dd_src),))


def channel(S: Variable, c: int, column: int) -> Variable:
    Sv = S.value

    def vjp(g):
        full = np.zeros_like(Sv)
        full[c, ..., column] = g
        return (full,)

    return _op(Sv[c, ..., column].copy(), (S,), vjp)


def unpack(S: Variable, layout: StackLayout) -> List[HyperDual]:
    """Split a ``(C, B, m)`` stack into ``m`` hyper-duals of shape ``(B,)``."""
    m = S.value.shape[-1]
    out = []
    for col in range(m):
        d = [None] * N_TRACKED
        dd = [None] * N_TRACKED
        for i in layout.first:
            d[i] = channel(S, layout.first_channel(i), col)
        for i in layout.second:
            dd[i] = channel(S, layout.second_channel(i), col)
        out.append(HyperDual(channel(S, 0, col), d, dd, frozenset(layout.second)))
    return out
