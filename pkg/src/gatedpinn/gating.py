"""Noisy top-k gating over N experts.

Logits are ``H = clean(x, y, t) + eps * softplus([x, y, t] @ W_noise)``
where ``clean`` is ``[x, y, t] @ W_g`` (linear gating) or a small ReLU MLP
(nonlinear gating) and ``eps ~ N(0, 1)`` per point and expert.  Noise is
only used in training.  The prediction weights keep the k largest logits
and softmax over those; the importance loss uses a dense softmax over all
N logits so that it stays differentiable at k = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .autodiff import hyperdual as hd
from .autodiff import stack as S
from .autodiff import tape as T
from .autodiff.hyperdual import N_TRACKED, HyperDual
from .autodiff.stack import StackLayout, VALUES_ONLY
from .autodiff.tape import Tape, Variable
from .network import BoundMlp, MlpParams, evaluate, forward_stack, init_params

GATING_KINDS = ("linear", "nonlinear")


class DegenerateBatchError(ValueError):
    """All importance sums are zero, so the coefficient of variation is undefined."""


@dataclass(frozen=True)
class GatingConfig:
    n_experts: int = 4
    k: int = 1
    kind: str = "linear"
    noise: bool = True
    w_I: float = 0.1
    hidden: int = 20

    def __post_init__(self):
        if not 1 <= self.k <= self.n_experts:
            raise ValueError(f"need 1 <= k <= N, got k={self.k}, N={self.n_experts}")
        if self.w_I < 0:
            raise ValueError("w_I must be non-negative")
        if self.kind not in GATING_KINDS:
            raise ValueError(f"gating kind must be one of {GATING_KINDS}")


@dataclass
class GatingParams:
    kind: str
    W_noise: np.ndarray  # (3, N)
    W_g: Optional[np.ndarray] = None  # (3, N), linear gating
    net: Optional[MlpParams] = None  # 3 -> hidden -> N, nonlinear gating

    @property
    def n_experts(self) -> int:
        return self.W_noise.shape[1]

    def named_arrays(self, prefix: str = "gate.") -> dict:
        out = {}
        if self.kind == "linear":
            out[prefix + "W_g"] = self.W_g
        else:
            out.update(self.net.named_arrays(prefix + "nn."))
        out[prefix + "W_noise"] = self.W_noise
        return out

    def with_arrays(self, arrays, prefix: str = "gate.") -> "GatingParams":
        if self.kind == "linear":
            return GatingParams("linear", np.asarray(arrays[prefix + "W_noise"]), W_g=np.asarray(arrays[prefix + "W_g"]))
        return GatingParams("nonlinear", np.asarray(arrays[prefix + "W_noise"]), net=self.net.with_arrays(arrays, prefix + "nn."))

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.named_arrays().values())


def init_gating(config: GatingConfig, seed: int) -> GatingParams:
    rng = np.random.default_rng(seed)
    N = config.n_experts
    limit = np.sqrt(6.0 / (3 + N))
    W_noise = rng.uniform(-limit, limit, size=(3, N))
    if config.kind == "linear":
        return GatingParams("linear", W_noise, W_g=rng.uniform(-limit, limit, size=(3, N)))
    net = init_params([3, config.hidden, N], seed=int(rng.integers(2**31)), hidden="relu")
    return GatingParams("nonlinear", W_noise, net=net)


@dataclass
class BoundGating:
    kind: str
    W_noise: Variable
    W_g: Optional[Variable] = None
    net: Optional[BoundMlp] = None


def bind_gating(params: GatingParams, tape: Tape, prefix: str = "gate.") -> BoundGating:
    if params.kind == "linear":
        W_g = tape.param(prefix + "W_g", params.W_g)
        return BoundGating("linear", tape.param(prefix + "W_noise", params.W_noise), W_g=W_g)
    net = params.net.bind(tape, prefix + "nn.")
    return BoundGating("nonlinear", tape.param(prefix + "W_noise", params.W_noise), net=net)


# ---------------------------------------------------------------------------
# plain-array evaluation


def clean_logits(params: GatingParams, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if params.kind == "linear":
        return X @ params.W_g
    return evaluate(params.net, X)


def _softplus(z):
    return np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0)


def gate_logits(params: GatingParams, X, noise_rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """H for points ``X`` (B, 3); noise-free when ``noise_rng`` is None."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    H = clean_logits(params, X)
    if noise_rng is not None:
        eps = noise_rng.standard_normal(H.shape)
        H = H + eps * _softplus(X @ params.W_noise)
    return H


@dataclass
class GateDecision:
    """Sparse gate weights for a batch: ``weights`` (B, N), ``kept`` (B, k)."""

    weights: np.ndarray
    kept: np.ndarray


def top_k_indices(H: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest logits per row, ties to the lower index."""
    H = np.atleast_2d(H)
    order = np.argsort(-H, axis=1, kind="stable")
    return order[:, :k]


def keep_top_k_softmax(H, k: int) -> GateDecision:
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    N = H.shape[1]
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    kept = top_k_indices(H, k)
    rows = np.arange(H.shape[0])[:, None]
    kept_logits = H[rows, kept]
    e = np.exp(kept_logits - kept_logits.max(axis=1, keepdims=True))
    W = np.zeros_like(H)
    W[rows, kept] = e / e.sum(axis=1, keepdims=True)
    return GateDecision(W, kept)


def dense_softmax(H: np.ndarray) -> np.ndarray:
    e = np.exp(H - H.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def cv_squared(importance) -> float:
    """Squared coefficient of variation with the population std."""
    I = np.asarray(importance, dtype=np.float64)
    mu = I.mean()
    if mu == 0.0:
        raise DegenerateBatchError("importance sums are all zero")
    return float(I.var() / (mu * mu))


def decomposition_map(params: GatingParams, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """Winning expert per point of a fixed-t slice (noise off, ties low)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    X = np.column_stack([x.ravel(), y.ravel(), np.full(x.size, float(t))])
    return np.argmax(clean_logits(params, X), axis=1).reshape(x.shape)


# ---------------------------------------------------------------------------
# tape versions


def as_matrix(stack: Variable, layout: StackLayout) -> HyperDual:
    """View a (C, B, N) stack as one hyper-dual with (B, N) components."""
    d = [None] * N_TRACKED
    dd = [None] * N_TRACKED
    for i in layout.first:
        d[i] = T.getitem(stack, layout.first_channel(i))
    for i in layout.second:
        dd[i] = T.getitem(stack, layout.second_channel(i))
    return HyperDual(T.getitem(stack, 0), d, dd, frozenset(layout.second))


def gate_logits_tape(
    gate: BoundGating,
    tape: Tape,
    X: np.ndarray,
    eps: Optional[np.ndarray] = None,
    layout: StackLayout = VALUES_ONLY,
) -> HyperDual:
    """H on the tape; with ``VALUES_ONLY`` only the value component exists."""
    Sx = S.pack_points(tape, X, layout)
    if gate.kind == "linear":
        clean = S.linear(Sx, T.transpose(gate.W_g))
    else:
        clean = forward_stack(gate.net, Sx, layout)
    H = as_matrix(clean, layout)
    if eps is not None:
        width = S.activation(S.linear(Sx, T.transpose(gate.W_noise)), "softplus", layout)
        H = hd.add(H, hd.mul(as_matrix(width, layout), np.asarray(eps, dtype=np.float64)))
    return H


def sparse_weights_tape(H: HyperDual, kept: np.ndarray) -> HyperDual:
    """Softmax over the kept logits only, with input derivatives."""
    Hv = H.value.value
    rows = np.arange(Hv.shape[0])[:, None]
    mask = np.zeros_like(Hv)
    mask[rows, kept] = 1.0
    shift = Hv[rows, kept].max(axis=1, keepdims=True)
    e = hd.mul(hd.exp(hd.sub(H, shift)), mask)
    return hd.div(e, e.sum(axis=1, keepdims=True))


def importance_loss_tape(logits: Variable, w_I: float) -> Variable:
    """w_I * CV(I)^2 with I the column sums of the dense softmax of ``logits``."""
    Hv = logits.value
    e = T.exp(T.sub(logits, Hv.max(axis=1, keepdims=True)))
    P = T.div(e, T.sum_(e, axis=1, keepdims=True))
    return importance_loss(T.sum_(P, axis=0), w_I)


def importance_loss(importance, w_I: float):
    """w_I * var(I) / mean(I)^2 for a Variable or array of importance sums."""
    if not isinstance(importance, Variable):
        return w_I * cv_squared(importance)
    mu = T.mean(importance)
    if mu.item() == 0.0:
        raise DegenerateBatchError("importance sums are all zero")
    var = T.mean(T.square(T.sub(importance, mu)))
    return T.mul(T.div(var, T.square(mu)), float(w_I))
