"""Model wrappers: dense baseline PINN and the gated mixture of experts.

Both map raw (x, y, t) to (u, v).  Inputs of the network(s) are rescaled
to [-1, 1] from the domain bounds; the gate sees raw coordinates.
Parameters travel as flat ``{name: array}`` dicts so the optimizer,
checkpoints and the parallel trainer never need to know the model kind.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import gating as gt
from .autodiff import hyperdual as hd
from .autodiff import stack as S
from .autodiff.hyperdual import HyperDual
from .autodiff.stack import StackLayout
from .autodiff.tape import Tape, Variable
from .gating import GatingConfig, GatingParams
from .network import MlpParams, evaluate, forward_stack, init_params
from .qho import analytic_psi

MODEL_KINDS = ("baseline", "gated-linear", "gated-nonlinear")


def _normalizer(lower, upper) -> Tuple[np.ndarray, np.ndarray]:
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    scale = 2.0 / (upper - lower)
    return scale, -1.0 - lower * scale


@dataclass
class Prediction:
    u: HyperDual
    v: HyperDual
    # gated models only: (B, N) noisy logits on the tape, for the importance loss
    logits: Optional[Variable] = None


class BaselinePINN:
    kind = "baseline"

    def __init__(self, net: MlpParams, lower, upper):
        self.net = net
        self.lower = np.asarray(lower, dtype=np.float64)
        self.upper = np.asarray(upper, dtype=np.float64)
        self._scale, self._shift = _normalizer(self.lower, self.upper)

    @classmethod
    def create(cls, hidden: List[int], lower, upper, seed: int) -> "BaselinePINN":
        return cls(init_params([3, *hidden, 2], seed), lower, upper)

    @property
    def n_params(self) -> int:
        return self.net.n_params

    def parameters(self) -> Dict[str, np.ndarray]:
        return self.net.named_arrays("net.")

    def with_parameters(self, arrays) -> "BaselinePINN":
        return BaselinePINN(self.net.with_arrays(arrays, "net."), self.lower, self.upper)

    def predict(self, tape: Tape, X: np.ndarray, layout: StackLayout, noise=None, bound=None) -> Prediction:
        bound = bound if bound is not None else self.bind(tape)
        Sx = S.pack_points(tape, X, layout, self._scale, self._shift)
        u, v = S.unpack(forward_stack(bound, Sx, layout), layout)
        return Prediction(u, v)

    def bind(self, tape: Tape):
        return self.net.bind(tape, "net.")

    def evaluate(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        out = evaluate(self.net, np.asarray(X) * self._scale + self._shift)
        return out[:, 0], out[:, 1]


@dataclass
class ExpertCounter:
    """Instrumentation: points pushed through experts vs points routed."""

    expert_points: int = 0
    points: int = 0

    def reset(self):
        self.expert_points = 0
        self.points = 0

    @property
    def per_point(self) -> float:
        return self.expert_points / self.points if self.points else 0.0


@dataclass
class _BoundGated:
    experts: list
    gate: gt.BoundGating


class GatedPINN:
    def __init__(self, experts: List[MlpParams], gate: GatingParams, config: GatingConfig, lower, upper):
        if not experts:
            raise ValueError("need at least one expert")
        if len(experts) != config.n_experts or gate.n_experts != config.n_experts:
            raise ValueError("expert count does not match the gating configuration")
        self.experts = experts
        self.gate = gate
        self.config = config
        self.lower = np.asarray(lower, dtype=np.float64)
        self.upper = np.asarray(upper, dtype=np.float64)
        self._scale, self._shift = _normalizer(self.lower, self.upper)
        self.counter = ExpertCounter()

    @property
    def kind(self) -> str:
        return "gated-" + self.config.kind

    @classmethod
    def create(cls, hidden: List[int], config: GatingConfig, lower, upper, seed: int) -> "GatedPINN":
        ss = np.random.SeedSequence(seed).spawn(config.n_experts + 1)
        experts = [init_params([3, *hidden, 2], int(s.generate_state(1)[0])) for s in ss[:-1]]
        gate = gt.init_gating(config, int(ss[-1].generate_state(1)[0]))
        return cls(experts, gate, config, lower, upper)

    @property
    def n_params(self) -> int:
        return sum(e.n_params for e in self.experts) + self.gate.n_params

    def parameters(self) -> Dict[str, np.ndarray]:
        out = {}
        for i, e in enumerate(self.experts):
            out.update(e.named_arrays(f"expert{i}."))
        out.update(self.gate.named_arrays("gate."))
        return out

    def with_parameters(self, arrays) -> "GatedPINN":
        experts = [e.with_arrays(arrays, f"expert{i}.") for i, e in enumerate(self.experts)]
        m = GatedPINN(experts, self.gate.with_arrays(arrays, "gate."), self.config, self.lower, self.upper)
        m.counter = self.counter
        return m

    def bind(self, tape: Tape) -> _BoundGated:
        experts = [e.bind(tape, f"expert{i}.") for i, e in enumerate(self.experts)]
        return _BoundGated(experts, gt.bind_gating(self.gate, tape, "gate."))

    def predict(self, tape: Tape, X: np.ndarray, layout: StackLayout, noise=None, bound=None) -> Prediction:
        """Sparse mixture: only the k routed experts see each point.

        ``noise`` is the (B, N) standard-normal draw for the gate (None in
        evaluation mode).
        """
        bound = bound if bound is not None else self.bind(tape)
        X = np.asarray(X, dtype=np.float64)
        B = len(X)
        k = self.config.k
        # input derivatives of the gate weights are only needed when k > 1
        gate_layout = layout if k > 1 else S.VALUES_ONLY
        H = gt.gate_logits_tape(bound.gate, tape, X, noise, gate_layout)
        kept = gt.top_k_indices(H.value.value, k)
        G = gt.sparse_weights_tape(H, kept) if k > 1 else None
        parts_u, parts_v = [], []
        for i, expert in enumerate(bound.experts):
            rows = np.flatnonzero((kept == i).any(axis=1))
            if rows.size == 0:
                continue
            self.counter.expert_points += rows.size
            Sx = S.pack_points(tape, X[rows], layout, self._scale, self._shift)
            u_i, v_i = S.unpack(forward_stack(expert, Sx, layout), layout)
            if G is not None:
                g_i = hd.take_rows(G[:, i], rows)
                u_i, v_i = hd.mul(u_i, g_i), hd.mul(v_i, g_i)
            parts_u.append((rows, u_i))
            parts_v.append((rows, v_i))
        self.counter.points += B
        u = hd.assemble_rows(B, parts_u)
        v = hd.assemble_rows(B, parts_v)
        return Prediction(u, v, logits=H.value)

    def route(self, X: np.ndarray) -> np.ndarray:
        """Noise-free kept expert indices (B, k)."""
        return gt.top_k_indices(gt.clean_logits(self.gate, X), self.config.k)

    def evaluate(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=np.float64)
        H = gt.clean_logits(self.gate, X)
        dec = gt.keep_top_k_softmax(H, self.config.k)
        Xn = X * self._scale + self._shift
        u = np.zeros(len(X))
        v = np.zeros(len(X))
        for i, expert in enumerate(self.experts):
            rows = np.flatnonzero(dec.weights[:, i] > 0.0)
            if rows.size == 0:
                continue
            out = evaluate(expert, Xn[rows])
            w = dec.weights[rows, i]
            u[rows] += w * out[:, 0]
            v[rows] += w * out[:, 1]
        return u, v


class OracleModel:
    """Analytic solution behind the model ``evaluate`` interface."""

    kind = "oracle"

    def __init__(self, config):
        self.config = config

    def evaluate(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=np.float64)
        s = analytic_psi(self.config, X[:, 0], X[:, 1], X[:, 2])
        return s.u, s.v
