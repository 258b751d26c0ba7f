"""Multilayer perceptrons and the Adam optimizer.

Weights are stored ``(fan_out, fan_in)``; a layer computes
``g(W @ y_prev + b)``.  Hidden layers default to tanh, the output layer is
linear.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .autodiff import stack as S
from .autodiff.hyperdual import HyperDual
from .autodiff.stack import StackLayout
from .autodiff.tape import Tape, Variable

ACTIVATIONS = ("tanh", "relu", "softplus", "linear")


@dataclass
class MlpParams:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activations: List[str]

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases and activations must have one entry per layer")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (W.shape[0],):
                raise ValueError(f"layer {l}: bias shape {b.shape} != ({W.shape[0]},)")
            if l and W.shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(f"layer {l}: expects {W.shape[1]} inputs, previous layer gives {self.weights[l - 1].shape[0]}")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")

    @property
    def layer_sizes(self) -> List[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def named_arrays(self, prefix: str = "") -> Dict[str, np.ndarray]:
        out = {}
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}W{l}"] = W
            out[f"{prefix}b{l}"] = b
        return out

    def with_arrays(self, arrays: Mapping[str, np.ndarray], prefix: str = "") -> "MlpParams":
        n = len(self.weights)
        return MlpParams(
            [np.asarray(arrays[f"{prefix}W{l}"], dtype=np.float64) for l in range(n)],
            [np.asarray(arrays[f"{prefix}b{l}"], dtype=np.float64) for l in range(n)],
            list(self.activations),
        )

    def bind(self, tape: Tape, prefix: str = "") -> "BoundMlp":
        arrays = self.named_arrays(prefix)
        return BoundMlp(
            [tape.param(name, arr) for name, arr in arrays.items() if name[len(prefix)] == "W"],
            [tape.param(name, arr) for name, arr in arrays.items() if name[len(prefix)] == "b"],
            list(self.activations),
        )


@dataclass
class BoundMlp:
    """An :class:`MlpParams` whose arrays are parameter leaves on a tape."""

    weights: List[Variable]
    biases: List[Variable]
    activations: List[str]


def init_params(
    layer_sizes: Sequence[int],
    seed: int,
    hidden: str = "tanh",
    output: str = "linear",
) -> MlpParams:
    """Xavier/Glorot-uniform weights, zero biases."""
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output size")
    if any(int(n) <= 0 for n in sizes):
        raise ValueError(f"layer sizes must be positive, got {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    acts = [hidden] * (len(weights) - 1) + [output]
    return MlpParams(weights, biases, acts)


def forward_stack(net: BoundMlp, stack: Variable, layout: StackLayout) -> Variable:
    for W, b, act in zip(net.weights, net.biases, net.activations):
        stack = S.linear(stack, W, b)
        stack = S.activation(stack, act, layout)
    return stack


def forward(net: BoundMlp, inputs: Sequence[HyperDual], layout: Optional[StackLayout] = None) -> List[HyperDual]:
    """Hyper-dual forward pass: one hyper-dual per input column in, one per output unit out."""
    layout = layout or StackLayout()
    if len(inputs) != net.weights[0].value.shape[1]:
        raise ValueError(f"network takes {net.weights[0].value.shape[1]} inputs, got {len(inputs)}")
    out = forward_stack(net, S.pack(inputs, layout), layout)
    return S.unpack(out, layout)


def evaluate(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """Plain value forward pass, no tape, ``X`` of shape (B, n_in)."""
    y = np.asarray(X, dtype=np.float64)
    for W, b, act in zip(params.weights, params.biases, params.activations):
        y = y @ W.T + b
        if act == "tanh":
            y = np.tanh(y)
        elif act == "relu":
            y = np.maximum(y, 0.0)
        elif act == "softplus":
            y = np.log1p(np.exp(-np.abs(y))) + np.maximum(y, 0.0)
    return y


# ---------------------------------------------------------------------------
# Adam


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], **hyper) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            **hyper,
        )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new arrays, mutates ``state``."""
    for name in params:
        g = grads[name]
        if g.shape != params[name].shape:
            raise ValueError(f"gradient for {name!r} has shape {g.shape}, parameter {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in parameter block {name!r}")
    if not state.m:
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    out = {}
    for name, p in params.items():
        g = grads[name]
        m = state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        out[name] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return out, state
