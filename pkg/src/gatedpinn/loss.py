"""PINN objective for the 2D harmonic oscillator.

    total = alpha * L0 + Lf + Lb (+ LI for gated models)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .autodiff import tape as T
from .autodiff.hyperdual import HyperDual
from .autodiff.tape import Variable

LB_FORMS = ("squared", "printed")


class NonFiniteLossError(FloatingPointError):
    def __init__(self, component: str, step: Optional[int] = None):
        self.component = component
        self.step = step
        where = "" if step is None else f" at step {step}"
        super().__init__(f"loss component {component} is not finite{where}")


def residual(u: HyperDual, v: HyperDual, x, y) -> Tuple[Variable, Variable]:
    """(f_u, f_v); both vanish where psi = u + i v solves the PDE."""
    pot = 0.5 * (np.asarray(x, dtype=np.float64) ** 2 + np.asarray(y, dtype=np.float64) ** 2)
    lap_u = T.add(u.dd[0], u.dd[1])
    lap_v = T.add(v.dd[0], v.dd[1])
    f_u = T.add(T.sub(T.mul(lap_v, -0.5), u.d[2]), T.mul(v.value, pot))
    f_v = T.sub(T.sub(T.mul(lap_u, 0.5), v.d[2]), T.mul(u.value, pot))
    return f_u, f_v


def residual_values(s, x, y) -> Tuple[np.ndarray, np.ndarray]:
    """Residual from plain arrays (anything with u, v, u_t, ... attributes)."""
    pot = 0.5 * (np.asarray(x) ** 2 + np.asarray(y) ** 2)
    f_u = -s.u_t - 0.5 * (s.v_xx + s.v_yy) + pot * s.v
    f_v = -s.v_t + 0.5 * (s.u_xx + s.u_yy) - pot * s.u
    return f_u, f_v


def loss_L0(u: Variable, v: Variable, u_target, v_target) -> Variable:
    return T.add(T.mean(T.square(T.sub(u, u_target))), T.mean(T.square(T.sub(v, v_target))))


def loss_Lf(f_u: Variable, f_v: Variable) -> Variable:
    return T.add(T.mean(T.square(f_u)), T.mean(T.square(f_v)))


def slice_matrix(slice_ids: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """(n_slices, n) matrix mapping point densities to per-slice quadratures."""
    n_slices = int(slice_ids.max()) + 1
    M = np.zeros((n_slices, len(slice_ids)))
    M[slice_ids, np.arange(len(slice_ids))] = weights
    return M


def loss_Lb(u: Variable, v: Variable, quad: np.ndarray, form: str = "squared") -> Variable:
    """Normalization penalty averaged over time slices.

    ``quad`` is the (n_slices, n) quadrature matrix from :func:`slice_matrix`;
    Q_t = sum over the slice of w (u^2 + v^2).  ``squared`` returns
    mean (1 - Q_t)^2, ``printed`` mean (1 - Q_t^2) (unbounded below).
    """
    density = T.add(T.square(u), T.square(v))
    Q = T.matmul(quad, T.reshape(density, (-1, 1)))
    if form == "squared":
        return T.mean(T.square(T.sub(1.0, Q)))
    if form == "printed":
        return T.mean(T.sub(1.0, T.square(Q)))
    raise ValueError(f"Lb form must be one of {LB_FORMS}")


@dataclass
class LossBreakdown:
    L0: Variable
    Lb: Variable
    Lf: Variable
    LI: Optional[Variable]
    total: Variable
    alpha: float
    w_I: float

    def values(self) -> dict:
        return {
            "L0": self.L0.item(),
            "Lb": self.Lb.item(),
            "Lf": self.Lf.item(),
            "LI": 0.0 if self.LI is None else self.LI.item(),
            "total": self.total.item(),
        }


def total_loss(
    L0: Variable,
    Lf: Variable,
    Lb: Variable,
    alpha: float = 1.0,
    LI: Optional[Variable] = None,
    w_I: float = 0.0,
) -> LossBreakdown:
    """Compose the objective; ``LI`` must already include its weight."""
    for name, comp in (("L0", L0), ("Lf", Lf), ("Lb", Lb), ("LI", LI)):
        if comp is not None and not np.all(np.isfinite(comp.value)):
            raise NonFiniteLossError(name)
    total = T.add(T.add(T.mul(L0, alpha), Lf), Lb)
    if LI is not None:
        total = T.add(total, LI)
    return LossBreakdown(L0, Lb, Lf, LI, total, alpha, w_I)
