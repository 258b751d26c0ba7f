"""One evaluation of the training objective and its parameter gradient."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from . import gating as gt
from .autodiff import tape as T
from .autodiff.stack import PINN_LAYOUT, VALUES_ONLY
from .autodiff.tape import Tape
from .loss import LossBreakdown, loss_L0, loss_Lb, loss_Lf, residual, slice_matrix, total_loss
from .models import GatedPINN
from .qho import TrainingSets


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 1.0
    lb_form: str = "squared"


@dataclass
class Batch:
    """Everything one optimizer step consumes.

    ``noise_*`` are standard-normal gate draws of shape (n, N), or None
    (dense model, or noise disabled).
    """

    T0: np.ndarray
    T0_u: np.ndarray
    T0_v: np.ndarray
    Tb: np.ndarray
    Tb_quad: np.ndarray
    Tf: np.ndarray
    noise0: Optional[np.ndarray] = None
    noiseb: Optional[np.ndarray] = None
    noisef: Optional[np.ndarray] = None

    @classmethod
    def from_sets(cls, sets: TrainingSets, rows: Optional[np.ndarray] = None, quad: Optional[np.ndarray] = None) -> "Batch":
        Tf = sets.Tf if rows is None else sets.Tf[rows]
        quad = slice_matrix(sets.Tb_slice, sets.Tb_w) if quad is None else quad
        return cls(sets.T0, sets.T0_u, sets.T0_v, sets.Tb, quad, Tf)

    def with_noise(self, rng: np.random.Generator, n_experts: int) -> "Batch":
        return Batch(
            self.T0, self.T0_u, self.T0_v, self.Tb, self.Tb_quad, self.Tf,
            rng.standard_normal((len(self.T0), n_experts)),
            rng.standard_normal((len(self.Tb), n_experts)),
            rng.standard_normal((len(self.Tf), n_experts)),
        )


def _slice(a, rows):
    return None if a is None else a[rows]


def objective(
    model,
    params: Dict[str, np.ndarray],
    batch: Batch,
    loss_cfg: LossConfig = LossConfig(),
    tape: Optional[Tape] = None,
    rows: Optional[slice] = None,
    lf_weight: float = 1.0,
    include_global: bool = True,
) -> Tuple[Dict[str, float], Dict[str, np.ndarray]]:
    """Return (component values, gradient) of the objective at ``params``.

    With the defaults this is the full loss on ``batch``.  A data-parallel
    worker passes its residual ``rows`` with ``lf_weight = |rows| / |Tf|``
    and exactly one worker sets ``include_global`` (the initial-condition,
    normalization and importance terms); the sum of all worker objectives
    is then the full loss.
    """
    tape = tape if tape is not None else Tape()
    tape.reset()
    model = model.with_parameters(params)
    bound = model.bind(tape)
    gated = isinstance(model, GatedPINN)

    Xf = batch.Tf if rows is None else batch.Tf[rows]
    noisef = batch.noisef if rows is None else _slice(batch.noisef, rows)
    pf = model.predict(tape, Xf, PINN_LAYOUT, noisef, bound=bound)
    f_u, f_v = residual(pf.u, pf.v, Xf[:, 0], Xf[:, 1])
    Lf = loss_Lf(f_u, f_v)

    if not include_global:
        J = T.mul(Lf, lf_weight)
        return {"Lf": Lf.item() * lf_weight}, tape.backward(J)

    p0 = model.predict(tape, batch.T0, VALUES_ONLY, batch.noise0, bound=bound)
    L0 = loss_L0(p0.u.value, p0.v.value, batch.T0_u, batch.T0_v)
    pb = model.predict(tape, batch.Tb, VALUES_ONLY, batch.noiseb, bound=bound)
    Lb = loss_Lb(pb.u.value, pb.v.value, batch.Tb_quad, loss_cfg.lb_form)
    LI = None
    if gated and model.config.w_I > 0:
        H = gt.gate_logits_tape(bound.gate, tape, batch.Tf, batch.noisef, VALUES_ONLY)
        LI = gt.importance_loss_tape(H.value, model.config.w_I)
    parts: LossBreakdown = total_loss(L0, T.mul(Lf, lf_weight), Lb, loss_cfg.alpha, LI, model.config.w_I if gated else 0.0)
    return parts.values(), tape.backward(parts.total)
