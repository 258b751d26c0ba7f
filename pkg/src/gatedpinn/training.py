"""Training loop: epoch-partitioned residual batches, Adam, per-step log."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .loss import NonFiniteLossError, slice_matrix
from .models import GatedPINN
from .network import AdamState, NonFiniteGradientError, adam_step
from .objective import Batch, LossConfig
from .parallel import GradientEngine
from .qho import TrainingSets

LOG_COLUMNS = ("step", "L0", "Lb", "Lf", "LI", "total", "wall_ms")


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 20000
    batch_size: int = 1000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    workers: int = 1


class Trainer:
    def __init__(
        self,
        model,
        sets: TrainingSets,
        loss_cfg: LossConfig = LossConfig(),
        train_cfg: TrainConfig = TrainConfig(),
        optimizer: Optional[AdamState] = None,
    ):
        self.model = model
        self.sets = sets
        self.loss_cfg = loss_cfg
        self.cfg = train_cfg
        self.params = {k: v.copy() for k, v in model.parameters().items()}
        self.opt = optimizer or AdamState.for_params(
            self.params, lr=train_cfg.lr, beta1=train_cfg.beta1, beta2=train_cfg.beta2, eps=train_cfg.eps
        )
        ss = np.random.SeedSequence(train_cfg.seed).spawn(2)
        self._batch_rng = np.random.default_rng(ss[0])
        self._noise_rng = np.random.default_rng(ss[1])
        self._quad = slice_matrix(sets.Tb_slice, sets.Tb_w)
        self._queue: List[np.ndarray] = []
        self.epoch = 0
        self.history: List[Dict[str, float]] = []

    def _next_rows(self) -> np.ndarray:
        if not self._queue:
            nf = len(self.sets.Tf)
            n_batches = max(1, nf // self.cfg.batch_size)
            perm = self._batch_rng.permutation(nf)
            self._queue = list(np.array_split(perm, n_batches))[::-1]
            self.epoch += 1
        return np.sort(self._queue.pop())

    def next_batch(self) -> Batch:
        batch = Batch.from_sets(self.sets, self._next_rows(), self._quad)
        if isinstance(self.model, GatedPINN) and self.model.config.noise:
            batch = batch.with_noise(self._noise_rng, self.model.config.n_experts)
        return batch

    def run(self, steps: Optional[int] = None, callback: Optional[Callable[[Dict[str, float]], None]] = None):
        steps = self.cfg.steps if steps is None else steps
        with GradientEngine(self.cfg.workers) as engine:
            for _ in range(steps):
                t0 = time.perf_counter()
                batch = self.next_batch()
                step = self.opt.step
                try:
                    values, grads = engine.gradient(self.model, self.params, batch, self.loss_cfg)
                    if not np.isfinite(values["total"]):
                        raise NonFiniteLossError("total", step)
                    self.params, self.opt = adam_step(self.params, grads, self.opt)
                except NonFiniteLossError as exc:
                    raise NonFiniteLossError(exc.component, step) from exc
                except NonFiniteGradientError as exc:
                    raise NonFiniteLossError(f"gradient ({exc})", step) from exc
                row = {"step": step, **values, "wall_ms": (time.perf_counter() - t0) * 1e3}
                row.setdefault("LI", 0.0)
                self.history.append(row)
                if callback is not None:
                    callback(row)
        return self.history

    def trained_model(self):
        return self.model.with_parameters(self.params)
