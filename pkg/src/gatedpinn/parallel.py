"""In-process data-parallel gradients and the speedup benchmark.

Each step forks W workers over contiguous shards of the residual batch,
every worker on its own tape, then joins and reduces the per-worker
gradients with a fixed pairwise tree in worker order.  The numpy/BLAS and
compiled kernels release the GIL, which is where the concurrency comes
from.
"""
from __future__ import annotations

import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from threadpoolctl import threadpool_limits

from .autodiff.tape import Tape
from .objective import Batch, LossConfig, objective


class WorkerError(RuntimeError):
    def __init__(self, worker: int, exc: BaseException):
        self.worker = worker
        super().__init__(f"worker {worker} failed: {type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class ParallelConfig:
    workers: int = 1
    base_seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("need at least one worker")


def shard_slices(n: int, workers: int) -> List[slice]:
    """Contiguous equal split; the remainder goes to the last shard."""
    if workers < 1:
        raise ValueError("need at least one worker")
    if n < workers:
        raise ValueError(f"batch of {n} points cannot feed {workers} workers")
    size = n // workers
    bounds = [w * size for w in range(workers)] + [n]
    return [slice(bounds[w], bounds[w + 1]) for w in range(workers)]


def tree_sum(items: Sequence[Dict[str, np.ndarray]]) -> Dict[str, np.ndarray]:
    """Pairwise reduction in worker order: ((g0 + g1) + (g2 + g3)) ..."""
    level = list(items)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            a, b = level[i], level[i + 1]
            nxt.append({k: a[k] + b[k] for k in a})
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def hardware_threads() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


class GradientEngine:
    """Fork-join gradient evaluation with W persistent workers and tapes."""

    def __init__(self, workers: int = 1):
        self.workers = ParallelConfig(workers).workers
        self.tapes = [Tape() for _ in range(self.workers)]
        self._pool = ThreadPoolExecutor(max_workers=self.workers) if self.workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def gradient(
        self, model, params: Dict[str, np.ndarray], batch: Batch, loss_cfg: LossConfig = LossConfig()
    ) -> Tuple[Dict[str, float], Dict[str, np.ndarray]]:
        if self.workers == 1:
            return objective(model, params, batch, loss_cfg, tape=self.tapes[0])
        n = len(batch.Tf)
        shards = shard_slices(n, self.workers)

        def job(w: int):
            rows = shards[w]
            weight = (rows.stop - rows.start) / n
            return objective(
                model, params, batch, loss_cfg, tape=self.tapes[w], rows=rows, lf_weight=weight, include_global=(w == 0)
            )

        with threadpool_limits(limits=1, user_api="blas"):
            futures = [self._pool.submit(job, w) for w in range(self.workers)]
            results = []
            for w, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    for other in futures[w + 1 :]:
                        other.cancel()
                    raise WorkerError(w, exc) from exc
        values = dict(results[0][0])
        for vals, _ in results[1:]:
            values["Lf"] += vals["Lf"]
            values["total"] += vals["Lf"]
        return values, tree_sum([g for _, g in results])


def parallel_gradient(model, params, batch: Batch, workers: int, loss_cfg: LossConfig = LossConfig()):
    """Averaged gradient over ``workers`` shards (one-shot convenience)."""
    with GradientEngine(workers) as engine:
        return engine.gradient(model, params, batch, loss_cfg)


@dataclass
class SpeedupRow:
    workers: int
    median_ms: float
    speedup: float
    hardware_threads: int


def speedup_benchmark(
    model,
    batch: Batch,
    worker_counts: Sequence[int] = (1, 2, 4),
    repeats: int = 5,
    loss_cfg: LossConfig = LossConfig(),
) -> List[SpeedupRow]:
    """Median wall time of one gradient per worker count; S(W) = t_1 / t_W."""
    params = model.parameters()
    counts = sorted(set(int(w) for w in worker_counts) | {1})
    hw = hardware_threads()
    medians = {}
    with threadpool_limits(limits=1, user_api="blas"):
        for W in counts:
            with GradientEngine(W) as engine:
                engine.gradient(model, params, batch, loss_cfg)  # warm-up
                times = []
                for _ in range(max(5, repeats)):
                    t0 = time.perf_counter()
                    engine.gradient(model, params, batch, loss_cfg)
                    times.append(time.perf_counter() - t0)
            medians[W] = statistics.median(times) * 1e3
    t1 = medians[1]
    return [SpeedupRow(W, medians[W], t1 / medians[W], hw) for W in counts if W in set(worker_counts) | {1}]
