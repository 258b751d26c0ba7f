"""Error metrics against the analytic solution."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from .csvio import write_csv
from .qho import QhoConfig, analytic_psi, grid, time_slices

REPORT_COLUMNS = ("t", "err_inf_real", "err_inf_imag", "err_rel_pct")
AGGREGATES = ("mean", "std", "min", "max")


def _component(field, component: str) -> np.ndarray:
    a = np.asarray(field)
    if np.iscomplexobj(a):
        if component == "real":
            return a.real
        if component == "imag":
            return a.imag
        raise ValueError(f"component must be 'real' or 'imag', got {component!r}")
    if component not in ("real", "imag"):
        raise ValueError(f"component must be 'real' or 'imag', got {component!r}")
    return a


def err_infinity(predicted, exact, component: str = "real") -> float:
    """max |pred - exact| over the samples of one component.

    Complex inputs are split into the requested component; real inputs are
    taken to already be that component.
    """
    p = _component(predicted, component).ravel()
    e = _component(exact, component).ravel()
    if p.shape != e.shape:
        raise ValueError(f"sample count mismatch: {p.size} predicted vs {e.size} exact")
    if p.size == 0:
        return 0.0
    return float(np.max(np.abs(p - e)))


def err_relative_norm(u, v, weights) -> float:
    """|1 - Q| * 100 with Q the weighted sum of u^2 + v^2."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64), u.shape)
    if u.shape != v.shape:
        raise ValueError("u and v sample counts differ")
    Q = float(np.sum(w * (u * u + v * v)))
    return abs(1.0 - Q) * 100.0


@dataclass
class SliceErrorReport:
    t: np.ndarray
    err_inf_real: np.ndarray
    err_inf_imag: np.ndarray
    err_rel_pct: np.ndarray

    def __post_init__(self):
        for name in REPORT_COLUMNS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def aggregate(self, stat: str) -> dict:
        fn = {"mean": np.mean, "std": np.std, "min": np.min, "max": np.max}[stat]
        return {c: float(fn(self.column(c))) for c in REPORT_COLUMNS[1:]}

    @property
    def mean_real(self) -> float:
        return float(np.mean(self.err_inf_real))

    @property
    def mean_imag(self) -> float:
        return float(np.mean(self.err_inf_imag))

    @property
    def mean_rel(self) -> float:
        return float(np.mean(self.err_rel_pct))

    def rows(self) -> List[list]:
        out = [[t, a, b, c] for t, a, b, c in zip(self.t, self.err_inf_real, self.err_inf_imag, self.err_rel_pct)]
        for stat in AGGREGATES:
            agg = self.aggregate(stat)
            out.append([f"aggregate_{stat}"] + [agg[c] for c in REPORT_COLUMNS[1:]])
        return out

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, REPORT_COLUMNS, self.rows())


def time_series_report(
    model,
    config: QhoConfig,
    n_grid: int = 256,
    times: Optional[Sequence[float]] = None,
    n_slices: int = 20,
    snapshot=None,
) -> SliceErrorReport:
    """Per-slice err_inf / err_rel of ``model.evaluate`` on a uniform grid.

    ``snapshot(t, x, y, u, v)`` is called per slice when given (field export).
    """
    times = time_slices(config, n_slices) if times is None else np.asarray(times, dtype=np.float64)
    x, y, cell = grid(config, n_grid)
    er, ei, rel = [], [], []
    for t in times:
        s = analytic_psi(config, x, y, t)
        u, v = model.evaluate(np.column_stack([x, y, np.full_like(x, t)]))
        er.append(err_infinity(u, s.u, "real"))
        ei.append(err_infinity(v, s.v, "imag"))
        rel.append(err_relative_norm(u, v, cell))
        if snapshot is not None:
            snapshot(float(t), x, y, u, v)
    return SliceErrorReport(np.asarray(times), er, ei, rel)
