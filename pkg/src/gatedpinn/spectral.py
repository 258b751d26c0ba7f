"""Split-step Fourier reference solver for the 2D harmonic oscillator.

Strang splitting on a periodic grid:

    psi <- e^{-i V dt/2} F^{-1} e^{-i |k|^2 dt/2} F e^{-i V dt/2} psi

with V = (x^2 + y^2)/2.  Every factor is unitary, so the discrete norm is
conserved up to rounding.

The periodic box defaults to [-8, 8]^2, wider than the training domain:
on [-5, 5]^2 the state is still ~1e-5 at the edge and the wrap-around
leaves an error floor of that size, which would hide the O(dt^2)
splitting error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .qho import QhoConfig, analytic_psi


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    nx: int = 128
    ny: int = 128
    dt: float = 1e-3
    # box [-half_width, half_width]^2; None uses the configured domain itself
    half_width: Optional[float] = 8.0

    def __post_init__(self):
        if not (_is_pow2(self.nx) and _is_pow2(self.ny)):
            raise ValueError(f"grid sizes must be powers of two, got {self.nx} x {self.ny}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.half_width is not None and not self.half_width > 0:
            raise ValueError("half_width must be positive")

    def box(self, config: QhoConfig) -> Tuple[float, float, float, float]:
        if self.half_width is None:
            return config.x_min, config.x_max, config.y_min, config.y_max
        L = float(self.half_width)
        if min(config.x_min, config.y_min) < -L or max(config.x_max, config.y_max) > L:
            raise ValueError(f"spectral box [-{L}, {L}]^2 does not cover the domain")
        return -L, L, -L, L


class SpectralGrid:
    """Complex field on a periodic grid plus the precomputed phase factors."""

    def __init__(self, config: QhoConfig, spec: GridSpec, psi: np.ndarray, t: float = 0.0):
        self.config = config
        self.spec = spec
        x0, x1, y0, y1 = spec.box(config)
        self.dx = (x1 - x0) / spec.nx
        self.dy = (y1 - y0) / spec.ny
        self.x = x0 + np.arange(spec.nx) * self.dx
        self.y = y0 + np.arange(spec.ny) * self.dy
        self.X, self.Y = np.meshgrid(self.x, self.y, indexing="ij")
        kx = 2 * np.pi * np.fft.fftfreq(spec.nx, d=self.dx)
        ky = 2 * np.pi * np.fft.fftfreq(spec.ny, d=self.dy)
        KX, KY = np.meshgrid(kx, ky, indexing="ij")
        V = 0.5 * (self.X**2 + self.Y**2)
        self._half_potential = np.exp(-0.5j * V * spec.dt)
        self._kinetic = np.exp(-0.5j * (KX**2 + KY**2) * spec.dt)
        self.psi = np.asarray(psi, dtype=np.complex128).reshape(spec.nx, spec.ny)
        self.t = float(t)
        self.steps = 0

    def norm(self) -> float:
        """Discrete integral of |psi|^2."""
        return float(np.sum(np.abs(self.psi) ** 2) * self.dx * self.dy)

    def step(self, n: int = 1) -> "SpectralGrid":
        hp, kin = self._half_potential, self._kinetic
        psi = self.psi
        for _ in range(n):
            psi = hp * np.fft.ifft2(kin * np.fft.fft2(hp * psi))
        self.psi = psi
        self.steps += n
        self.t = self.steps * self.spec.dt
        return self

    def exact(self) -> np.ndarray:
        s = analytic_psi(self.config, self.X, self.Y, self.t)
        return s.psi


def init_from_oracle(config: QhoConfig, spec: GridSpec = GridSpec()) -> SpectralGrid:
    g = SpectralGrid(config, spec, np.zeros((spec.nx, spec.ny), dtype=np.complex128))
    g.psi = analytic_psi(config, g.X, g.Y, 0.0).psi
    return g


def solve(config: QhoConfig, spec: GridSpec, times: Sequence[float]) -> List[Tuple[float, np.ndarray]]:
    """Snapshots at the requested times, each rounded to the nearest step.

    Returns ``(actual_time, psi)`` pairs in nondecreasing time order.
    """
    times = sorted(float(t) for t in times)
    if times and times[0] < 0:
        raise ValueError("output times must be non-negative")
    g = init_from_oracle(config, spec)
    out = []
    for t in times:
        target = int(round(t / spec.dt))
        if target > g.steps:
            g.step(target - g.steps)
        out.append((g.t, g.psi.copy()))
    return out
