"""Closed-form 2D quantum harmonic oscillator and training-set samplers.

Units are hbar = m = omega = 1, so the PDE is
``i psi_t = -1/2 (psi_xx + psi_yy) + 1/2 (x^2 + y^2) psi``
and eigenstate ``(n_x, n_y)`` has energy ``n_x + n_y + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

MAX_ORDER = 3


@dataclass(frozen=True)
class QhoConfig:
    x_min: float = -5.0
    x_max: float = 5.0
    y_min: float = -5.0
    y_max: float = 5.0
    t_max: float = float(np.pi)
    # (n_x, n_y, coefficient); default: equal-weight (0,0) + (1,0) + (0,1)
    states: Tuple[Tuple[int, int, complex], ...] = field(
        default=((0, 0, 1 / np.sqrt(3)), (1, 0, 1 / np.sqrt(3)), (0, 1, 1 / np.sqrt(3)))
    )

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("empty spatial domain")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        for nx, ny, _ in self.states:
            _check_order(nx)
            _check_order(ny)
        norm = sum(abs(complex(c)) ** 2 for *_, c in self.states)
        if self.states and abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state coefficients must satisfy sum |c|^2 = 1, got {norm!r}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, 0.0])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.x_max, self.y_max, self.t_max])

    @property
    def energy(self) -> float:
        """<psi|H|psi> of the configured superposition."""
        return float(sum(abs(complex(c)) ** 2 * (nx + ny + 1) for nx, ny, c in self.states))


def _check_order(n: int) -> None:
    if not (isinstance(n, (int, np.integer)) and 0 <= n <= MAX_ORDER):
        raise ValueError(f"eigenstate order must be an integer in 0..{MAX_ORDER}, got {n!r}")


def hermite_functions(n_max: int, x) -> np.ndarray:
    """Normalized Hermite-Gaussians h_0..h_{n_max} at ``x``, stacked on axis 0."""
    x = np.asarray(x, dtype=np.float64)
    h = np.empty((n_max + 1,) + x.shape)
    h[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        h[1] = np.sqrt(2.0) * x * h[0]
    for n in range(1, n_max):
        h[n + 1] = np.sqrt(2.0 / (n + 1)) * x * h[n] - np.sqrt(n / (n + 1)) * h[n - 1]
    return h


def hermite_function(n: int, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """h_n and its first and second derivatives."""
    _check_order(n)
    x = np.asarray(x, dtype=np.float64)
    h = hermite_functions(n + 1, x)
    dh = -np.sqrt((n + 1) / 2.0) * h[n + 1]
    if n > 0:
        dh = dh + np.sqrt(n / 2.0) * h[n - 1]
    d2h = (x * x - (2 * n + 1)) * h[n]
    return h[n], dh, d2h


def eigenstate(n_x: int, n_y: int, x, y) -> np.ndarray:
    hx, _, _ = hermite_function(n_x, x)
    hy, _, _ = hermite_function(n_y, y)
    return hx * hy


@dataclass
class ExactState:
    """Closed-form psi = u + i v and the derivatives the residual uses."""

    u: np.ndarray
    v: np.ndarray
    u_x: np.ndarray
    v_x: np.ndarray
    u_y: np.ndarray
    v_y: np.ndarray
    u_t: np.ndarray
    v_t: np.ndarray
    u_xx: np.ndarray
    v_xx: np.ndarray
    u_yy: np.ndarray
    v_yy: np.ndarray

    @property
    def psi(self) -> np.ndarray:
        return self.u + 1j * self.v


def analytic_psi(config: QhoConfig, x, y, t) -> ExactState:
    x, y, t = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (x, y, t)))
    zero = np.zeros(x.shape, dtype=np.complex128)
    psi, px, py, pt, pxx, pyy = (zero.copy() for _ in range(6))
    for nx, ny, c in config.states:
        hx, dhx, d2hx = hermite_function(nx, x)
        hy, dhy, d2hy = hermite_function(ny, y)
        energy = nx + ny + 1
        phase = complex(c) * np.exp(-1j * energy * t)
        psi += phase * hx * hy
        px += phase * dhx * hy
        py += phase * hx * dhy
        pt += -1j * energy * phase * hx * hy
        pxx += phase * d2hx * hy
        pyy += phase * hx * d2hy
    return ExactState(
        psi.real, psi.imag, px.real, px.imag, py.real, py.imag,
        pt.real, pt.imag, pxx.real, pxx.imag, pyy.real, pyy.imag,
    )


def boundary_magnitude(config: QhoConfig, n: int = 2001) -> float:
    """max |psi| over the spatial boundary; |psi| is time-independent only
    for single eigenstates, so take the worst case over the triangle bound
    sum |c_j| |phi_j|."""
    s = np.linspace(0.0, 1.0, n)
    xs = config.x_min + s * (config.x_max - config.x_min)
    ys = config.y_min + s * (config.y_max - config.y_min)
    edges = [
        (xs, np.full(n, config.y_min)),
        (xs, np.full(n, config.y_max)),
        (np.full(n, config.x_min), ys),
        (np.full(n, config.x_max), ys),
    ]
    worst = 0.0
    for ex, ey in edges:
        mag = sum(abs(complex(c)) * np.abs(eigenstate(nx, ny, ex, ey)) for nx, ny, c in config.states)
        worst = max(worst, float(np.max(mag)))
    return worst


def energy_expectation(config: QhoConfig, t: float, n: int = 256) -> float:
    """<psi|H|psi> at time ``t`` by midpoint quadrature on an n x n grid."""
    dx = (config.x_max - config.x_min) / n
    dy = (config.y_max - config.y_min) / n
    xs = config.x_min + (np.arange(n) + 0.5) * dx
    ys = config.y_min + (np.arange(n) + 0.5) * dy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    s = analytic_psi(config, X, Y, t)
    psi = s.psi
    lap = (s.u_xx + s.u_yy) + 1j * (s.v_xx + s.v_yy)
    h_psi = -0.5 * lap + 0.5 * (X * X + Y * Y) * psi
    return float(np.real(np.sum(np.conj(psi) * h_psi)) * dx * dy)


# ---------------------------------------------------------------------------
# training sets


@dataclass
class TrainingSets:
    """Initial, normalization ("boundary") and residual point sets.

    ``Tb`` points come in equal-sized time slices; ``Tb_w`` are the
    per-point quadrature weights (lattice cell area, zero for filler
    points) and ``Tb_slice`` the slice index of each point.
    """

    T0: np.ndarray  # (n0, 3) points at t = 0
    T0_u: np.ndarray
    T0_v: np.ndarray
    Tb: np.ndarray  # (nb, 3)
    Tb_w: np.ndarray
    Tb_slice: np.ndarray
    Tf: np.ndarray  # (nf, 3)

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return len(self.T0), len(self.Tb), len(self.Tf)

    @property
    def n_slices(self) -> int:
        return int(self.Tb_slice.max()) + 1


def _uniform_space(rng: np.random.Generator, config: QhoConfig, n: int) -> np.ndarray:
    lo = np.array([config.x_min, config.y_min])
    hi = np.array([config.x_max, config.y_max])
    return lo + (hi - lo) * rng.random((n, 2))


def _shifted_lattice(rng: np.random.Generator, config: QhoConfig, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Randomly shifted nx x ny midpoint lattice plus zero-weight filler.

    The lattice rule is spectrally accurate for the rapidly decaying
    integrand |psi|^2 (14 x 14 points already integrate the default state
    to ~1e-7), where plain Monte Carlo at a few hundred points is off by
    several percent.  The ``count - nx*ny < nx`` leftover points are drawn
    uniformly and carry weight zero so the set keeps its requested size.
    """
    nx = max(1, int(np.sqrt(count)))
    ny = count // nx
    hx = (config.x_max - config.x_min) / nx
    hy = (config.y_max - config.y_min) / ny
    shift = rng.random(2)
    xs = config.x_min + (np.arange(nx) + shift[0]) * hx
    ys = config.y_min + (np.arange(ny) + shift[1]) * hy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    rest = count - nx * ny
    xy = np.concatenate([np.column_stack([X.ravel(), Y.ravel()]), _uniform_space(rng, config, rest)])
    w = np.concatenate([np.full(nx * ny, hx * hy), np.zeros(rest)])
    return xy, w


def sample_sets(
    config: QhoConfig,
    sizes: Sequence[int],
    seed: int,
    n_tb_times: int = 5,
) -> TrainingSets:
    """Draw T0 (t = 0, labelled), Tb (shifted lattice per time of a fixed
    time grid) and Tf (uniform space-time)."""
    n0, nb, nf = (int(s) for s in sizes)
    if min(n0, nb, nf) <= 0:
        raise ValueError(f"set sizes must be positive, got {tuple(sizes)}")
    n_tb_times = max(1, min(int(n_tb_times), nb))
    ss = np.random.SeedSequence(seed)
    s0, sb, sf = ss.spawn(3)

    rng0 = np.random.default_rng(s0)
    xy0 = _uniform_space(rng0, config, n0)
    T0 = np.column_stack([xy0, np.zeros(n0)])
    ex = analytic_psi(config, xy0[:, 0], xy0[:, 1], 0.0)

    times = np.linspace(0.0, config.t_max, n_tb_times)
    counts = np.full(n_tb_times, nb // n_tb_times)
    counts[: nb % n_tb_times] += 1
    rngb = np.random.default_rng(sb)
    blocks, weights, slices = [], [], []
    for j, (tj, cj) in enumerate(zip(times, counts)):
        xy, w = _shifted_lattice(rngb, config, int(cj))
        blocks.append(np.column_stack([xy, np.full(cj, tj)]))
        weights.append(w)
        slices.append(np.full(cj, j, dtype=np.intp))

    rngf = np.random.default_rng(sf)
    lo, hi = config.lower, config.upper
    Tf = lo + (hi - lo) * rngf.random((nf, 3))

    return TrainingSets(
        T0=T0,
        T0_u=ex.u,
        T0_v=ex.v,
        Tb=np.concatenate(blocks),
        Tb_w=np.concatenate(weights),
        Tb_slice=np.concatenate(slices),
        Tf=Tf,
    )


def grid(config: QhoConfig, n: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """Uniform n x n cell-centre grid; returns flattened x, y and cell area."""
    dx = (config.x_max - config.x_min) / n
    dy = (config.y_max - config.y_min) / n
    xs = config.x_min + (np.arange(n) + 0.5) * dx
    ys = config.y_min + (np.arange(n) + 0.5) * dy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return X.ravel(), Y.ravel(), dx * dy


def time_slices(config: QhoConfig, n: int) -> np.ndarray:
    return np.linspace(0.0, config.t_max, n)
