import numpy as np
import pytest
from scipy.special import eval_hermite, factorial

from gatedpinn.loss import residual_values
from gatedpinn.qho import (
    QhoConfig, analytic_psi, boundary_magnitude, eigenstate, energy_expectation, grid,
    hermite_function, hermite_functions, sample_sets, time_slices,
)

from oracles import hermite_physicists

CFG = QhoConfig()


def _hermite_ref(n, x):
    # h_n = (2^n n! sqrt(pi))^{-1/2} H_n(x) e^{-x^2/2}
    return eval_hermite(n, x) * np.exp(-x * x / 2) / np.sqrt(2.0**n * factorial(n) * np.sqrt(np.pi))


@pytest.mark.parametrize("n", range(4))
def test_hermite_functions_match_scipy_and_recurrence(n):
    x = np.linspace(-6, 6, 101)
    h, dh, d2h = hermite_function(n, x)
    assert np.allclose(h, _hermite_ref(n, x), atol=1e-15)
    norm = np.sqrt(2.0**n * factorial(n) * np.sqrt(np.pi))
    assert np.allclose(h, hermite_physicists(n, x) * np.exp(-x * x / 2) / norm, atol=1e-15)
    # derivatives against central differences of the reference
    eps = 1e-5
    fd1 = (_hermite_ref(n, x + eps) - _hermite_ref(n, x - eps)) / (2 * eps)
    fd2 = (_hermite_ref(n, x + 1e-3) - 2 * _hermite_ref(n, x) + _hermite_ref(n, x - 1e-3)) / 1e-6
    assert np.allclose(dh, fd1, atol=1e-9)
    assert np.allclose(d2h, fd2, atol=1e-6)


def test_ground_state_value_at_origin():
    assert eigenstate(0, 0, 0.0, 0.0) == pytest.approx(np.pi**-0.5, abs=1e-15)
    assert eigenstate(0, 0, 0.0, 0.0) == pytest.approx(0.564190, abs=1e-6)


def test_odd_eigenstate_vanishes_on_axis():
    y = np.linspace(-4, 4, 17)
    assert np.all(eigenstate(1, 0, np.zeros_like(y), y) == 0.0)


@pytest.mark.parametrize("nx, ny", [(0, 0), (1, 0), (2, 1), (3, 3)])
def test_eigenstates_are_orthonormal(nx, ny):
    xs, w = np.polynomial.legendre.leggauss(200)
    xs, w = 8 * xs, 8 * w
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    W = np.outer(w, w)
    phi = eigenstate(nx, ny, X, Y)
    assert abs(np.sum(W * phi * phi) - 1.0) < 1e-8
    for mx, my in [(0, 0), (1, 0), (2, 1), (3, 3)]:
        if (mx, my) != (nx, ny):
            assert abs(np.sum(W * phi * eigenstate(mx, my, X, Y))) < 1e-12


def test_unsupported_order_rejected():
    with pytest.raises(ValueError):
        hermite_function(4, 0.0)
    with pytest.raises(ValueError):
        QhoConfig(states=((5, 0, 1.0),))


def test_coefficients_must_be_normalized():
    with pytest.raises(ValueError):
        QhoConfig(states=((0, 0, 1.0), (1, 0, 1.0)))


def test_default_state_at_origin():
    s = analytic_psi(CFG, 0.0, 0.0, 0.0)
    assert s.u == pytest.approx(np.pi**-0.5 / np.sqrt(3), abs=1e-15)
    assert s.u == pytest.approx(0.325735, abs=1e-6)
    assert s.v == 0.0


def test_residual_of_oracle_vanishes():
    rng = np.random.default_rng(0)
    x, y = rng.uniform(-5, 5, (2, 10_000))
    t = rng.uniform(0, np.pi, 10_000)
    s = analytic_psi(CFG, x, y, t)
    f_u, f_v = residual_values(s, x, y)
    assert max(np.abs(f_u).max(), np.abs(f_v).max()) < 1e-10


def test_ground_state_residual():
    cfg = QhoConfig(states=((0, 0, 1.0),))
    x, y = np.meshgrid(np.linspace(-3, 3, 7), np.linspace(-3, 3, 7))
    s = analytic_psi(cfg, x, y, 0.7)
    # psi = pi^{-1/2} exp(-(x^2+y^2)/2) exp(-i t)
    ref = np.pi**-0.5 * np.exp(-(x * x + y * y) / 2) * np.exp(-0.7j)
    assert np.allclose(s.psi, ref, atol=1e-15)
    f_u, f_v = residual_values(s, x, y)
    assert np.abs(f_u).max() < 1e-12 and np.abs(f_v).max() < 1e-12


def test_analytic_derivatives_match_finite_differences():
    rng = np.random.default_rng(1)
    x, y, t = rng.uniform(-2, 2, 20), rng.uniform(-2, 2, 20), rng.uniform(0, 3, 20)
    s = analytic_psi(CFG, x, y, t)
    h = 1e-5
    fx = lambda dx: analytic_psi(CFG, x + dx, y, t)
    ft = lambda dt: analytic_psi(CFG, x, y, t + dt)
    assert np.allclose(s.u_x, (fx(h).u - fx(-h).u) / (2 * h), atol=1e-9)
    assert np.allclose(s.v_t, (ft(h).v - ft(-h).v) / (2 * h), atol=1e-9)
    H = 1e-3
    assert np.allclose(s.v_xx, (fx(H).v - 2 * s.v + fx(-H).v) / H**2, atol=1e-6)


def test_exact_periodicity():
    x, y = np.meshgrid(np.linspace(-3, 3, 9), np.linspace(-3, 3, 9))
    a = analytic_psi(CFG, x, y, 0.4).psi
    b = analytic_psi(CFG, x, y, 0.4 + 2 * np.pi).psi
    assert np.allclose(a, b, atol=1e-13)


def test_norm_is_one_at_all_times():
    x, y, cell = grid(CFG, 256)
    for t in np.linspace(0, np.pi, 5):
        s = analytic_psi(CFG, x, y, t)
        assert abs(cell * np.sum(s.u**2 + s.v**2) - 1.0) < 1e-9


def test_energy_expectation_is_conserved():
    for t in (0.0, 0.5, 1.7, 3.0):
        assert energy_expectation(CFG, t) == pytest.approx(5.0 / 3.0, abs=1e-6)
    assert CFG.energy == pytest.approx(5.0 / 3.0)


def test_density_closed_form_and_swap_symmetry():
    # the default state is (g / sqrt 3) e^{-it} (1 + sqrt2 (x + y) e^{-it}) with g the ground state,
    # so |psi|^2 = g^2/3 (1 + 2 sqrt2 s cos t + 2 s^2), s = x + y
    rng = np.random.default_rng(2)
    x, y, t = rng.uniform(-3, 3, 50), rng.uniform(-3, 3, 50), rng.uniform(0, 6, 50)
    s = analytic_psi(CFG, x, y, t)
    g2 = np.exp(-(x * x + y * y)) / np.pi
    ssum = x + y
    dens = g2 / 3 * (1 + 2 * np.sqrt(2) * ssum * np.cos(t) + 2 * ssum**2)
    assert np.allclose(s.u**2 + s.v**2, dens, atol=1e-14)
    swapped = analytic_psi(CFG, y, x, t)
    assert np.allclose(swapped.psi, s.psi, atol=1e-15)


def test_boundary_magnitude_small():
    assert boundary_magnitude(CFG) < 1e-5


def test_sampler_counts_domain_and_determinism():
    a = sample_sets(CFG, (100, 50, 1000), seed=3)
    b = sample_sets(CFG, (100, 50, 1000), seed=3)
    assert a.sizes == (100, 50, 1000)
    for name in ("T0", "Tb", "Tf", "T0_u", "Tb_w"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    for P in (a.T0, a.Tb, a.Tf):
        assert np.all(P[:, :2] >= -5) and np.all(P[:, :2] <= 5)
        assert np.all(P[:, 2] >= 0) and np.all(P[:, 2] <= np.pi)
    assert np.all(a.T0[:, 2] == 0.0)
    ex = analytic_psi(CFG, a.T0[:, 0], a.T0[:, 1], 0.0)
    assert np.array_equal(a.T0_u, ex.u)
    # quadrature weights: each slice integrates the constant 1 to the area
    for j in range(a.n_slices):
        assert np.sum(a.Tb_w[a.Tb_slice == j]) == pytest.approx(CFG.area)
    assert not np.array_equal(sample_sets(CFG, (100, 50, 1000), seed=4).Tf, a.Tf)


def test_residual_points_are_uniform():
    s = sample_sets(CFG, (10, 10, 20000), seed=5)
    sigma = 10 / np.sqrt(12)
    assert abs(s.Tf[:, 0].mean()) < 3 * sigma / np.sqrt(20000)


def test_time_slices_cover_interval():
    ts = time_slices(CFG, 10)
    assert ts[0] == 0.0 and ts[-1] == pytest.approx(np.pi) and len(ts) == 10
