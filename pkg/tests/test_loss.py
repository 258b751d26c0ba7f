import numpy as np
import pytest

from gatedpinn.autodiff import PINN_LAYOUT, VALUES_ONLY, Tape
from gatedpinn.autodiff import hyperdual as hd
from gatedpinn.autodiff import tape as T
from gatedpinn.loss import (
    NonFiniteLossError, loss_L0, loss_Lb, loss_Lf, residual, slice_matrix, total_loss,
)
from gatedpinn.models import BaselinePINN
from gatedpinn.objective import Batch, LossConfig, objective
from gatedpinn.qho import QhoConfig, analytic_psi, sample_sets

from oracles import mlp_jets, numeric_grad, rel_err, residual_np

CFG = QhoConfig()


def test_zero_field_residual_is_zero():
    tape = Tape()
    z = hd.HyperDual(tape.constant(np.zeros(4)), [tape.constant(np.zeros(4))] * 3, [tape.constant(np.zeros(4))] * 2, frozenset({0, 1}))
    f_u, f_v = residual(z, z, np.ones(4), np.ones(4))
    assert np.all(f_u.value == 0) and np.all(f_v.value == 0)


def _exact_hd(tape, s):
    c = tape.constant
    u = hd.HyperDual(c(s.u), [c(s.u_x), c(s.u_y), c(s.u_t)], [c(s.u_xx), c(s.u_yy)], frozenset({0, 1}))
    v = hd.HyperDual(c(s.v), [c(s.v_x), c(s.v_y), c(s.v_t)], [c(s.v_xx), c(s.v_yy)], frozenset({0, 1}))
    return u, v


def test_oracle_minimizes_every_component():
    sets = sample_sets(CFG, (2000, 1000, 5000), seed=0)
    tape = Tape()
    ef = analytic_psi(CFG, *sets.Tf.T)
    u, v = _exact_hd(tape, ef)
    Lf = loss_Lf(*residual(u, v, sets.Tf[:, 0], sets.Tf[:, 1]))
    e0 = analytic_psi(CFG, *sets.T0.T)
    L0 = loss_L0(tape.constant(e0.u), tape.constant(e0.v), sets.T0_u, sets.T0_v)
    eb = analytic_psi(CFG, *sets.Tb.T)
    Lb = loss_Lb(tape.constant(eb.u), tape.constant(eb.v), slice_matrix(sets.Tb_slice, sets.Tb_w))
    assert Lf.item() < 1e-12
    assert L0.item() == 0.0
    assert Lb.item() < 1e-6


def test_L0_constant_offset():
    tape = Tape()
    u = tape.constant(np.full(5, 1.25))
    v = tape.constant(np.zeros(5))
    assert loss_L0(u, v, np.ones(5), np.zeros(5)).item() == pytest.approx(0.0625)


def test_L0_matches_loop():
    rng = np.random.default_rng(0)
    a, b, c, d = rng.standard_normal((4, 7))
    tape = Tape()
    ref = sum((a[i] - c[i]) ** 2 for i in range(7)) / 7 + sum((b[i] - d[i]) ** 2 for i in range(7)) / 7
    assert loss_L0(tape.constant(a), tape.constant(b), c, d).item() == pytest.approx(ref, rel=1e-15)


def test_Lf_constant_residual():
    tape = Tape()
    assert loss_Lf(tape.constant(np.full(9, 3.0)), tape.constant(np.zeros(9))).item() == 9.0


def test_Lb_forms():
    tape = Tape()
    ids = np.array([0, 0, 1, 1])
    w = np.full(4, 0.5)
    quad = slice_matrix(ids, w)
    one = tape.constant(np.ones(4))
    zero = tape.constant(np.zeros(4))
    assert loss_Lb(one, zero, quad).item() == 0.0  # Q = 1 in each slice
    assert loss_Lb(zero, zero, quad).item() == 1.0
    two = tape.constant(np.full(4, np.sqrt(2)))
    assert loss_Lb(two, zero, quad, "squared").item() == pytest.approx(1.0)
    assert loss_Lb(two, zero, quad, "printed").item() == pytest.approx(-3.0)
    with pytest.raises(ValueError):
        loss_Lb(one, zero, quad, "cubic")


def test_Lb_of_oracle_monte_carlo():
    nb = 10_000
    rng = np.random.default_rng(3)
    xy = rng.uniform(-5, 5, (nb, 2))
    s = analytic_psi(CFG, xy[:, 0], xy[:, 1], 0.0)
    tape = Tape()
    quad = slice_matrix(np.zeros(nb, dtype=np.intp), np.full(nb, CFG.area / nb))
    assert abs(loss_Lb(tape.constant(s.u), tape.constant(s.v), quad).item()) < 1e-3


def test_total_composition_and_nan_guard():
    tape = Tape()
    L0, Lf, Lb, LI = (tape.constant(np.array(x)) for x in (0.5, 0.25, 0.125, 0.0625))
    parts = total_loss(L0, Lf, Lb, alpha=2.0, LI=LI, w_I=0.1)
    assert parts.total.item() == 2 * 0.5 + 0.25 + 0.125 + 0.0625
    zero = tape.constant(np.array(0.0))
    assert total_loss(zero, zero, zero).total.item() == 0.0
    with pytest.raises(NonFiniteLossError, match="Lf"):
        total_loss(L0, tape.constant(np.array(np.nan)), Lb)


def _tiny_problem(seed=0, n=8):
    sets = sample_sets(CFG, (n, n, n), seed=seed)
    model = BaselinePINN.create([6], CFG.lower, CFG.upper, seed=seed)
    for b in model.net.biases:
        b[:] = np.random.default_rng(seed).uniform(-0.3, 0.3, b.shape)
    return model, Batch.from_sets(sets)


def _objective_np(model, params, batch, alpha=1.0):
    net = model.with_parameters(params).net
    sc, sh = model._scale, model._shift

    def jets(X):
        val, d, dd = mlp_jets(net.weights, net.biases, net.activations, X * sc + sh)
        return val, [sc[i] * d[i] for i in range(3)], [sc[i] ** 2 * dd[i] for i in range(2)]

    val, d, dd = jets(batch.Tf)
    f_u, f_v = residual_np(val[:, 0], [x[:, 0] for x in d], [x[:, 0] for x in dd],
                           val[:, 1], [x[:, 1] for x in d], [x[:, 1] for x in dd],
                           batch.Tf[:, 0], batch.Tf[:, 1])
    Lf = np.mean(f_u**2) + np.mean(f_v**2)
    v0 = jets(batch.T0)[0]
    L0 = np.mean((v0[:, 0] - batch.T0_u) ** 2) + np.mean((v0[:, 1] - batch.T0_v) ** 2)
    vb = jets(batch.Tb)[0]
    Q = batch.Tb_quad @ (vb[:, 0] ** 2 + vb[:, 1] ** 2)
    Lb = np.mean((1 - Q) ** 2)
    return alpha * L0 + Lf + Lb


def test_total_gradient_matches_finite_differences():
    model, batch = _tiny_problem()
    params = {k: v.copy() for k, v in model.parameters().items()}
    vals, g = objective(model, params, batch)
    assert vals["total"] == pytest.approx(_objective_np(model, params, batch), rel=1e-12)
    fd = numeric_grad(lambda a: _objective_np(model, a, batch), params, h=1e-5)
    for k in g:
        assert rel_err(g[k], fd[k]) < 1e-4


def test_alpha_zero_removes_initial_term():
    model, batch = _tiny_problem(1)
    p = model.parameters()
    v1, g1 = objective(model, p, batch, LossConfig(alpha=0.0))
    # rebuild with T0 targets shifted: with alpha = 0 nothing may change
    b2 = Batch(batch.T0, batch.T0_u + 5.0, batch.T0_v, batch.Tb, batch.Tb_quad, batch.Tf)
    v2, g2 = objective(model, p, b2, LossConfig(alpha=0.0))
    assert v1["total"] == v2["total"]
    assert all(np.array_equal(g1[k], g2[k]) for k in g1)


def test_total_gradient_is_sum_of_component_gradients():
    model, batch = _tiny_problem(2)
    p = model.parameters()
    _, g = objective(model, p, batch)
    tape = Tape()
    bound = model.bind(tape)
    pf = model.predict(tape, batch.Tf, PINN_LAYOUT, bound=bound)
    Lf = loss_Lf(*residual(pf.u, pf.v, batch.Tf[:, 0], batch.Tf[:, 1]))
    p0 = model.predict(tape, batch.T0, VALUES_ONLY, bound=bound)
    L0 = loss_L0(p0.u.value, p0.v.value, batch.T0_u, batch.T0_v)
    pb = model.predict(tape, batch.Tb, VALUES_ONLY, bound=bound)
    Lb = loss_Lb(pb.u.value, pb.v.value, batch.Tb_quad)
    parts = [tape.backward(L) for L in (Lf, L0, Lb)]
    for k in g:
        assert np.allclose(g[k], sum(pp[k] for pp in parts), rtol=1e-12, atol=1e-14)


def test_loss_is_permutation_invariant():
    model, batch = _tiny_problem(3)
    perm = np.random.default_rng(0).permutation(len(batch.Tf))
    b2 = Batch(batch.T0, batch.T0_u, batch.T0_v, batch.Tb, batch.Tb_quad, batch.Tf[perm])
    a, _ = objective(model, model.parameters(), batch)
    b, _ = objective(model, model.parameters(), b2)
    assert a["total"] == pytest.approx(b["total"], rel=1e-14)
