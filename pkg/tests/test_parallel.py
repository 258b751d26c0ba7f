import numpy as np
import pytest

from gatedpinn.gating import GatingConfig
from gatedpinn.models import BaselinePINN, GatedPINN
from gatedpinn.objective import Batch, objective
from gatedpinn.parallel import (
    GradientEngine, ParallelConfig, WorkerError, parallel_gradient, shard_slices, speedup_benchmark, tree_sum,
)
from gatedpinn.qho import QhoConfig, sample_sets
from gatedpinn.training import TrainConfig, Trainer

from oracles import rel_err

CFG = QhoConfig()


def _grad_rel(a, b):
    return max(rel_err(a[k], b[k]) for k in a)


@pytest.fixture(scope="module")
def sets():
    return sample_sets(CFG, (64, 40, 400), seed=3, n_tb_times=4)


def test_shards_partition_exactly():
    for n, w in [(10, 1), (10, 3), (12, 4), (7, 7)]:
        sl = shard_slices(n, w)
        assert len(sl) == w
        idx = np.concatenate([np.arange(n)[s] for s in sl])
        assert np.array_equal(idx, np.arange(n))
    # remainder goes to the last shard
    assert [s.stop - s.start for s in shard_slices(10, 3)] == [3, 3, 4]


def test_shard_preconditions():
    with pytest.raises(ValueError):
        shard_slices(3, 4)
    with pytest.raises(ValueError):
        shard_slices(3, 0)
    with pytest.raises(ValueError):
        ParallelConfig(workers=0)


def test_tree_sum_order():
    items = [{"a": np.array([float(i)])} for i in range(5)]
    assert tree_sum(items)["a"][0] == 10.0
    assert tree_sum(items[:1])["a"] is items[0]["a"]


def test_single_worker_is_bitwise_serial(sets):
    m = BaselinePINN.create([8, 8], CFG.lower, CFG.upper, seed=0)
    batch = Batch.from_sets(sets)
    v1, g1 = objective(m, m.parameters(), batch)
    v2, g2 = parallel_gradient(m, m.parameters(), batch, workers=1)
    assert v1 == v2
    for k in g1:
        assert np.array_equal(g1[k], g2[k])


@pytest.mark.parametrize("workers", [2, 4, 5])
def test_equal_shards_match_serial(sets, workers):
    m = BaselinePINN.create([8, 8], CFG.lower, CFG.upper, seed=1)
    batch = Batch.from_sets(sets)
    v1, g1 = objective(m, m.parameters(), batch)
    v2, g2 = parallel_gradient(m, m.parameters(), batch, workers)
    assert _grad_rel(g1, g2) < 1e-12
    assert abs(v1["total"] - v2["total"]) <= 1e-12 * abs(v1["total"])


def test_gated_equal_shards_match_serial(sets):
    cfg = GatingConfig(n_experts=3, k=1, kind="linear", w_I=0.1)
    m = GatedPINN.create([6], cfg, CFG.lower, CFG.upper, seed=2)
    batch = Batch.from_sets(sets).with_noise(np.random.default_rng(0), 3)
    _, g1 = objective(m, m.parameters(), batch)
    _, g2 = parallel_gradient(m, m.parameters(), batch, 4)
    assert _grad_rel(g1, g2) < 1e-12


def test_repeated_runs_are_identical(sets):
    m = BaselinePINN.create([8], CFG.lower, CFG.upper, seed=4)
    batch = Batch.from_sets(sets)
    with GradientEngine(4) as eng:
        _, a = eng.gradient(m, m.parameters(), batch)
        _, b = eng.gradient(m, m.parameters(), batch)
    for k in a:
        assert np.array_equal(a[k], b[k])


def test_worker_failure_names_worker(sets, monkeypatch):
    import gatedpinn.parallel as par

    real = par.objective

    def flaky(model, params, batch, loss_cfg, tape, rows, **kw):
        if rows.start == 200:  # second of two shards
            raise FloatingPointError("boom")
        return real(model, params, batch, loss_cfg, tape=tape, rows=rows, **kw)

    monkeypatch.setattr(par, "objective", flaky)
    m = BaselinePINN.create([8], CFG.lower, CFG.upper, seed=0)
    with pytest.raises(WorkerError) as info:
        parallel_gradient(m, m.parameters(), Batch.from_sets(sets), 2)
    assert info.value.worker == 1
    assert "worker 1" in str(info.value) and "boom" in str(info.value)


def test_short_trajectories_agree(sets):
    m = BaselinePINN.create([8, 8], CFG.lower, CFG.upper, seed=5)
    curves = []
    for w in (1, 4):
        tr = Trainer(m, sets, train_cfg=TrainConfig(steps=20, batch_size=100, seed=0, workers=w))
        curves.append(np.array([r["total"] for r in tr.run()]))
    assert np.max(np.abs(curves[0] - curves[1])) < 1e-9


def test_speedup_table_shape(sets):
    m = BaselinePINN.create([8], CFG.lower, CFG.upper, seed=0)
    rows = speedup_benchmark(m, Batch.from_sets(sets), (1, 2), repeats=5)
    assert [r.workers for r in rows] == [1, 2]
    assert rows[0].speedup == 1.0
    assert all(r.median_ms > 0 and r.hardware_threads >= 1 for r in rows)
