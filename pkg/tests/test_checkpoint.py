import json

import numpy as np
import pytest

from gatedpinn.checkpoint import (
    ArchitectureMismatch, CheckpointError, build_model, load_checkpoint, model_spec, save_checkpoint,
)
from gatedpinn.gating import GatingConfig
from gatedpinn.models import BaselinePINN, GatedPINN
from gatedpinn.network import AdamState, adam_step
from gatedpinn.qho import QhoConfig

CFG = QhoConfig()
X = np.random.default_rng(0).uniform(-5, 5, (50, 3))


def _models():
    yield BaselinePINN.create([7, 5], CFG.lower, CFG.upper, seed=3)
    yield GatedPINN.create([4, 4], GatingConfig(3, 1, "linear"), CFG.lower, CFG.upper, seed=4)
    yield GatedPINN.create([4], GatingConfig(2, 2, "nonlinear", hidden=6), CFG.lower, CFG.upper, seed=5)


@pytest.mark.parametrize("model", list(_models()), ids=lambda m: type(m).__name__)
def test_round_trip_is_bit_exact(tmp_path, model):
    params = model.parameters()
    grads = {k: np.sin(np.arange(v.size, dtype=float)).reshape(v.shape) for k, v in params.items()}
    params, opt = adam_step(params, grads, AdamState.for_params(params, lr=0.01))
    path = save_checkpoint(tmp_path / "m.ckpt", model, params, opt, seed=9)
    m2, p2, opt2, header = load_checkpoint(path)
    assert header["seed"] == 9 and header["optimizer"]
    assert model_spec(m2) == model_spec(model)
    for k in params:
        assert p2[k].tobytes() == params[k].tobytes()
        assert opt2.m[k].tobytes() == opt.m[k].tobytes()
        assert opt2.v[k].tobytes() == opt.v[k].tobytes()
    assert opt2.step == opt.step and opt2.lr == opt.lr
    assert np.array_equal(model.with_parameters(params).evaluate(X)[0], m2.evaluate(X)[0])


def test_without_optimizer(tmp_path):
    m = BaselinePINN.create([3], CFG.lower, CFG.upper, seed=0)
    _, p, opt, header = load_checkpoint(save_checkpoint(tmp_path / "a.ckpt", m))
    assert opt is None and header["optimizer"] is False
    assert all(np.array_equal(p[k], v) for k, v in m.parameters().items())


def test_header_is_utf8_json_line(tmp_path):
    m = BaselinePINN.create([3], CFG.lower, CFG.upper, seed=0)
    raw = save_checkpoint(tmp_path / "a.ckpt", m).read_bytes()
    header = json.loads(raw.split(b"\n", 1)[0].decode("utf-8"))
    assert header["version"] == 1
    assert header["model"]["layer_sizes"] == [3, 3, 2]
    assert header["model"]["activations"] == ["tanh", "linear"]
    n = sum(int(np.prod(s)) for _, s in header["arrays"])
    assert len(raw.split(b"\n", 1)[1]) == 8 * n


def test_architecture_mismatch(tmp_path):
    a = BaselinePINN.create([4], CFG.lower, CFG.upper, seed=0)
    b = BaselinePINN.create([5], CFG.lower, CFG.upper, seed=0)
    path = save_checkpoint(tmp_path / "a.ckpt", a)
    with pytest.raises(ArchitectureMismatch):
        load_checkpoint(path, expect_spec=model_spec(b))
    load_checkpoint(path, expect_spec=model_spec(a))


@pytest.mark.parametrize("damage", ["truncate", "garbage", "odd"])
def test_corrupt_files_rejected(tmp_path, damage):
    m = BaselinePINN.create([4], CFG.lower, CFG.upper, seed=0)
    path = save_checkpoint(tmp_path / "a.ckpt", m)
    raw = path.read_bytes()
    if damage == "truncate":
        raw = raw[:-8]
    elif damage == "odd":
        raw = raw[:-3]
    else:
        raw = b"\x00\xffnot a checkpoint\n" + raw
    path.write_bytes(raw)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_unknown_kind():
    with pytest.raises(CheckpointError):
        build_model({"kind": "transformer"})
