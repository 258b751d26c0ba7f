import pytest

from gatedpinn.config import PRESETS, ConfigError, RunConfig, load_config, preset_text


def test_defaults_validate():
    cfg = load_config()
    assert cfg == RunConfig()
    assert cfg.hidden == (64,) * 5 and (cfg.n0, cfg.nb, cfg.nf) == (2000, 1000, 200_000)


@pytest.mark.parametrize("name", PRESETS)
def test_presets_load(name):
    cfg = load_config(preset=name)
    assert cfg.steps == 20000


def test_paper_full_architecture():
    cfg = load_config(preset="paper-full")
    assert cfg.hidden == (700,) * 8
    assert cfg.expert_hidden == (300,) * 5
    assert cfg.experts == 10 and cfg.gate_hidden == 20


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset_text("laptop")


def test_precedence(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text("[optimizer]\nsteps = 77\nlr = 0.01\n[gating]\nexperts = 6\n")
    cfg = load_config(f, preset="desk", overrides={"lr": 0.5, "seed": None})
    assert cfg.steps == 77  # file beats preset
    assert cfg.lr == 0.5  # flag beats file
    assert cfg.experts == 6
    assert cfg.seed == 0  # None means "not given"


@pytest.mark.parametrize("text, field", [
    ("[optimizer]\nstpes = 3\n", "optimizer.stpes"),
    ("[modle]\nkind = baseline\n", "[modle]"),
    ("[gating]\ntopk = 5\nexperts = 4\n", "gating.topk"),
    ("[model]\nkind = resnet\n", "model.kind"),
    ("[data]\nnf = ten\n", "data.nf"),
    ("[optimizer]\nbatch_size = 0\n", "optimizer.batch_size"),
    ("[loss]\nlb_form = cubed\n", "loss.lb_form"),
])
def test_errors_name_the_field(tmp_path, text, field):
    f = tmp_path / "bad.ini"
    f.write_text(text)
    with pytest.raises(ConfigError) as info:
        load_config(f)
    assert field in str(info.value)


def test_unknown_override():
    with pytest.raises(ConfigError):
        load_config(overrides={"learning_rate": 1.0})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_resolved_ini_round_trips(tmp_path):
    cfg = load_config(preset="paper-full", overrides={"model": "gated-nonlinear", "alpha": 2.5})
    f = tmp_path / "resolved.ini"
    f.write_text(cfg.to_ini())
    assert load_config(f) == cfg
