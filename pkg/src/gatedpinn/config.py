"""Run configuration: INI-style files, presets and command-line overrides.

Every key has a default, unknown sections or keys are rejected, and all
validation happens before any compute starts.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .gating import GATING_KINDS, GatingConfig
from .models import MODEL_KINDS
from .qho import QhoConfig

PRESETS = ("desk", "paper-full")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _int_list(text: str) -> Tuple[int, ...]:
    parts = [p for p in str(text).replace("x", ",").replace(" ", "").split(",") if p]
    return tuple(int(p) for p in parts)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> {key: (attribute, parser)}
_SCHEMA: Dict[str, Dict[str, Tuple[str, type]]] = {
    "model": {
        "kind": ("model", str),
        "hidden": ("hidden", _int_list),
        "expert_hidden": ("expert_hidden", _int_list),
    },
    "gating": {
        "experts": ("experts", int),
        "topk": ("topk", int),
        "w_i": ("w_I", float),
        "noise": ("noise", _bool),
        "gate_hidden": ("gate_hidden", int),
    },
    "loss": {
        "alpha": ("alpha", float),
        "lb_form": ("lb_form", str),
    },
    "data": {
        "n0": ("n0", int),
        "nb": ("nb", int),
        "nf": ("nf", int),
        "tb_times": ("tb_times", int),
        "seed": ("seed", int),
    },
    "domain": {
        "x_min": ("x_min", float),
        "x_max": ("x_max", float),
        "y_min": ("y_min", float),
        "y_max": ("y_max", float),
        "t_max": ("t_max", float),
    },
    "optimizer": {
        "steps": ("steps", int),
        "batch_size": ("batch_size", int),
        "lr": ("lr", float),
        "beta1": ("beta1", float),
        "beta2": ("beta2", float),
        "eps": ("eps", float),
    },
    "run": {
        "workers": ("workers", int),
        "output": ("output", str),
        "log_every": ("log_every", int),
    },
}


@dataclass(frozen=True)
class RunConfig:
    model: str = "baseline"
    hidden: Tuple[int, ...] = (64, 64, 64, 64, 64)
    expert_hidden: Tuple[int, ...] = (44, 44, 44)
    experts: int = 4
    topk: int = 1
    w_I: float = 0.1
    noise: bool = True
    gate_hidden: int = 20
    alpha: float = 1.0
    lb_form: str = "squared"
    n0: int = 2000
    nb: int = 1000
    nf: int = 200_000
    tb_times: int = 5
    seed: int = 0
    x_min: float = -5.0
    x_max: float = 5.0
    y_min: float = -5.0
    y_max: float = 5.0
    t_max: float = float(np.pi)
    steps: int = 2000
    batch_size: int = 1000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    workers: int = 1
    output: str = "runs/latest"
    log_every: int = 100

    @property
    def gated(self) -> bool:
        return self.model.startswith("gated-")

    def qho(self) -> QhoConfig:
        return QhoConfig(self.x_min, self.x_max, self.y_min, self.y_max, self.t_max)

    def gating(self) -> GatingConfig:
        return GatingConfig(
            n_experts=self.experts, k=self.topk, kind=self.model.split("-", 1)[1],
            noise=self.noise, w_I=self.w_I, hidden=self.gate_hidden,
        )

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("hidden", "expert_hidden"):
            d[k] = list(d[k])
        return d

    def to_ini(self) -> str:
        lines = []
        for section, keys in _SCHEMA.items():
            lines.append(f"[{section}]")
            for key, (attr, _) in keys.items():
                val = getattr(self, attr)
                if isinstance(val, tuple):
                    val = ",".join(str(v) for v in val)
                elif isinstance(val, float):
                    val = repr(val)
                lines.append(f"{key} = {val}")
            lines.append("")
        return "\n".join(lines)


def validate(cfg: RunConfig) -> RunConfig:
    def bad(name, msg):
        raise ConfigError(f"{name}: {msg}")

    if cfg.model not in MODEL_KINDS:
        bad("model.kind", f"must be one of {', '.join(MODEL_KINDS)}, got {cfg.model!r}")
    for name in ("hidden", "expert_hidden"):
        sizes = getattr(cfg, name)
        if not sizes or any(s <= 0 for s in sizes):
            bad(f"model.{name}", f"need one or more positive layer widths, got {list(sizes)}")
    if cfg.experts < 1:
        bad("gating.experts", "must be >= 1")
    if not 1 <= cfg.topk <= cfg.experts:
        bad("gating.topk", f"must satisfy 1 <= k <= experts ({cfg.experts}), got {cfg.topk}")
    if cfg.w_I < 0:
        bad("gating.w_I", "must be non-negative")
    if cfg.gate_hidden < 1:
        bad("gating.gate_hidden", "must be >= 1")
    if cfg.alpha < 0:
        bad("loss.alpha", "must be non-negative")
    if cfg.lb_form not in ("squared", "printed"):
        bad("loss.lb_form", "must be 'squared' or 'printed'")
    for name in ("n0", "nb", "nf"):
        if getattr(cfg, name) < 1:
            bad(f"data.{name}", "must be >= 1")
    if cfg.tb_times < 1 or cfg.tb_times > cfg.nb:
        bad("data.tb_times", f"must be in [1, nb], got {cfg.tb_times}")
    if not (cfg.x_min < cfg.x_max and cfg.y_min < cfg.y_max):
        bad("domain", "empty spatial box")
    if cfg.t_max <= 0:
        bad("domain.t_max", "must be positive")
    if cfg.steps < 0:
        bad("optimizer.steps", "must be >= 0")
    if not 1 <= cfg.batch_size <= cfg.nf:
        bad("optimizer.batch_size", f"must be in [1, nf={cfg.nf}], got {cfg.batch_size}")
    if not cfg.lr > 0:
        bad("optimizer.lr", "must be positive")
    if not (0 <= cfg.beta1 < 1 and 0 <= cfg.beta2 < 1):
        bad("optimizer.beta", "betas must lie in [0, 1)")
    if not cfg.eps > 0:
        bad("optimizer.eps", "must be positive")
    if cfg.workers < 1:
        bad("run.workers", "must be >= 1")
    if cfg.workers > cfg.batch_size:
        bad("run.workers", f"{cfg.workers} workers cannot split a batch of {cfg.batch_size}")
    if cfg.log_every < 1:
        bad("run.log_every", "must be >= 1")
    return cfg


def _parse_text(text: str, source: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    out = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {section}.{key}")
            attr, parse = _SCHEMA[section][key]
            try:
                out[attr] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: cannot parse {raw!r} ({exc})") from exc
    return out


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("gatedpinn").joinpath("presets", f"{name}.ini").read_text(encoding="utf-8")


def load_config(
    path: Optional[Union[str, Path]] = None,
    preset: Optional[str] = None,
    overrides: Optional[dict] = None,
) -> RunConfig:
    """defaults < preset < file < overrides, then validate."""
    values: dict = {}
    if preset:
        values.update(_parse_text(preset_text(preset), f"preset {preset}"))
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(_parse_text(text, str(path)))
    known = {f.name for f in fields(RunConfig)}
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in known:
            raise ConfigError(f"unknown option {k}")
        values[k] = v
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return validate(cfg)
