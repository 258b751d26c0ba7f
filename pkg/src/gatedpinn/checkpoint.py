"""Checkpoint container.

Layout: one UTF-8 JSON header line terminated by ``\\n``, then the raw
little-endian float64 bytes of every array in header order.  With the
optimizer flag set the Adam first and second moments follow, in the same
parameter order.  Nothing is compressed, so a save/load round trip is
bit-exact.
"""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .gating import GatingConfig, GatingParams, init_gating
from .models import BaselinePINN, GatedPINN
from .network import AdamState, MlpParams, init_params

MAGIC = "gatedpinn-checkpoint"
FORMAT_VERSION = 1
_LE = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


class ArchitectureMismatch(CheckpointError):
    pass


def model_spec(model) -> dict:
    """Architecture description sufficient to rebuild an empty model."""
    if isinstance(model, BaselinePINN):
        return {
            "kind": "baseline",
            "layer_sizes": model.net.layer_sizes,
            "activations": list(model.net.activations),
            "lower": model.lower.tolist(),
            "upper": model.upper.tolist(),
        }
    if isinstance(model, GatedPINN):
        e = model.experts[0]
        spec = {
            "kind": model.kind,
            "layer_sizes": e.layer_sizes,
            "activations": list(e.activations),
            "lower": model.lower.tolist(),
            "upper": model.upper.tolist(),
            "gating": asdict(model.config),
        }
        if model.gate.kind == "nonlinear":
            spec["gate_layer_sizes"] = model.gate.net.layer_sizes
            spec["gate_activations"] = list(model.gate.net.activations)
        return spec
    raise CheckpointError(f"cannot checkpoint a {type(model).__name__}")


def _blank_mlp(sizes, acts) -> MlpParams:
    p = init_params(sizes, seed=0)
    return MlpParams(p.weights, p.biases, list(acts))


def build_model(spec: dict):
    """Model with the given architecture and placeholder (seed-0) weights."""
    kind = spec.get("kind")
    try:
        if kind == "baseline":
            return BaselinePINN(_blank_mlp(spec["layer_sizes"], spec["activations"]), spec["lower"], spec["upper"])
        if kind in ("gated-linear", "gated-nonlinear"):
            cfg = GatingConfig(**spec["gating"])
            experts = [_blank_mlp(spec["layer_sizes"], spec["activations"]) for _ in range(cfg.n_experts)]
            gate = init_gating(cfg, 0)
            if cfg.kind == "nonlinear":
                gate = GatingParams("nonlinear", gate.W_noise, net=_blank_mlp(spec["gate_layer_sizes"], spec["gate_activations"]))
            return GatedPINN(experts, gate, cfg, spec["lower"], spec["upper"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed model spec: {exc}") from exc
    raise CheckpointError(f"unknown model kind {kind!r}")


def save_checkpoint(
    path: Union[str, Path],
    model,
    params: Optional[Dict[str, np.ndarray]] = None,
    optimizer: Optional[AdamState] = None,
    seed: int = 0,
    extra: Optional[dict] = None,
) -> Path:
    params = model.parameters() if params is None else params
    names = list(params)
    header = {
        "format": MAGIC,
        "version": FORMAT_VERSION,
        "model": model_spec(model),
        "seed": int(seed),
        "arrays": [[n, list(np.shape(params[n]))] for n in names],
        "optimizer": optimizer is not None,
    }
    if optimizer is not None:
        header["optimizer_state"] = {
            "lr": optimizer.lr, "beta1": optimizer.beta1, "beta2": optimizer.beta2,
            "eps": optimizer.eps, "step": optimizer.step,
        }
    if extra:
        header["extra"] = extra
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        blocks = [params]
        if optimizer is not None:
            blocks += [optimizer.m or {n: np.zeros_like(params[n]) for n in names},
                       optimizer.v or {n: np.zeros_like(params[n]) for n in names}]
        for block in blocks:
            for n in names:
                fh.write(np.ascontiguousarray(block[n], dtype=_LE).tobytes())
    return path


def load_checkpoint(path: Union[str, Path], expect_spec: Optional[dict] = None):
    """Return ``(model, params, optimizer_or_None, header)``."""
    with open(path, "rb") as fh:
        line = fh.readline()
        body = fh.read()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header") from exc
    if header.get("format") != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('version')}")
    spec = header["model"]
    if expect_spec is not None and expect_spec != spec:
        raise ArchitectureMismatch(f"checkpoint architecture {spec} does not match {expect_spec}")
    model = build_model(spec)
    expected = {n: list(a.shape) for n, a in model.parameters().items()}
    stored = {n: s for n, s in header["arrays"]}
    if expected != stored:
        raise ArchitectureMismatch("stored arrays do not match the declared architecture")

    if len(body) % 8:
        raise CheckpointError(f"{path}: truncated array data")
    flat = np.frombuffer(body, dtype=_LE)
    n_blocks = 3 if header["optimizer"] else 1
    total = sum(int(np.prod(s)) for _, s in header["arrays"])
    if flat.size != n_blocks * total:
        raise CheckpointError(f"{path}: expected {n_blocks * total} values, found {flat.size}")
    pos = 0
    blocks = []
    for _ in range(n_blocks):
        block = {}
        for n, shape in header["arrays"]:
            size = int(np.prod(shape))
            block[n] = flat[pos : pos + size].reshape(shape).astype(np.float64)
            pos += size
        blocks.append(block)
    params = blocks[0]
    opt = None
    if header["optimizer"]:
        st = header["optimizer_state"]
        opt = AdamState(st["lr"], st["beta1"], st["beta2"], st["eps"], st["step"], blocks[1], blocks[2])
    return model.with_parameters(params), params, opt, header
