"""``gatedpinn`` command line: train, eval, spectral, gating-map, bench, exact.

Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .checkpoint import ArchitectureMismatch, CheckpointError, load_checkpoint, model_spec, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .csvio import write_columns, write_csv
from .gating import decomposition_map
from .loss import NonFiniteLossError
from .metrics import REPORT_COLUMNS, SliceErrorReport, err_infinity, err_relative_norm, time_series_report
from .models import BaselinePINN, GatedPINN, OracleModel
from .objective import Batch, LossConfig
from .parallel import speedup_benchmark
from .qho import QhoConfig, analytic_psi, grid, sample_sets, time_slices
from .spectral import GridSpec, init_from_oracle, solve
from .training import LOG_COLUMNS, TrainConfig, Trainer

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def git_blob_sha1(data: bytes) -> str:
    """Same digest ``git hash-object`` prints for a file with these bytes."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def make_model(cfg: RunConfig):
    q = cfg.qho()
    if cfg.model == "baseline":
        return BaselinePINN.create(list(cfg.hidden), q.lower, q.upper, cfg.seed)
    return GatedPINN.create(list(cfg.expert_hidden), cfg.gating(), q.lower, q.upper, cfg.seed)


def _float_list(text: str) -> List[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _int_csv(text: str) -> List[int]:
    return [int(p) for p in text.split(",") if p.strip()]


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    overrides = {
        "model": args.model, "steps": args.steps, "seed": args.seed, "experts": args.experts,
        "topk": args.topk, "w_I": args.w_i, "alpha": args.alpha, "lr": args.lr,
        "batch_size": args.batch_size, "workers": args.workers, "output": args.output,
        "n0": args.n0, "nb": args.nb, "nf": args.nf,
        "hidden": tuple(_int_csv(args.hidden)) if args.hidden else None,
        "expert_hidden": tuple(_int_csv(args.expert_hidden)) if args.expert_hidden else None,
        "lb_form": args.lb_form,
        "noise": None if args.noise is None else args.noise == "on",
    }
    cfg = load_config(args.config, args.preset, overrides)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)

    qcfg = cfg.qho()
    sets = sample_sets(qcfg, (cfg.n0, cfg.nb, cfg.nf), cfg.seed, cfg.tb_times)
    model = make_model(cfg)
    tcfg = TrainConfig(cfg.steps, cfg.batch_size, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.seed, cfg.workers)
    trainer = Trainer(model, sets, LossConfig(cfg.alpha, cfg.lb_form), tcfg)

    log_path = out / "loss.csv"
    fh = open(log_path, "w", encoding="utf-8")
    fh.write(",".join(LOG_COLUMNS) + "\n")
    t_start = time.perf_counter()

    def on_step(row):
        fh.write(",".join(repr(float(row[c])) if c != "step" else str(row[c]) for c in LOG_COLUMNS) + "\n")
        if not args.quiet and (row["step"] % cfg.log_every == 0 or row["step"] == cfg.steps - 1):
            print(f"step {row['step']:6d}  total {row['total']:.6e}  L0 {row['L0']:.3e}  "
                  f"Lb {row['Lb']:.3e}  Lf {row['Lf']:.3e}  LI {row['LI']:.3e}", flush=True)

    try:
        trainer.run(callback=on_step)
    except NonFiniteLossError as exc:
        fh.close()
        print(f"error: non-finite loss ({exc.component}) at step {exc.step}", file=sys.stderr)
        return EXIT_NUMERIC
    fh.close()

    ckpt = save_checkpoint(out / "model.ckpt", trainer.trained_model(), trainer.params, trainer.opt, cfg.seed)
    resolved = cfg.to_ini()
    inputs = {"resolved_config": git_blob_sha1(resolved.encode("utf-8"))}
    if args.config:
        inputs["config_file"] = git_blob_sha1(Path(args.config).read_bytes())
    manifest = {
        "version": __version__,
        "command": "train",
        "config": cfg.as_dict(),
        "resolved_ini": resolved,
        "input_hashes": inputs,
        "n_params": model.n_params,
        "model": model_spec(model),
        "outputs": {"checkpoint": ckpt.name, "checkpoint_sha1": git_blob_sha1(ckpt.read_bytes()), "loss_log": log_path.name},
        "steps": cfg.steps,
        "wall_s": time.perf_counter() - t_start,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if not args.quiet:
        print(f"wrote {ckpt}, {log_path}, {out / 'manifest.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _domain_from_spec(spec: dict, t_max: float) -> QhoConfig:
    lo, hi = spec["lower"], spec["upper"]
    return QhoConfig(lo[0], hi[0], lo[1], hi[1], hi[2] if t_max is None else t_max)


def _times(args, q: QhoConfig) -> np.ndarray:
    if args.times:
        return np.asarray(_float_list(args.times))
    return time_slices(q, args.slices)


def cmd_eval(args) -> int:
    if args.oracle:
        q = QhoConfig()
        model = OracleModel(q)
    else:
        if not args.checkpoint:
            raise ConfigError("eval: give --checkpoint or --oracle")
        model, _, _, header = load_checkpoint(args.checkpoint, _expected_spec(args))
        q = _domain_from_spec(header["model"], None)
    out = Path(args.output)
    times = _times(args, q)
    snap = None
    if args.fields:
        fields_dir = out / "fields"

        def snap(t, x, y, u, v, _n=[0]):
            write_columns(fields_dir / f"slice_{_n[0]:03d}.csv", ("x", "y", "t", "u", "v"),
                          (x, y, np.full_like(x, t), u, v))
            _n[0] += 1

    report = time_series_report(model, q, args.grid, times, snapshot=snap)
    report.to_csv(out / "report.csv")
    print(f"mean err_inf real {report.mean_real:.6g}  imag {report.mean_imag:.6g}  err_rel {report.mean_rel:.6g}%")
    return EXIT_OK


def _expected_spec(args) -> Optional[dict]:
    if not getattr(args, "expect_config", None):
        return None
    return model_spec(make_model(load_config(args.expect_config)))


# ---------------------------------------------------------------------------
# spectral


def cmd_spectral(args) -> int:
    q = QhoConfig()
    spec = GridSpec(args.grid, args.grid, args.dt, None if args.half_width <= 0 else args.half_width)
    times = _float_list(args.times)
    out = Path(args.output)
    snaps = solve(q, spec, times)
    g = init_from_oracle(q, spec)  # for the grid coordinates
    rows = []
    for j, (t, psi) in enumerate(snaps):
        ex = analytic_psi(q, g.X, g.Y, t).psi
        rows.append([t, err_infinity(psi, ex, "real"), err_infinity(psi, ex, "imag"),
                     err_relative_norm(psi.real, psi.imag, g.dx * g.dy)])
        if args.fields:
            write_columns(out / f"snapshot_{j:03d}.csv", ("x", "y", "t", "u", "v"),
                          (g.X, g.Y, np.full(g.X.size, t), psi.real, psi.imag))
    report = SliceErrorReport(*zip(*rows)) if rows else None
    if report is not None:
        report.to_csv(out / "report.csv")
        print(f"max err_inf real {report.err_inf_real.max():.3e}  imag {report.err_inf_imag.max():.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gating-map


def cmd_gating_map(args) -> int:
    model, _, _, header = load_checkpoint(args.checkpoint)
    if not isinstance(model, GatedPINN):
        raise ConfigError("gating-map: checkpoint holds a baseline model, which has no gating network")
    q = _domain_from_spec(header["model"], None)
    x, y, _ = grid(q, args.grid)
    out = Path(args.output)
    for j, t in enumerate(_times(args, q)):
        idx = decomposition_map(model.gate, x, y, t)
        write_columns(out / f"gating_{j:03d}.csv", ("x", "y", "t", "expert_index"),
                      (x, y, np.full_like(x, t), idx.astype(np.int64)))
    print(f"wrote gating maps to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    cfg = load_config(args.config, args.preset, {"model": args.model})
    q = cfg.qho()
    model = make_model(cfg)
    sets = sample_sets(q, (cfg.n0, cfg.nb, args.batch), cfg.seed, cfg.tb_times)
    batch = Batch.from_sets(sets)
    if isinstance(model, GatedPINN) and model.config.noise:
        batch = batch.with_noise(np.random.default_rng(cfg.seed), model.config.n_experts)
    rows = speedup_benchmark(model, batch, _int_csv(args.workers), args.repeats, LossConfig(cfg.alpha, cfg.lb_form))
    path = write_csv(args.output, ("W", "median_ms", "speedup", "hardware_threads"),
                     [[r.workers, r.median_ms, r.speedup, r.hardware_threads] for r in rows])
    for r in rows:
        print(f"W={r.workers}  median {r.median_ms:.1f} ms  S={r.speedup:.3f}  (hardware threads: {r.hardware_threads})")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# exact


def cmd_exact(args) -> int:
    q = QhoConfig()
    x, y, _ = grid(q, args.grid)
    out = Path(args.output)
    for j, t in enumerate(_times(args, q)):
        s = analytic_psi(q, x, y, t)
        write_columns(out / f"exact_{j:03d}.csv", ("x", "y", "t", "u_exact", "v_exact"),
                      (x, y, np.full_like(x, t), s.u, s.v))
    print(f"wrote exact snapshots to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gatedpinn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gatedpinn {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model, write checkpoint + loss log + manifest")
    t.add_argument("--config", help="INI config file")
    t.add_argument("--preset", choices=("desk", "paper-full"))
    t.add_argument("--model", choices=("baseline", "gated-linear", "gated-nonlinear"))
    t.add_argument("--steps", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--experts", type=int)
    t.add_argument("--topk", type=int)
    t.add_argument("--w-i", dest="w_i", type=float)
    t.add_argument("--alpha", type=float)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--workers", type=int)
    t.add_argument("--n0", type=int)
    t.add_argument("--nb", type=int)
    t.add_argument("--nf", type=int)
    t.add_argument("--hidden", help="baseline widths, e.g. 64,64,64")
    t.add_argument("--expert-hidden", help="expert widths, e.g. 44,44,44")
    t.add_argument("--lb-form", choices=("squared", "printed"))
    t.add_argument("--noise", choices=("on", "off"))
    t.add_argument("--output", help="run directory")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="error report (+ field snapshots) against the analytic solution")
    src = e.add_mutually_exclusive_group()
    src.add_argument("--checkpoint")
    src.add_argument("--oracle", action="store_true", help="evaluate the analytic solution itself")
    e.add_argument("--expect-config", help="reject checkpoints whose architecture differs from this config")
    e.add_argument("--grid", type=int, default=256)
    e.add_argument("--slices", type=int, default=20)
    e.add_argument("--times", help="comma-separated times (overrides --slices)")
    e.add_argument("--fields", action="store_true", help="also write per-slice x,y,t,u,v CSVs")
    e.add_argument("--output", default="runs/eval")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("spectral", help="split-step reference solve + error report")
    s.add_argument("--grid", type=int, default=128)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--half-width", type=float, default=8.0, help="periodic box half-width; 0 = training domain")
    s.add_argument("--times", default="0,0.25,0.5,0.75,1")
    s.add_argument("--fields", action="store_true")
    s.add_argument("--output", default="runs/spectral")
    s.set_defaults(func=cmd_spectral)

    g = sub.add_parser("gating-map", help="argmax-expert maps of a gated checkpoint")
    g.add_argument("--checkpoint", required=True)
    g.add_argument("--grid", type=int, default=128)
    g.add_argument("--slices", type=int, default=5)
    g.add_argument("--times")
    g.add_argument("--output", default="runs/gating")
    g.set_defaults(func=cmd_gating_map)

    b = sub.add_parser("bench", help="data-parallel speedup table")
    b.add_argument("--config")
    b.add_argument("--preset", choices=("desk", "paper-full"), default="desk")
    b.add_argument("--model", choices=("baseline", "gated-linear", "gated-nonlinear"))
    b.add_argument("--workers", default="1,2,4")
    b.add_argument("--batch", type=int, default=35000)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--output", default="runs/speedup.csv")
    b.set_defaults(func=cmd_bench)

    x = sub.add_parser("exact", help="analytic ground-truth grid export")
    x.add_argument("--grid", type=int, default=128)
    x.add_argument("--slices", type=int, default=5)
    x.add_argument("--times")
    x.add_argument("--output", default="runs/exact")
    x.set_defaults(func=cmd_exact)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ArchitectureMismatch) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, CheckpointError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # argument values that pass argparse but fail domain validation
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteLossError as exc:
        print(f"error: non-finite loss ({exc.component}) at step {exc.step}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
