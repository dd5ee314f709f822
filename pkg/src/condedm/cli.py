"""Command-line entry point: ``condedm <command> [options]``.

Commands::

    gen-data --config F
    train    --config F
    sample   --config F --labels L --per-label K [--sampler ode|sde]
    eval     --real A --fake B --config F
    verify   --level fast|full [--json]

Outputs go under the output root (``run.out_dir``, overridden by the
``CONDEDM_OUT`` environment variable) in ``data/``, ``params/``,
``samples/`` and ``reports/``; every file name starts with the config hash.

Exit codes: 0 success, 1 validation or check failure, 2 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import checks
from .config import SAMPLER_KINDS, RunConfig
from .covariance import ConfigError
from .denoiser import ClosedFormDenoiser, TrainableDenoiser, TrainingDivergedError, train
from .metrics import MetricsReport, label_consistency, sliding_distance
from .sampler import ChainRNG, heun_sample, stochastic_sample
from .synthdata import generate
from .vicinity import LabeledDataset, read_dataset_csv, read_labeled_csv, write_dataset_csv

log = logging.getLogger("condedm")

OUT_ENV = "CONDEDM_OUT"
EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


class Layout:
    """Output paths for one config."""

    def __init__(self, cfg: RunConfig):
        self.root = Path(os.environ.get(OUT_ENV) or cfg["run.out_dir"])
        self.prefix = cfg.hash

    def path(self, sub: str, name: str) -> Path:
        return self.root / sub / f"{self.prefix}_{name}"

    @property
    def dataset(self):
        return self.path("data", "dataset.csv")

    @property
    def params(self):
        return self.path("params", "params.json")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _run_report(cfg: RunConfig, command: str, t0: float, **extra) -> dict:
    rep = {
        "command": command,
        "config_snapshot": cfg.snapshot(),
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "wall_clock_s": time.perf_counter() - t0,
    }
    rep.update(extra)
    return rep


def load_dataset(cfg: RunConfig, lay: Layout) -> LabeledDataset:
    path = cfg["dataset.path"]
    if path:
        ds = read_dataset_csv(path, cfg.label_range)
    else:
        if not lay.dataset.exists():
            raise FileNotFoundError(f"dataset {lay.dataset} not found; run gen-data first")
        ds = read_dataset_csv(lay.dataset, cfg.label_range)
    if ds.dim != cfg.dim:
        raise ConfigError(f"dataset has d={ds.dim} but config says dataset.d={cfg.dim}")
    return ds


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen_data(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    lay = Layout(cfg)
    ds = generate(cfg.dataset_spec())
    write_dataset_csv(ds, lay.dataset)
    _write_json(lay.path("reports", "gen_data.json"),
                _run_report(cfg, "gen-data", t0, dataset=str(lay.dataset), n=ds.n))
    print(lay.dataset)
    return EXIT_OK


def _write_trace(path: Path, trace) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "loss"])
        for k, v in enumerate(trace):
            w.writerow([k, repr(float(v))])


def cmd_train(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    lay = Layout(cfg)
    ds = load_dataset(cfg, lay)
    sd = cfg.sigma_data(ds)
    td = TrainableDenoiser.create(cfg.dim, sd, cfg.label_range, cfg["train.width"],
                                  cfg["train.depth"], seed=cfg.seed)
    trace_path = lay.path("reports", "loss_trace.csv")
    rng = np.random.default_rng([cfg.seed, 1])
    try:
        td, trace = train(td, ds, cfg.vicinity(), cfg.kde(ds.labels), cfg.cov_params("train", ds),
                          cfg.loss(ds), cfg["train.steps"], cfg["train.lr"], rng,
                          log_every=max(cfg["train.steps"] // 10, 1))
    except TrainingDivergedError as e:
        _write_trace(trace_path, e.trace)
        print(f"error: training diverged at step {e.step}; partial trace in {trace_path}", file=sys.stderr)
        return EXIT_FAIL
    _write_trace(trace_path, trace)
    td.save(lay.params, cfg.hash)
    final = float(trace[-1]) if len(trace) else None
    _write_json(lay.path("reports", "train.json"), _run_report(
        cfg, "train", t0, final_loss=final, steps=len(trace),
        loss_trace=str(trace_path), params=str(lay.params)))
    print(lay.params)
    return EXIT_OK


def parse_labels(text: str) -> np.ndarray:
    """``a,b,c`` or ``lo:hi:n`` (n evenly spaced labels, endpoints included)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"label range must be lo:hi:n, got {text!r}")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ConfigError("label range needs n >= 1")
        return np.linspace(lo, hi, n)
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ConfigError("no labels given")
    return np.asarray(vals)


def build_denoiser(cfg: RunConfig, lay: Layout):
    if cfg["run.denoiser"] == "trained":
        if not lay.params.exists():
            raise FileNotFoundError(f"parameters {lay.params} not found; run train first")
        td = TrainableDenoiser.load(lay.params)
        return td, td.sigma_data
    ds = load_dataset(cfg, lay)
    return ClosedFormDenoiser(ds, cfg.vicinity()), cfg.sigma_data(ds)


def cmd_sample(cfg: RunConfig, labels: np.ndarray, per_label: int, sampler: str | None) -> int:
    t0 = time.perf_counter()
    lay = Layout(cfg)
    kind = sampler or cfg["sampler.kind"]
    if kind not in SAMPLER_KINDS:
        raise ConfigError(f"unknown sampler {kind!r}; choose from {SAMPLER_KINDS}")
    if per_label < 1:
        raise ConfigError("--per-label must be >= 1")
    lo, hi = cfg.label_range
    bad = labels[(labels < lo) | (labels > hi)]
    if bad.size:
        raise ConfigError(f"labels {bad.tolist()} outside label range [{lo}, {hi}]")
    D, sd = build_denoiser(cfg, lay)
    scfg = cfg.sampler()
    cov = cfg.cov_params("sample", sigma_data=sd)
    y = np.repeat(labels, per_label)
    seeds = [[cfg.seed, i, j] for i in range(labels.size) for j in range(per_label)]
    rng = ChainRNG.from_seeds(seeds)
    run = heun_sample if kind == "ode" else stochastic_sample
    x = run(D, y, cov, scfg, rng, gamma=scfg.cfg_gamma)
    out = lay.path("samples", f"samples_{kind}.csv")
    write_dataset_csv(LabeledDataset(x, y, cfg.label_range), out)
    _write_json(lay.path("reports", f"sample_{kind}.json"), _run_report(
        cfg, "sample", t0, sampler=kind, labels=labels.tolist(), per_label=per_label, samples=str(out)))
    print(out)
    return EXIT_OK


def cmd_eval(cfg: RunConfig, real: str, fake: str) -> int:
    t0 = time.perf_counter()
    lay = Layout(cfg)
    ry, rx = read_labeled_csv(real)
    gy, gx = read_labeled_csv(fake)
    if rx.shape[1] != gx.shape[1]:
        raise ConfigError(f"dimension mismatch: {real} has d={rx.shape[1]}, {fake} has d={gx.shape[1]}")
    ev = cfg.eval()
    res = sliding_distance(ry, rx, gy, gx, ev)
    mae = None
    spec = cfg.dataset_spec()
    if not cfg["dataset.path"] and gx.shape[1] == spec.d:
        mae = label_consistency(gx, gy, spec)
    report = MetricsReport(res.centers, res.distances, res.mean_distance, mae, cfg.hash, cfg.seed,
                           res.starved)
    out = lay.path("reports", "metrics.json")
    report.write(out)
    _write_json(lay.path("reports", "eval.json"), _run_report(
        cfg, "eval", t0, real=str(real), fake=str(fake), metrics=json.loads(report.to_json())))
    print(report.to_json(), end="")
    return EXIT_OK


def cmd_verify(level: str, as_json: bool) -> int:
    results = checks.run_all(level)
    if as_json:
        print(json.dumps([{
            "name": r.name, "passed": r.passed, "skipped": r.skipped,
            "seconds": r.seconds, "limit_s": r.limit_s, "metrics": r.metrics,
        } for r in results], indent=2, default=float))
    else:
        for r in results:
            print(r.line())
        n_skip = sum(r.skipped for r in results)
        n_fail = sum(not r.passed for r in results)
        print(f"{len(results) - n_fail - n_skip} passed, {n_fail} failed, {n_skip} skipped")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="condedm", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("gen-data", "train"):
        sub.add_parser(name).add_argument("--config", required=True)
    s = sub.add_parser("sample")
    s.add_argument("--config", required=True)
    s.add_argument("--labels", required=True, help="comma list or lo:hi:n")
    s.add_argument("--per-label", type=int, default=1)
    s.add_argument("--sampler", default=None, help="ode or sde (default: sampler.kind)")
    e = sub.add_parser("eval")
    e.add_argument("--config", required=True)
    e.add_argument("--real", required=True)
    e.add_argument("--fake", required=True)
    v = sub.add_parser("verify")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--json", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.level, args.json)
        cfg = RunConfig.load(args.config)
        if args.command == "gen-data":
            return cmd_gen_data(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "sample":
            return cmd_sample(cfg, parse_labels(args.labels), args.per_label, args.sampler)
        return cmd_eval(cfg, args.real, args.fake)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
