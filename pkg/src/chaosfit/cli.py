"""Command-line front end.

    chaosfit [--config run.yaml] [--seed N] [--out DIR] <command> [options]

Commands: sample, simulate, fit, moments, mc, validate, converge, kl,
compare-ls.  Tables are written as CSV, reports as JSON, under ``--out``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .klexpand import ExpCovarianceSpec, build_kl_basis, frequency_residuals, reconstruct_covariance
from .models import SimulationError
from .pcemodel import empirical_stats
from .sampling import SampleBatch, draw_samples
from .solver import ConvergenceError, InfeasibleError

log = logging.getLogger("chaosfit")


def _config(args) -> pl.RunConfig:
    cfg = pl.load_config(args.config) if args.config else pl.RunConfig.for_model(args.model or "rlc")
    if args.model and args.config and args.model != cfg.model:
        raise ValueError(f"--model {args.model} conflicts with the config file ({cfg.model})")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    return replace(cfg, **changes) if changes else cfg


def _out(cfg: pl.RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _models(cfg: pl.RunConfig, path) -> dict:
    directory = Path(path) if path else Path(cfg.out_dir) / "models"
    models = pl.load_models(directory)
    if not models:
        raise FileNotFoundError(f"no .pce files in {directory}")
    return models


def cmd_sample(args, cfg):
    batch = draw_samples(cfg.distribution(), args.count, cfg.seed, start=args.start)
    path = _out(cfg) / "samples.csv"
    batch.to_csv(path)
    print(path)


def cmd_simulate(args, cfg):
    src = Path(args.samples) if args.samples else Path(cfg.out_dir) / "samples.csv"
    batch = SampleBatch.from_csv(src)
    mc = cfg.model_config()
    outputs = pl.simulate(cfg, batch.samples, mc)
    data = pl.TrainingData(batch, outputs, np.asarray(cfg.entry.times(mc), dtype=float))
    n_bad = int(np.sum(~data.ok))
    if n_bad:
        log.warning("%d of %d simulations failed (NaN rows)", n_bad, len(batch))
    path = _out(cfg) / "simulations.csv"
    data.to_long_csv(path)
    print(path)


def cmd_fit(args, cfg):
    if args.nu is not None:
        cfg = replace(cfg, nu=args.nu)
    result = pl.run_pipeline(cfg)
    bad = [r for r in result.report["fits"] if not r["converged"]]
    print(f"{len(result.models)} expansions written to {Path(cfg.out_dir) / 'models'}"
          + (f" ({len(bad)} stopped at max_iters)" if bad else ""))


def cmd_moments(args, cfg):
    models = _models(cfg, args.models)
    rows = [{"variable": v, "time_index": j, "mean": m.mean(), "variance": m.variance()}
            for (v, j), m in sorted(models.items())]
    pl.write_rows(_out(cfg) / "moments.csv", rows)
    json.dump(rows, sys.stdout, indent=1)
    print()


def cmd_mc(args, cfg):
    models = _models(cfg, args.models)
    out = _out(cfg)
    rows, stats = [], []
    for (v, j), m in sorted(models.items()):
        vals = m.mc_over_pce(args.count, cfg.seed)
        rows.extend({"sample_index": i, "variable": v, "time_index": j, "value": float(x)}
                    for i, x in enumerate(vals))
        if vals.size:
            stats.append({"variable": v, "time_index": j, **empirical_stats(vals, cfg.bins).to_dict()})
    pl.write_rows(out / "surrogate_samples.csv", rows)
    pl.write_rows(out / "surrogate_stats.csv", stats)
    print(out / "surrogate_samples.csv")


def cmd_validate(args, cfg):
    models = _models(cfg, args.models)
    report = pl.validate(models, cfg, args.model_samples, args.pce_samples)
    out = _out(cfg)
    pl.write_validation(out, report)
    pl.write_json(out / "validation.json", {k: v for k, v in report.items() if k != "histograms"})
    print(out / "validation.csv")


def cmd_converge(args, cfg):
    schedule = None
    if args.schedule:
        schedule = _parse_schedule(args.schedule)
    rep = pl.convergence_study(cfg, schedule, args.variable, args.time_index, args.threshold)
    out = _out(cfg)
    pl.write_json(out / "convergence.json", rep.to_dict())
    pl.write_rows(out / "convergence.csv", [{"nu": int(n), "distance": d} for n, d in zip(rep.nus, rep.distances)])
    print(f"chosen nu: {rep.chosen_nu}")


def _parse_schedule(text: str) -> list:
    """``"5:50"``, ``"5:50:5"`` or ``"10,20,40"``."""
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        lo, hi, step = (parts + [1])[:3]
        return list(range(lo, hi + 1, step))
    return [int(p) for p in text.split(",")]


def cmd_kl(args, cfg):
    spec = ExpCovarianceSpec(args.sigma, args.mu, args.T)
    basis = build_kl_basis(spec, args.terms)
    out = _out(cfg)
    basis.save(out / "kl_basis.txt")
    grid = np.linspace(-spec.T, spec.T, args.grid)
    t1, t2 = np.meshgrid(grid, grid, indexing="ij")
    exact = spec.covariance(t1, t2)
    rows = []
    for count in range(1, args.terms + 1):
        err = np.abs(reconstruct_covariance(basis, t1, t2, count) - exact)
        rows.append({"terms": count, "max_abs_error": float(err.max())})
    pl.write_rows(out / "kl_covariance_error.csv", rows)
    res = frequency_residuals(spec, basis.omegas, basis.odd)
    pl.write_rows(out / "kl_terms.csv", [
        {"index": i + 1, "parity": "odd" if o else "even", "omega": float(w), "eigenvalue": float(lam),
         "residual": float(r)} for i, (w, o, lam, r) in enumerate(zip(basis.omegas, basis.odd, basis.lambdas, res))])
    print(out / "kl_basis.txt")


def cmd_compare_ls(args, cfg):
    rep = pl.ls_comparison(cfg)
    out = _out(cfg)
    pl.write_rows(out / "compare_ls.csv", rep["rows"])
    print(out / "compare_ls.csv")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chaosfit", description="Sparse polynomial chaos fitting by convex optimization.")
    p.add_argument("--config", help="YAML run file")
    p.add_argument("--seed", type=int, help="global seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--model", choices=sorted(pl.MODELS), help="case study to use when no config is given")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="draw keyed input samples")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--start", type=int, default=0)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("simulate", help="run the model on a samples CSV")
    s.add_argument("--samples", help="input CSV (default OUT/samples.csv)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="sample, simulate and fit every target")
    s.add_argument("--nu", type=int)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("moments", help="exact mean and variance of fitted expansions")
    s.add_argument("--models", help="directory of .pce files (default OUT/models)")
    s.set_defaults(func=cmd_moments)

    s = sub.add_parser("mc", help="Monte Carlo over the fitted expansions")
    s.add_argument("--models")
    s.add_argument("--count", type=int, default=10000)
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("validate", help="compare expansions against direct Monte Carlo")
    s.add_argument("--models")
    s.add_argument("--model-samples", type=int)
    s.add_argument("--pce-samples", type=int)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("converge", help="coefficient distance as the sample count grows")
    s.add_argument("--schedule", help='"lo:hi[:step]" or a comma list')
    s.add_argument("--variable")
    s.add_argument("--time-index", type=int)
    s.add_argument("--threshold", type=float)
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("kl", help="Karhunen-Loeve basis of the exponential covariance")
    s.add_argument("--terms", type=int, default=10)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--mu", type=float, default=50.0)
    s.add_argument("--T", type=float, default=0.02)
    s.add_argument("--grid", type=int, default=50)
    s.set_defaults(func=cmd_kl)

    s = sub.add_parser("compare-ls", help="convex fit versus least squares on the same runs")
    s.set_defaults(func=cmd_compare_ls)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except (ValueError, KeyError, OSError, pl.PipelineError, SimulationError, ConvergenceError,
            InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
