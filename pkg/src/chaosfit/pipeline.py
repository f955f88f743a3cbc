"""End-to-end runs: sample, simulate once, fit one expansion per target, validate.

A target is one (variable, time index) pair of a model's output.  Every
run is keyed by ``RunConfig.seed``: inputs, constraint samples, validation
inputs and surrogate Monte Carlo draws each use their own counter stream, so
sample sets of different sizes are prefixes of one another.
"""
from __future__ import annotations

import copy
import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from . import rng
from .basis import BasisFamily, MultiIndexSet, enumerate_multi_indices, evaluate_basis, norms_sq
from .models.innovation import InnovationConfig, simulate_innovation
from .models.oscillator import OscillatorConfig, simulate_oscillator
from .models.rlc import RlcConfig, simulate_rlc
from .models.synthetic import SyntheticConfig, simulate_synthetic
from .pcemodel import PceModel, empirical_stats
from .sampling import Distribution, DistributionSpec, SampleBatch, draw_samples
from .solver import (BoundRows, ConvergenceError, FitProblem, FitResult, SolverOptions,
                     pdf_weights, solve_least_squares, solve_pce, weight_ladder)

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A run was aborted; ``report`` says why."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


# ----------------------------------------------------------------- models --

@dataclass(frozen=True)
class ModelEntry:
    name: str
    variables: tuple
    make_config: Callable[[dict], object]
    simulate: Callable[[object, np.ndarray], dict]
    n_inputs: Callable[[object], int]
    distribution: Callable[[object], str]
    times: Callable[[object], np.ndarray]


def _synthetic_times(cfg: SyntheticConfig) -> np.ndarray:
    return np.arange(1, cfg.n_instants + 1, dtype=float)


MODELS = {
    "rlc": ModelEntry("rlc", ("i_L", "v_C"), lambda p: RlcConfig(**p),
                      lambda c, t: simulate_rlc(c, t, on_error="mask"),
                      lambda c: 13, lambda c: "uniform", lambda c: c.output_times),
    "innovation": ModelEntry("innovation", ("NI",), lambda p: InnovationConfig(**p),
                             lambda c, t: simulate_innovation(c, t, on_error="mask"),
                             lambda c: 12, lambda c: "normal", lambda c: c.periods.astype(float)),
    "oscillator": ModelEntry("oscillator", ("A_mean", "A_var"), lambda p: OscillatorConfig(**p),
                             simulate_oscillator, lambda c: 16, lambda c: "uniform",
                             lambda c: c.output_times),
    "synthetic": ModelEntry("synthetic", ("v",), lambda p: SyntheticConfig(**p), simulate_synthetic,
                            lambda c: c.n, lambda c: c.basis_family.distribution, _synthetic_times),
}

# fitting setups of the three case studies
MODEL_DEFAULTS = {
    "rlc": {"nu": 30, "max_degree": 2, "weights": {"ladder": [0.00025, 0.5, 1.0]}, "beta": 5.0,
            "variance": None, "positivity": 0,
            "validation": {"model_samples": 10000, "pce_samples": 10000},
            "convergence": {"schedule": list(range(5, 51)), "variable": "v_C", "time_index": 4}},
    "innovation": {"nu": 300, "max_degree": 3, "weights": {"w0": 1e-4, "exponent": 2}, "beta": 1e3,
                   "variance": {"rule": "multiple", "value": 2.0}, "positivity": 500,
                   "validation": {"model_samples": 20000, "pce_samples": 20000},
                   "convergence": {"schedule": list(range(100, 501, 50)), "variable": "NI", "time_index": 12}},
    "oscillator": {"nu": 100, "max_degree": 3, "weights": {"w0": 1e-4, "exponent": 3}, "beta": 1e3,
                   "variance": None, "positivity": 5000,
                   "validation": {"model_samples": 500, "pce_samples": 10000},
                   "convergence": {"schedule": [20, 40, 60, 80, 100], "variable": "A_mean", "time_index": 1}},
    "synthetic": {"nu": 40, "max_degree": 2, "weights": {"w0": 1e-4, "exponent": 1}, "beta": 1e3,
                  "variance": None, "positivity": 0,
                  "validation": {"model_samples": 10000, "pce_samples": 10000},
                  "convergence": {"schedule": list(range(5, 41, 5)), "variable": "v", "time_index": 0}},
}


# ----------------------------------------------------------------- config --

@dataclass
class RunConfig:
    """Everything one run needs; see :func:`load_config` for the file layout."""

    model: str = "rlc"
    model_params: dict = field(default_factory=dict)
    nu: int = 30
    max_degree: int = 2
    weights: dict = field(default_factory=lambda: {"w0": 1e-4, "exponent": 1})
    beta: float = 1e3
    pdf_normalize: str | None = "max"
    variance: dict | None = None  # {"rule": "absolute"|"multiple", "value": x}
    positivity: int = 0  # number of sampled non-negativity rows
    solver: dict = field(default_factory=dict)
    on_nonconvergence: str = "warn"
    seed: int = 2012
    out_dir: str = "results"
    max_failure_fraction: float = 0.05
    validation: dict = field(default_factory=lambda: {"model_samples": 10000, "pce_samples": 10000})
    bins: int = 100
    convergence: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {sorted(MODELS)}")
        if self.nu < 1:
            raise ValueError("nu must be at least 1")
        if self.variance is not None and self.variance.get("rule") not in ("absolute", "multiple"):
            raise ValueError("variance rule must be 'absolute' or 'multiple'")
        if self.on_nonconvergence not in ("warn", "raise"):
            raise ValueError("on_nonconvergence must be 'warn' or 'raise'")
        SolverOptions.from_mapping(self.solver)

    @classmethod
    def for_model(cls, model: str, **overrides) -> "RunConfig":
        """Defaults of the named case study, then ``overrides``."""
        if model not in MODEL_DEFAULTS:
            raise ValueError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
        base = copy.deepcopy(MODEL_DEFAULTS[model])
        for key in ("validation", "convergence"):
            if key in overrides and overrides[key] is not None:
                base[key] = {**base[key], **overrides.pop(key)}
        base.update(overrides)
        return cls(model=model, **base)

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        """Build from the nested file layout (sections ``model``, ``fit``, ...)."""
        data = copy.deepcopy(data or {})
        model = data.pop("model", {})
        if isinstance(model, str):
            model = {"name": model}
        flat: dict = {"model_params": model.get("params", {}) or {}}
        fit = data.pop("fit", {}) or {}
        for key in ("nu", "max_degree", "weights", "beta", "pdf_normalize", "on_nonconvergence"):
            if key in fit:
                flat[key] = fit.pop(key)
        cons = data.pop("constraints", {}) or {}
        for key in ("variance", "positivity"):
            if key in cons:
                flat[key] = cons.pop(key)
        if "solver" in data:
            flat["solver"] = data.pop("solver") or {}
        if "seed" in data:
            flat["seed"] = int(data.pop("seed"))
        out = data.pop("output", {}) or {}
        if "dir" in out:
            flat["out_dir"] = str(out.pop("dir"))
        sim = data.pop("simulation", {}) or {}
        if "max_failure_fraction" in sim:
            flat["max_failure_fraction"] = float(sim.pop("max_failure_fraction"))
        val = data.pop("validation", None)
        if val:
            if "bins" in val:
                flat["bins"] = int(val.pop("bins"))
            flat["validation"] = val
        conv = data.pop("convergence", None)
        if conv:
            flat["convergence"] = conv
        leftovers = [*data, *fit, *cons, *out, *sim]
        if leftovers:
            raise ValueError(f"unknown configuration keys: {sorted(leftovers)}")
        return cls.for_model(model.get("name", "rlc"), **flat)

    def to_mapping(self) -> dict:
        return {
            "model": {"name": self.model, "params": self.model_params},
            "fit": {"nu": self.nu, "max_degree": self.max_degree, "weights": self.weights,
                    "beta": self.beta, "pdf_normalize": self.pdf_normalize,
                    "on_nonconvergence": self.on_nonconvergence},
            "constraints": {"variance": self.variance, "positivity": self.positivity},
            "solver": self.solver,
            "seed": self.seed,
            "output": {"dir": self.out_dir},
            "simulation": {"max_failure_fraction": self.max_failure_fraction},
            "validation": {**self.validation, "bins": self.bins},
            "convergence": self.convergence,
        }

    # derived pieces
    @property
    def entry(self) -> ModelEntry:
        return MODELS[self.model]

    def model_config(self):
        params = dict(self.model_params)
        if self.model == "oscillator":
            params.setdefault("global_seed", self.seed)
        return self.entry.make_config(params)

    def distribution(self, model_config=None) -> DistributionSpec:
        mc = model_config if model_config is not None else self.model_config()
        return DistributionSpec(Distribution(self.entry.distribution(mc)), self.entry.n_inputs(mc))

    @property
    def family(self) -> BasisFamily:
        return BasisFamily.for_distribution(self.distribution().family.value)

    def index_set(self) -> MultiIndexSet:
        return enumerate_multi_indices(self.distribution().n, self.max_degree)

    def solver_options(self) -> SolverOptions:
        return SolverOptions.from_mapping(self.solver)


def load_config(path) -> RunConfig:
    """Read a YAML run file.

    Layout (every key optional; unset keys take the model's defaults)::

        model: {name: rlc, params: {L0: 1.0e-3}}
        fit: {nu: 30, max_degree: 2, weights: {ladder: [0.00025, 0.5, 1]}, beta: 5}
        constraints: {variance: {rule: multiple, value: 2}, positivity: 500}
        solver: {tol: 1.0e-8, max_iters: 50000, rho: 1.0}
        seed: 2012
        output: {dir: results}
        validation: {model_samples: 10000, pce_samples: 10000, bins: 100}
        convergence: {schedule: [5, 6, 7], variable: v_C, time_index: 4, threshold: 0.05}
    """
    with open(path) as fh:
        return RunConfig.from_mapping(yaml.safe_load(fh) or {})


# ------------------------------------------------------------- simulation --

@dataclass
class TrainingData:
    """Inputs and harvested outputs of one batch of model runs."""

    batch: SampleBatch
    outputs: dict  # variable -> (m, n_times)
    times: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        """Rows whose every output is finite."""
        good = np.ones(len(self.batch), dtype=bool)
        for arr in self.outputs.values():
            good &= np.all(np.isfinite(arr), axis=1)
        return good

    def prefix(self, count: int) -> "TrainingData":
        b = self.batch
        sub = SampleBatch(b.samples[:count], b.seed, b.pdf_values[:count], b.start, b.stream)
        return TrainingData(sub, {k: v[:count] for k, v in self.outputs.items()}, self.times)

    def to_long_csv(self, path) -> None:
        """Rows ``sample_index, variable, time_index, value``."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["sample_index", "variable", "time_index", "value"])
            for var, arr in self.outputs.items():
                for i in range(arr.shape[0]):
                    for j in range(arr.shape[1]):
                        wr.writerow([self.batch.start + i, var, j, repr(float(arr[i, j]))])


def simulate(config: RunConfig, theta, model_config=None) -> dict:
    """Run the configured model on each row of ``theta``; failures come back NaN."""
    mc = model_config if model_config is not None else config.model_config()
    return config.entry.simulate(mc, np.atleast_2d(np.asarray(theta, dtype=float)))


def harvest(config: RunConfig, count: int, stream: int = rng.STREAM_INPUTS, start: int = 0) -> TrainingData:
    """Draw ``count`` keyed inputs and simulate each once.

    All variables and time instants come from the same runs.  Raises
    :class:`PipelineError` if more than ``max_failure_fraction`` fail.
    """
    mc = config.model_config()
    batch = draw_samples(config.distribution(mc), count, config.seed, start=start, stream=stream)
    outputs = simulate(config, batch.samples, mc) if count else {
        v: np.empty((0, len(config.entry.times(mc)))) for v in config.entry.variables}
    data = TrainingData(batch, outputs, np.asarray(config.entry.times(mc), dtype=float))
    n_bad = int(np.sum(~data.ok))
    if n_bad:
        frac = n_bad / max(count, 1)
        log.warning("%d of %d simulations failed and are excluded", n_bad, count)
        if frac > config.max_failure_fraction:
            raise PipelineError(
                f"{n_bad} of {count} simulations failed (limit {config.max_failure_fraction:.1%})",
                {"failed_samples": [int(i) + start for i in np.flatnonzero(~data.ok)], "count": count})
    return data


def constraint_rows(config: RunConfig) -> np.ndarray | None:
    """Basis rows at fresh samples for the non-negativity constraints."""
    if not config.positivity:
        return None
    batch = draw_samples(config.distribution(), config.positivity, config.seed, stream=rng.STREAM_CONSTRAINTS)
    return evaluate_basis(config.index_set(), config.family, batch.samples)


# ---------------------------------------------------------------- fitting --

@dataclass
class FitOutcome:
    model: PceModel
    result: FitResult
    converged: bool


def build_problem(config: RunConfig, theta, pdf_values, data, bound_rows=None) -> FitProblem:
    idx = config.index_set()
    design = evaluate_basis(idx, config.family, theta)
    w = weight_ladder(idx, **config.weights)
    lam = pdf_weights(pdf_values, config.pdf_normalize)
    var_bound = None
    if config.variance is not None:
        value = float(config.variance["value"])
        var_bound = value if config.variance["rule"] == "absolute" else value * float(np.var(data, ddof=1))
    bounds = BoundRows.nonnegative(bound_rows) if bound_rows is not None else None
    return FitProblem(design, data, w, lam, config.beta, norms_sq(idx, config.family), var_bound, bounds)


def fit_target(config: RunConfig, data: TrainingData, variable: str, time_index: int,
               bound_rows=None) -> FitOutcome:
    ok = data.ok
    y = data.outputs[variable][ok, time_index]
    problem = build_problem(config, data.batch.samples[ok], data.batch.pdf_values[ok], y, bound_rows)
    converged = True
    try:
        result = solve_pce(problem, config.solver_options())
    except ConvergenceError as exc:
        if config.on_nonconvergence == "raise":
            raise
        log.warning("%s[%d]: %s; keeping the last iterate", variable, time_index, exc)
        result, converged = exc.result, False
    return FitOutcome(PceModel(config.index_set(), config.family, result.coefficients), result, converged)


def targets(config: RunConfig, data: TrainingData):
    return [(v, j) for v in config.entry.variables for j in range(len(data.times))]


@dataclass
class PipelineResult:
    models: dict  # (variable, time_index) -> PceModel
    fits: dict  # (variable, time_index) -> FitOutcome
    data: TrainingData
    report: dict


def run_pipeline(config: RunConfig, write: bool = True) -> PipelineResult:
    """Sample, simulate ``nu`` times, fit every target, optionally write results."""
    data = harvest(config, config.nu)
    rows = constraint_rows(config)
    fits = {t: fit_target(config, data, *t, bound_rows=rows) for t in targets(config, data)}
    report = {
        "model": config.model,
        "nu": config.nu,
        "simulations": len(data.batch),
        "failed_samples": [int(i) for i in np.flatnonzero(~data.ok)],
        "n_terms": len(config.index_set()),
        "fits": [_fit_row(v, j, data.times[j], f) for (v, j), f in fits.items()],
    }
    result = PipelineResult({t: f.model for t, f in fits.items()}, fits, data, report)
    if write:
        write_pipeline(config, result)
    return result


def _fit_row(variable, j, time, f: FitOutcome) -> dict:
    r = f.result
    return {"variable": variable, "time_index": int(j), "time": float(time), "converged": f.converged,
            "iterations": int(r.iterations), "objective": float(r.objective),
            "primal_residual": float(r.primal_residual), "dual_residual": float(r.dual_residual),
            "constraint_violation": float(r.constraint_violation),
            "nonzeros": int(np.count_nonzero(r.coefficients)),
            "mean": f.model.mean(), "variance": f.model.variance()}


def model_filename(variable: str, time_index: int) -> str:
    return f"{variable}_t{time_index:02d}.pce"


def write_pipeline(config: RunConfig, result: PipelineResult) -> Path:
    out = Path(config.out_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    write_yaml(out / "config.yaml", config.to_mapping())
    result.data.batch.to_csv(out / "samples.csv")
    result.data.to_long_csv(out / "simulations.csv")
    for (v, j), m in result.models.items():
        m.save(out / "models" / model_filename(v, j))
    write_rows(out / "moments.csv", [{k: r[k] for k in ("variable", "time_index", "time", "mean", "variance")}
                                     for r in result.report["fits"]])
    write_json(out / "report.json", result.report)
    return out


def load_models(directory) -> dict:
    """``(variable, time_index) -> PceModel`` from a ``models/`` directory."""
    models = {}
    for path in sorted(Path(directory).glob("*.pce")):
        var, _, t = path.stem.rpartition("_t")
        models[(var, int(t))] = PceModel.load(path)
    return models


# ------------------------------------------------------------- validation --

def validate(models: dict, config: RunConfig, model_samples: int | None = None,
             pce_samples: int | None = None, bins: int | None = None) -> dict:
    """Compare surrogate statistics with direct Monte Carlo of the model.

    Returns ``{"rows": [...], "histograms": [...], "failed": n}``; each row
    holds mean, variance and quartiles from both sources plus relative
    errors.  With ``model_samples = 0`` only surrogate statistics appear.
    """
    val = config.validation
    m_model = int(val.get("model_samples", 10000) if model_samples is None else model_samples)
    m_pce = int(val.get("pce_samples", 10000) if pce_samples is None else pce_samples)
    bins = config.bins if bins is None else bins
    mc_data = None
    if m_model:
        mc_data = harvest(replace(config, max_failure_fraction=1.0), m_model, stream=rng.STREAM_VALIDATION)
    rows, hists = [], []
    for (var, j), model in sorted(models.items()):
        row = {"variable": var, "time_index": int(j), "mean_exact": model.mean(), "variance_exact": model.variance()}
        pce_vals = model.mc_over_pce(m_pce, config.seed)
        sources = {"pce": pce_vals}
        if mc_data is not None:
            x = mc_data.outputs[var][:, j]
            sources["mc"] = x[np.isfinite(x)]
        for name, x in sources.items():
            if x.size == 0:
                continue
            st = empirical_stats(x, bins)
            row.update({f"{k}_{name}": val_ for k, val_ in st.to_dict().items()})
            for lo, hi, dens in zip(st.edges[:-1], st.edges[1:], st.density):
                hists.append({"variable": var, "time_index": int(j), "source": name,
                              "bin_left": float(lo), "bin_right": float(hi), "density": float(dens)})
        if "mean_mc" in row:
            for k in ("mean", "variance", "q25", "median", "q75"):
                ref = row[f"{k}_mc"]
                row[f"relerr_{k}"] = abs(row[f"{k}_pce"] - ref) / abs(ref) if ref != 0 else float("inf")
        rows.append(row)
    failed = int(np.sum(~mc_data.ok)) if mc_data is not None else 0
    return {"rows": rows, "histograms": hists, "failed": failed, "model_samples": m_model, "pce_samples": m_pce}


def write_validation(out_dir, report: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "validation.csv", report["rows"])
    write_rows(out / "histograms.csv", report["histograms"])


# ------------------------------------------------------------ convergence --

@dataclass
class ConvergenceReport:
    nus: list
    coefficients: list
    distances: list  # distances[i] = ||a(nus[i+1]) - a(nus[i])||_inf
    chosen_nu: int | None
    variable: str
    time_index: int
    threshold: float

    def to_dict(self) -> dict:
        return {"variable": self.variable, "time_index": self.time_index, "threshold": self.threshold,
                "nus": list(map(int, self.nus)), "distances": list(map(float, self.distances)),
                "chosen_nu": self.chosen_nu,
                "coefficients": [list(map(float, a)) for a in self.coefficients]}


def plateau_nu(nus, coefficients, distances, threshold: float) -> int | None:
    """First ``nu`` after which two consecutive distances stay below
    ``threshold * ||a(nu)||_inf``."""
    below = [d < threshold * np.max(np.abs(coefficients[i])) for i, d in enumerate(distances)]
    for i in range(len(below) - 1):
        if below[i] and below[i + 1]:
            return int(nus[i])
    return None


def convergence_study(config: RunConfig, schedule=None, variable: str | None = None,
                      time_index: int | None = None, threshold: float | None = None) -> ConvergenceReport:
    """Refit one target on growing nested sample sets and track coefficient changes.

    The simulations for the largest ``nu`` are run once; smaller sets are
    prefixes of it.
    """
    conv = config.convergence
    schedule = list(conv.get("schedule") or [config.nu]) if schedule is None else list(schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    variable = conv.get("variable", config.entry.variables[0]) if variable is None else variable
    time_index = int(conv.get("time_index", 0) if time_index is None else time_index)
    threshold = float(conv.get("threshold", 0.05) if threshold is None else threshold)
    full = harvest(config, max(schedule))
    rows = constraint_rows(config)
    coefs = [fit_target(config, full.prefix(nu), variable, time_index, rows).result.coefficients
             for nu in schedule]
    dist = [float(np.max(np.abs(b - a))) for a, b in zip(coefs, coefs[1:])]
    return ConvergenceReport(schedule, coefs, dist, plateau_nu(schedule, coefs, dist, threshold),
                             variable, time_index, threshold)


# ---------------------------------------------------------- least squares --

def ls_comparison(config: RunConfig, data: TrainingData | None = None) -> dict:
    """Fit the convex program and plain least squares on the same runs.

    Returns per-target rows with each surrogate's exact mean and variance,
    plus both model dictionaries.
    """
    data = harvest(config, config.nu) if data is None else data
    rows_b = constraint_rows(config)
    idx, fam = config.index_set(), config.family
    ok = data.ok
    design = evaluate_basis(idx, fam, data.batch.samples[ok])
    out_rows, convex, lsq = [], {}, {}
    for var, j in targets(config, data):
        fit = fit_target(config, data, var, j, rows_b)
        ls = PceModel(idx, fam, solve_least_squares(design, data.outputs[var][ok, j]))
        convex[(var, j)], lsq[(var, j)] = fit.model, ls
        out_rows.append({"variable": var, "time_index": j, "mean_convex": fit.model.mean(),
                         "mean_ls": ls.mean(), "variance_convex": fit.model.variance(),
                         "variance_ls": ls.variance()})
    return {"rows": out_rows, "convex": convex, "ls": lsq}


# -------------------------------------------------------------------- io --

def write_rows(path, rows: list) -> None:
    """CSV with columns taken from the first row."""
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_yaml(path, obj) -> None:
    Path(path).write_text(yaml.safe_dump(obj, sort_keys=True))
