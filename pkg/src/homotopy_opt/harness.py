"""Experiment orchestration: multi-seed runs, trace CSVs and comparison reports.

A single JSON config drives everything; every default is materialized into the
emitted metadata so a run can be replayed bit-identically from its metadata
file. Repeats use per-repeat PRNG streams seeded by master_seed XOR
repeat_index; arms (sgd vs hsgd) share the dataset and the initial point.
"""

from __future__ import annotations

import copy
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, datasets, diagnostics
from .core import (
    ConfigurationError,
    NonFiniteError,
    SgdConfig,
    _draw_minibatch,
    clamp_lambda,
    hsgd_run,
    make_rng,
    make_schedule,
    sgd_run,
    steps_per_epoch,
    stream_seed,
)
from .problems import (
    MLP_HIDDEN,
    MlpRegressionProblem,
    cubic_logistic_problem,
    erf_problem,
    mlp_sine_problem,
    quadratic_tracking_problem,
)

# Documented sub-seed salts (master_seed XOR salt) for auxiliary streams.
L_ESTIMATE_SALT = 0x1E57_17AD
MLP_INIT_SALT = 0x3141_5926
LQ_OFFSET_SALT = 0x0FF5_E75

CSV_HEADER = "epoch,lambda,mean_objective,std_objective,mean_gap,grad_evals"

EXPERIMENTS = ("toy-erf", "sine-mlp", "moons-logistic", "synthetic-lq")

DEFAULTS = {
    "toy-erf": {
        "dataset": {"N": 100, "slope": 3.0, "noise_std": 1.0, "seed": 40},
        "optimizer": {"alpha": "auto", "minibatch": 100, "k": 10, "n": 40,
                      "schedule": "exponential", "eta": 0.3, "sgd_budget_factor": 1},
        "problem": {"w0": -4.0, "L_radius": 10.0, "L_pairs": 2000,
                    "fstar_grid": {"lo": -10.0, "hi": 10.0, "step": 1e-4}},
        "threshold": None,
        "threshold_metric": "gap",
    },
    "sine-mlp": {
        "dataset": {"N": 500, "freq": 10.0, "noise_std": float(np.sqrt(0.1)), "seed": 6803},
        "optimizer": {"alpha": 0.05, "minibatch": 5, "k": 2000, "n": 20,
                      "schedule": "exponential", "eta": 0.5, "sgd_budget_factor": 2},
        "problem": {"L_radius": 2.0, "L_pairs": 500},
        "threshold": 0.1,
        "threshold_metric": "gap",
    },
    "moons-logistic": {
        "dataset": {"N": 1000, "noise_std": 0.1},
        "optimizer": {"alpha": 0.5, "minibatch": 20, "k": 250, "n": 20,
                      "schedule": "exponential", "eta": 0.5, "sgd_budget_factor": 1},
        "problem": {"L_radius": 3.0, "L_pairs": 500},
        "threshold": 0.1,
        "threshold_metric": "error",
    },
    "synthetic-lq": {
        "dataset": {"N": 64, "offset_std": 1.0},
        "optimizer": {"alpha": 0.1, "minibatch": 8, "k": 50, "n": 20,
                      "schedule": "constant", "eta": 0.2, "sgd_budget_factor": 1},
        "problem": {"mu": 1.0, "w0": 1.0},
        "threshold": None,
        "threshold_metric": "gap",
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    method: str = "both"
    dataset: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    problem: dict = field(default_factory=dict)
    repeats: int = 100
    master_seed: int = 20240
    threshold: float | None = None
    threshold_metric: str = "objective"
    out_dir: str = "runs"

    @classmethod
    def from_dict(cls, raw):
        raw = copy.deepcopy(raw)
        if "config" in raw:  # metadata file: replay its materialized config
            raw = raw["config"]
        experiment = raw.get("experiment")
        if experiment not in EXPERIMENTS:
            raise ConfigurationError(
                f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}"
            )
        defaults = copy.deepcopy(DEFAULTS[experiment])
        cfg = cls(
            experiment=experiment,
            method=raw.get("method", "both"),
            dataset={**defaults["dataset"], **raw.get("dataset", {})},
            optimizer={**defaults["optimizer"], **raw.get("optimizer", {})},
            problem={**defaults["problem"], **raw.get("problem", {})},
            repeats=int(raw.get("repeats", 100)),
            master_seed=int(raw.get("master_seed", 20240)),
            threshold=raw.get("threshold", defaults["threshold"]),
            threshold_metric=raw.get("threshold_metric", defaults["threshold_metric"]),
            out_dir=raw.get("out_dir", "runs"),
        )
        if cfg.method not in ("sgd", "hsgd", "both"):
            raise ConfigurationError(f"unknown method {cfg.method!r}")
        if cfg.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        cfg.dataset.setdefault("seed", cfg.master_seed)
        return cfg

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "method": self.method,
            "dataset": self.dataset,
            "optimizer": self.optimizer,
            "problem": self.problem,
            "repeats": self.repeats,
            "master_seed": self.master_seed,
            "threshold": self.threshold,
            "threshold_metric": self.threshold_metric,
            "out_dir": self.out_dir,
        }


def build_dataset(cfg: ExperimentConfig):
    ds = cfg.dataset
    if cfg.experiment == "toy-erf":
        return datasets.gen_linear_toy(ds["N"], ds["slope"], ds["noise_std"], ds["seed"])
    if cfg.experiment == "sine-mlp":
        return datasets.gen_sine(ds["N"], ds["freq"], ds["noise_std"], ds["seed"])
    if cfg.experiment == "moons-logistic":
        return datasets.gen_moons(ds["N"], ds["noise_std"], ds["seed"])
    if cfg.experiment == "synthetic-lq":
        rng = make_rng(ds["seed"] ^ LQ_OFFSET_SALT)
        offsets = ds["offset_std"] * rng.standard_normal(ds["N"])
        return datasets.Dataset(
            inputs=np.zeros((ds["N"], 1)), targets=offsets, seed=ds["seed"],
            spec={"generator": "lq_offsets", **{k: v for k, v in ds.items()}},
        )
    raise ConfigurationError(cfg.experiment)


def build_problem(cfg: ExperimentConfig, dataset):
    """Problem family plus the shared initial point for both arms."""
    if cfg.experiment == "toy-erf":
        x = dataset.inputs[:, 0]
        w0 = float(cfg.problem["w0"])
        problem = erf_problem(x, dataset.targets, w0 * x)
        return problem, np.array([w0])
    if cfg.experiment == "sine-mlp":
        x = dataset.inputs[:, 0]
        init_seed = cfg.problem.get("init_seed", cfg.master_seed ^ MLP_INIT_SALT)
        problem = mlp_sine_problem(x, dataset.targets, dataset.source_targets, init_spec=init_seed)
        return problem, problem.default_init()
    if cfg.experiment == "moons-logistic":
        problem = cubic_logistic_problem(dataset.inputs, dataset.targets)
        return problem, np.zeros(9)
    if cfg.experiment == "synthetic-lq":
        problem = quadratic_tracking_problem(cfg.problem["mu"], dataset.targets)
        return problem, np.array([float(cfg.problem["w0"])])
    raise ConfigurationError(cfg.experiment)


def resolve_alpha(cfg: ExperimentConfig, problem):
    """Return (alpha, L_tilde); 'auto' means alpha = 1/L_tilde at lambda = 1."""
    alpha = cfg.optimizer["alpha"]
    rng = make_rng(cfg.master_seed ^ L_ESTIMATE_SALT)
    L_tilde = diagnostics.estimate_L(
        problem, 1.0,
        num_pairs=int(cfg.problem.get("L_pairs", 500)),
        radius=float(cfg.problem.get("L_radius", 3.0)),
        rng=rng,
    )
    if alpha == "auto":
        return 1.0 / L_tilde, L_tilde
    return float(alpha), L_tilde


def _fstar_table(cfg: ExperimentConfig, problem, lambdas):
    """f*(lambda) per visited lambda where an oracle exists, else None."""
    if cfg.experiment == "synthetic-lq":
        return {float(lam): 0.0 for lam in lambdas}
    if cfg.experiment == "toy-erf":
        grid = cfg.problem["fstar_grid"]
        table = {}
        for lam in lambdas:
            est = diagnostics.estimate_fstar(problem, float(lam), {"kind": "grid", **grid})
            table[float(lam)] = est.value
        return table
    return None


def _sgd_total_steps(cfg_sgd, schedule, budget_factor=1):
    """SGD-arm budget: the H-SGD total n*k, scaled by the configured factor."""
    return int(round(cfg_sgd.steps * schedule.n * budget_factor))


def _run_repeat(problem, w0, method, schedule, cfg_sgd, seed, aux_fn=None, budget_factor=1):
    """One seeded repeat; returns (lambdas, objectives[, aux]) per epoch.

    ``aux_fn(w, lam)`` records a second per-epoch metric (classification error
    for the moons model, raw target-problem loss for the MLP).
    """
    rng = make_rng(seed)
    every = cfg_sgd.record_every
    total_steps = cfg_sgd.steps * schedule.n if method == "hsgd" else \
        _sgd_total_steps(cfg_sgd, schedule, budget_factor)
    n_epochs = total_steps // every
    lambdas = np.empty(n_epochs + 1)
    objectives = np.empty(n_epochs + 1)
    aux = np.empty(n_epochs + 1) if aux_fn is not None else None

    def sink(step, lam, w, fval):
        e = step // every
        lambdas[e] = lam
        objectives[e] = fval
        if aux is not None:
            aux[e] = aux_fn(w, lam)

    if method == "hsgd":
        lambdas[0] = 0.0
        objectives[0] = problem.full_objective(w0, 0.0)
        if aux is not None:
            aux[0] = aux_fn(w0, 0.0)
        hsgd_run(w0, schedule, cfg_sgd, problem, rng, sink=sink)
    else:
        lambdas[0] = 1.0
        objectives[0] = problem.full_objective(w0, 1.0)
        if aux is not None:
            aux[0] = aux_fn(w0, 1.0)
        flat = SgdConfig(cfg_sgd.alpha, total_steps, cfg_sgd.minibatch, record_every=every)
        sgd_run(w0, flat, problem, 1.0, rng, sink=sink)
    return lambdas, objectives, aux


def _run_repeats_mlp_batched(problem, w0, method, schedule, cfg_sgd, seeds, budget_factor=1):
    """All repeats of one MLP arm at once, vectorized across repeats.

    Each repeat keeps its own PRNG stream and draws the same per-step
    minibatches as the sequential path; only the arithmetic is batched, so the
    trajectories agree with ``_run_repeat`` up to matmul rounding. Divergence
    is detected at epoch granularity (the recorded objectives go non-finite).
    Returns the same list of (lambdas, objectives, aux) tuples.
    """
    R = len(seeds)
    N = problem.sample_count
    M = cfg_sgd.minibatch
    every = cfg_sgd.record_every
    alpha = cfg_sgd.alpha
    h = MLP_HIDDEN
    xs = problem.xs
    W1s, b1s, W2s, b2s, W3s, b3s = problem.unpack(np.asarray(w0, dtype=float))
    W1 = np.tile(W1s.ravel(), (R, 1))
    b1 = np.tile(b1s, (R, 1))
    W2 = np.tile(W2s, (R, 1, 1))
    b2 = np.tile(b2s, (R, 1))
    w3 = np.tile(W3s.ravel(), (R, 1))
    b3 = np.tile(b3s, (R, 1))
    rngs = [make_rng(s) for s in seeds]

    if method == "hsgd":
        segments = [(float(lam), cfg_sgd.steps) for lam in schedule.lambdas()]
        lam0 = 0.0
    else:
        segments = [(1.0, _sgd_total_steps(cfg_sgd, schedule, budget_factor))]
        lam0 = 1.0
    total_steps = sum(k for _, k in segments)
    n_epochs = total_steps // every
    lambdas = np.empty(n_epochs + 1)
    objectives = np.empty((R, n_epochs + 1))
    aux = np.empty((R, n_epochs + 1))
    y_target = problem.labels.y_target

    def batched_losses(y_cur):
        a1f = np.tanh(np.multiply.outer(xs, W1).transpose(1, 0, 2) + b1[:, None, :])
        a2f = np.tanh(a1f @ W2.transpose(0, 2, 1) + b2[:, None, :])
        outf = (a2f @ w3[:, :, None])[:, :, 0] + b3
        cur = np.mean((outf - y_cur) ** 2, axis=1)
        tgt = np.mean((outf - y_target) ** 2, axis=1)
        return cur, tgt

    lambdas[0] = lam0
    y0 = problem._interpolated_labels(lam0)
    objectives[:, 0], aux[:, 0] = batched_losses(y0)
    step = 0
    for lam, k in segments:
        y = problem._interpolated_labels(lam).copy()
        for _ in range(k):
            idx = np.stack([_draw_minibatch(rngs[r], N, M) for r in range(R)])
            xb = xs[idx]                                   # (R, M)
            yb = y[idx]
            a1 = np.tanh(xb[:, :, None] * W1[:, None, :] + b1[:, None, :])
            a2 = np.tanh(a1 @ W2.transpose(0, 2, 1) + b2[:, None, :])
            out = (a2 @ w3[:, :, None])[:, :, 0] + b3
            d_out = (2.0 / M) * (out - yb)                 # (R, M)
            d_a2 = d_out[:, :, None] * w3[:, None, :]
            d_a2 *= 1.0 - a2 * a2
            d_a1 = d_a2 @ W2
            d_a1 *= 1.0 - a1 * a1
            W1 -= alpha * (xb[:, None, :] @ d_a1)[:, 0, :]
            b1 -= alpha * d_a1.sum(axis=1)
            W2 -= alpha * (d_a2.transpose(0, 2, 1) @ a1)
            b2 -= alpha * d_a2.sum(axis=1)
            w3 -= alpha * (d_out[:, None, :] @ a2)[:, 0, :]
            b3 -= alpha * d_out.sum(axis=1, keepdims=True)
            step += 1
            if step % every == 0:
                e = step // every
                lambdas[e] = lam
                objectives[:, e], aux[:, e] = batched_losses(y)
                if not np.all(np.isfinite(objectives[:, e])):
                    bad = int(np.nonzero(~np.isfinite(objectives[:, e]))[0][0])
                    raise NonFiniteError(
                        f"non-finite objective by epoch {e} (repeat {bad})",
                        step=step, lam=lam,
                    )
    return [(lambdas, objectives[r], aux[r]) for r in range(R)]


def _thread_cap():
    raw = os.environ.get("HOMOTOPY_OPT_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def _map_repeats(fn, seeds):
    workers = min(_thread_cap(), len(seeds))
    if workers <= 1:
        return [fn(s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds))


class _RepeatTask:
    """Picklable per-repeat closure for the process pool."""

    def __init__(self, problem, w0, method, schedule, cfg_sgd, aux_fn, budget_factor):
        self.args = (problem, w0, method, schedule, cfg_sgd)
        self.aux_fn = aux_fn
        self.budget_factor = budget_factor

    def __call__(self, seed):
        return _run_repeat(*self.args, seed, aux_fn=self.aux_fn,
                           budget_factor=self.budget_factor)


def _fmt(value):
    return format(value, ".17g")


def write_trace_csv(path, epochs, lambdas, mean_obj, std_obj, mean_gap, grad_evals):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for e in range(len(epochs)):
            gap = "" if mean_gap is None else _fmt(mean_gap[e])
            fh.write(
                f"{epochs[e]},{_fmt(lambdas[e])},{_fmt(mean_obj[e])},"
                f"{_fmt(std_obj[e])},{gap},{grad_evals[e]}\n"
            )


@dataclass
class ArmResult:
    method: str
    epochs: np.ndarray
    lambdas: np.ndarray
    mean_objective: np.ndarray
    std_objective: np.ndarray
    mean_gap: np.ndarray | None
    mean_error: np.ndarray | None
    grad_evals: np.ndarray
    failed: bool = False
    failure: str = ""

    def metric_curve(self, metric):
        if metric == "gap":
            if self.mean_gap is None:
                raise ConfigurationError("no f* oracle for this experiment; gap metric unavailable")
            return self.mean_gap
        if metric == "error":
            if self.mean_error is None:
                raise ConfigurationError("error metric only exists for classification experiments")
            return self.mean_error
        return self.mean_objective


@dataclass
class ComparisonReport:
    experiment: str
    threshold: float | None
    threshold_metric: str
    arms: dict
    speedup: float | None = None
    speedup_note: str = ""

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "threshold": self.threshold,
            "threshold_metric": self.threshold_metric,
            "arms": self.arms,
            "speedup": self.speedup,
            "speedup_note": self.speedup_note,
        }


def epochs_to_threshold(curve, threshold):
    """First epoch index at which the mean curve is <= threshold, else None."""
    hit = np.nonzero(np.asarray(curve) <= threshold)[0]
    return int(hit[0]) if hit.size else None


def run_experiment(cfg: ExperimentConfig, quiet=True):
    """Execute all repeats per arm, write CSVs + metadata, return the report."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = build_dataset(cfg)
    problem, w0 = build_problem(cfg, dataset)
    alpha, L_tilde = resolve_alpha(cfg, problem)
    opt = cfg.optimizer
    minibatch = int(opt["minibatch"])
    every = steps_per_epoch(problem.sample_count, minibatch)
    cfg_sgd = SgdConfig(alpha, int(opt["k"]), minibatch, record_every=every)
    cfg_sgd.warn_if_out_of_range(L_tilde)
    schedule = make_schedule(opt["schedule"], int(opt["n"]),
                             eta=opt.get("eta"), explicit=opt.get("explicit"))
    budget_factor = float(opt.get("sgd_budget_factor", 1))
    # Second per-epoch metric: 0/1 error for classification, raw target-problem
    # loss for the MLP (it has no f* oracle; the gap column holds raw loss).
    aux_role = None
    aux_fn = None
    if hasattr(problem, "classification_error"):
        aux_role = "error"
        aux_fn = problem.classification_error
    elif cfg.experiment == "sine-mlp":
        aux_role = "target_objective"
        aux_fn = lambda w, lam: problem.full_objective(w, 1.0)  # noqa: E731
    fstar = _fstar_table(cfg, problem, np.concatenate([[0.0], schedule.lambdas(), [1.0]]))

    methods = ["sgd", "hsgd"] if cfg.method == "both" else [cfg.method]
    seeds = [stream_seed(cfg.master_seed, rep) for rep in range(cfg.repeats)]
    arms = {}
    arm_summaries = {}
    for method in methods:
        try:
            if isinstance(problem, MlpRegressionProblem):
                results = _run_repeats_mlp_batched(
                    problem, w0, method, schedule, cfg_sgd, seeds,
                    budget_factor=budget_factor)
            else:
                task = _RepeatTask(problem, w0, method, schedule, cfg_sgd,
                                   aux_fn, budget_factor)
                results = _map_repeats(task, seeds)
        except Exception as exc:  # arm failure leaves other arms unaffected
            arms[method] = ArmResult(method, np.array([]), np.array([]), np.array([]),
                                     np.array([]), None, None, np.array([]),
                                     failed=True, failure=str(exc))
            arm_summaries[method] = {"failed": True, "failure": str(exc)}
            continue
        lambdas = results[0][0]
        objs = np.stack([r[1] for r in results])
        auxs = np.stack([r[2] for r in results]) if aux_fn is not None else None
        epochs = np.arange(objs.shape[1])
        mean_obj = objs.mean(axis=0)
        std_obj = objs.std(axis=0)
        mean_err = auxs.mean(axis=0) if aux_role == "error" else None
        mean_gap = None
        if fstar is not None:
            mean_gap = mean_obj - np.array([fstar[float(l)] for l in lambdas])
        elif aux_role == "target_objective":
            mean_gap = auxs.mean(axis=0)
        grad_evals = epochs * every * minibatch
        arm = ArmResult(method, epochs, lambdas, mean_obj, std_obj, mean_gap,
                        mean_err, grad_evals)
        arms[method] = arm
        write_trace_csv(out / f"trace_{method}.csv", epochs, lambdas, mean_obj,
                        std_obj, mean_gap, grad_evals)
        if mean_err is not None:
            write_trace_csv(out / f"trace_{method}_error.csv", epochs, lambdas,
                            mean_err, auxs.std(axis=0), None, grad_evals)
        summary = {
            "failed": False,
            "terminal_mean_objective": float(mean_obj[-1]),
            "terminal_std_objective": float(std_obj[-1]),
            "epochs": int(epochs[-1]),
        }
        if cfg.threshold is not None:
            curve = arm.metric_curve(cfg.threshold_metric)
            hit = epochs_to_threshold(curve, cfg.threshold)
            summary["epochs_to_threshold"] = hit
            if hit is None:
                summary["censoring_epoch"] = int(epochs[-1])
        arm_summaries[method] = summary
        if method == "hsgd" and cfg.experiment in ("toy-erf", "sine-mlp"):
            _write_snapshots(out / "hsgd_snapshots.csv", problem, w0, schedule,
                             cfg_sgd, seeds[0])

    speedup = None
    note = ""
    if cfg.threshold is not None and "sgd" in arm_summaries and "hsgd" in arm_summaries:
        e_sgd = arm_summaries["sgd"].get("epochs_to_threshold")
        e_hsgd = arm_summaries["hsgd"].get("epochs_to_threshold")
        if e_sgd is not None and e_hsgd is not None and e_hsgd > 0:
            speedup = e_sgd / e_hsgd
        elif e_sgd is None and e_hsgd is not None:
            note = "sgd did not reach the threshold (censored at the budget)"
        elif e_hsgd is None:
            note = "hsgd did not reach the threshold"

    report = ComparisonReport(cfg.experiment, cfg.threshold, cfg.threshold_metric,
                              arm_summaries, speedup, note)
    metadata = {
        "config": cfg.to_dict(),
        "library_version": __version__,
        "L_tilde": L_tilde,
        "alpha_resolved": alpha,
        "steps_per_epoch": every,
        "repeat_seeds": seeds,
        "schedule_increments": [float(h) for h in schedule.increments],
    }
    with open(out / "metadata.json", "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    if not quiet:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return arms, report


def _write_snapshots(path, problem, w0, schedule, cfg_sgd, seed):
    """Per-homotopy-iteration snapshot of (lambda, objective, iterate), repeat 0."""
    rng = make_rng(seed)
    w = np.asarray(w0, dtype=float).copy()
    lam = 0.0
    rows = []
    quiet_cfg = SgdConfig(cfg_sgd.alpha, cfg_sgd.steps, cfg_sgd.minibatch)
    for i, dlam in enumerate(schedule.increments, start=1):
        lam = clamp_lambda(lam + dlam)
        w = sgd_run(w, quiet_cfg, problem, lam, rng, homotopy_iteration=i)
        rows.append((i, lam, problem.full_objective(w, lam), w.copy()))
    d = len(rows[0][3])
    header = "homotopy_iteration,lambda,objective," + ",".join(f"w{j}" for j in range(d))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for i, lam, fval, w in rows:
            fh.write(f"{i},{_fmt(lam)},{_fmt(fval)}," + ",".join(_fmt(v) for v in w) + "\n")


def run_diagnose(cfg: ExperimentConfig, lam=1.0, out_dir=None):
    """Measure landscape constants for the configured experiment at one lambda."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = build_dataset(cfg)
    problem, w0 = build_problem(cfg, dataset)
    est = diagnostics.LandscapeEstimates()
    rng = make_rng(cfg.master_seed ^ L_ESTIMATE_SALT)
    minibatch = int(cfg.optimizer["minibatch"])

    try:
        est.L_hat = diagnostics.estimate_L(
            problem, lam, int(cfg.problem.get("L_pairs", 500)),
            float(cfg.problem.get("L_radius", 3.0)), rng)
    except Exception as exc:
        est.errors["L_hat"] = str(exc)
    try:
        w_samples = [w0 + 0.5 * rng.standard_normal(problem.dimension) for _ in range(5)]
        est.sigma2_hat = diagnostics.estimate_sigma2(problem, lam, w_samples,
                                                     minibatch, 200, rng)
    except Exception as exc:
        est.errors["sigma2_hat"] = str(exc)
    try:
        if cfg.experiment == "toy-erf":
            spec = {"kind": "grid", **cfg.problem["fstar_grid"]}
        elif cfg.experiment == "synthetic-lq":
            spec = {"kind": "grid", "lo": -5.0, "hi": 5.0, "step": 1e-4}
        else:
            spec = {"kind": "multistart", "restarts": 10, "steps": 1500,
                    "alpha": 1.0 / est.L_hat if est.L_hat else 0.05,
                    "seed": cfg.master_seed, "init_center": w0}
        fstar = diagnostics.estimate_fstar(problem, lam, spec)
        est.fstar = fstar.value
        est.fstar_upper_bound_only = fstar.upper_bound_only
    except Exception as exc:
        est.errors["fstar"] = str(exc)
    try:
        est.delta_hat = diagnostics.estimate_delta(problem, 200, rng)
    except Exception as exc:
        est.errors["delta_hat"] = str(exc)
    if est.fstar is not None:
        try:
            est.pl_probe = diagnostics.expected_pl_probe(problem, lam, 500, est.fstar, rng)
        except Exception as exc:
            est.errors["pl_probe"] = str(exc)
        if problem.dimension == 1:
            grid = np.arange(-6.0, 6.0 + 1e-9, 0.05)
            mu_vals = np.full(grid.size, np.nan)
            for i, w in enumerate(grid):
                try:
                    mu_vals[i] = diagnostics.estimate_mu(problem, lam, np.array([w]), est.fstar)
                except diagnostics.EstimationError:
                    pass
            est.mu_grid, est.mu_values = grid, mu_vals
            with open(out / "mu_sweep.csv", "w", encoding="utf-8", newline="\n") as fh:
                fh.write("w,mu_hat\n")
                for w, m in zip(grid, mu_vals):
                    fh.write(f"{_fmt(w)},{'' if np.isnan(m) else _fmt(m)}\n")
    with open(out / "diagnostics.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(est.to_text())
    return est
