"""Inner SGD solver, outer homotopy loop and homotopy-parameter schedules.

The optimizer minimizes a parametric family f(w, lambda) exposed through the
``HomotopyProblem`` interface: the inner loop is plain constant-step SGD on
f(., lambda), the outer loop increases lambda from 0 to 1 according to a
schedule whose increments sum to one, warm-starting each inner solve from the
previous approximate solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

SUM_TOL = 1e-12


def clamp_lambda(lam):
    """Snap an accumulated homotopy parameter onto [0, 1].

    Left-to-right summation of valid increments can overshoot the endpoints
    by a few ulps; anything further out than SUM_TOL is a real error and is
    left alone for the callers' range checks to reject.
    """
    if 1.0 < lam <= 1.0 + SUM_TOL:
        return 1.0
    if -SUM_TOL <= lam < 0.0:
        return 0.0
    return lam


class ConfigurationError(ValueError):
    """Invalid optimizer, schedule or experiment configuration."""


class NonFiniteError(RuntimeError):
    """A gradient or iterate became NaN/Inf; carries the offending step index."""

    def __init__(self, message, step=None, homotopy_iteration=None, lam=None):
        super().__init__(message)
        self.step = step
        self.homotopy_iteration = homotopy_iteration
        self.lam = lam


@dataclass
class SgdConfig:
    """Constant step-size SGD configuration.

    ``record_every`` controls how often (in steps) the trace sink is invoked;
    None disables recording even when a sink is supplied.
    """

    alpha: float
    steps: int
    minibatch: int
    record_every: int | None = None

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ConfigurationError(f"step size must be positive, got {self.alpha}")
        if self.steps < 1:
            raise ConfigurationError(f"step count must be >= 1, got {self.steps}")
        if self.minibatch < 1:
            raise ConfigurationError(f"minibatch size must be >= 1, got {self.minibatch}")
        if self.record_every is not None and self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1 when set")

    def step_size_in_range(self, smoothness_estimate):
        """True when alpha <= 1/L_tilde, the range the convergence analysis covers."""
        return self.alpha <= 1.0 / smoothness_estimate

    def warn_if_out_of_range(self, smoothness_estimate):
        if not self.step_size_in_range(smoothness_estimate):
            warnings.warn(
                f"step size {self.alpha} exceeds 1/L_tilde = {1.0 / smoothness_estimate:.6g}; "
                "convergence guarantees do not apply",
                stacklevel=2,
            )


@dataclass(frozen=True)
class Schedule:
    """Homotopy increments h(1..n) with sum(h) = 1 and every h(i) in (0, 1]."""

    kind: str
    n: int
    increments: np.ndarray
    eta: float | None = None

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        object.__setattr__(self, "increments", inc)
        if inc.shape != (self.n,):
            raise ConfigurationError(f"expected {self.n} increments, got shape {inc.shape}")
        if np.any(inc <= 0) or np.any(inc > 1):
            raise ConfigurationError("schedule increments must lie in (0, 1]")
        if abs(inc.sum() - 1.0) > SUM_TOL:
            raise ConfigurationError(f"schedule increments sum to {inc.sum()!r}, expected 1")

    def lambdas(self):
        """The lambda values visited by the outer loop.

        Accumulated with the same left-to-right summation the outer loop uses,
        so the values match the run bit for bit.
        """
        out = np.empty(self.n)
        lam = 0.0
        for i, h in enumerate(self.increments):
            lam = clamp_lambda(lam + h)
            out[i] = lam
        return out


def make_schedule(kind, n, eta=None, explicit=None, epsilon1=None):
    """Build a homotopy schedule of the given kind.

    constant:    h(i) = 1/n.
    exponential: geometric weights e^(-eta*i) renormalized to sum 1; a warning
                 is emitted when a normalized increment exceeds the raw cap
                 e^(-eta*(i-1)) or a user-supplied epsilon1.
    explicit:    positive entries, normalized to sum 1.
    """
    if n < 1:
        raise ConfigurationError(f"schedule length must be >= 1, got n={n}")
    if kind == "constant":
        return Schedule("constant", n, np.full(n, 1.0 / n))
    if kind == "exponential":
        if eta is None or eta < 0:
            raise ConfigurationError("exponential schedule requires eta >= 0")
        # e^(-eta*i) / sum_j e^(-eta*j), computed with the common factor cancelled
        weights = np.exp(-eta * np.arange(1, n + 1, dtype=float))
        inc = weights / weights.sum()
        raw_caps = np.exp(-eta * np.arange(0, n, dtype=float))
        if epsilon1 is not None:
            raw_caps = np.minimum(raw_caps, epsilon1)
        if np.any(inc > raw_caps * (1 + 1e-12)):
            warnings.warn(
                "normalized exponential increments exceed the raw decay cap "
                "min{e^(-eta*(i-1)), epsilon1} for some i",
                stacklevel=2,
            )
        return Schedule("exponential", n, inc, eta=eta)
    if kind == "explicit":
        if explicit is None:
            raise ConfigurationError("explicit schedule requires the increment list")
        entries = np.asarray(explicit, dtype=float)
        if entries.shape != (n,):
            raise ConfigurationError(f"expected {n} explicit entries, got shape {entries.shape}")
        if np.any(entries <= 0):
            raise ConfigurationError("explicit schedule entries must be positive")
        return Schedule("explicit", n, entries / entries.sum())
    raise ConfigurationError(f"unknown schedule kind {kind!r}")


def _draw_minibatch(rng, sample_count, minibatch):
    if minibatch == sample_count:
        # Still consumes one draw so the stream advances identically for all M.
        return rng.permutation(sample_count)
    return rng.choice(sample_count, size=minibatch, replace=False)


def sgd_run(w0, cfg, problem, lam, rng, sink=None, step_offset=0, homotopy_iteration=None):
    """Run exactly cfg.steps iterates of w <- w - alpha * g(w, xi, lambda).

    Each g is the mean gradient over a minibatch of cfg.minibatch distinct
    sample indices drawn from ``rng``. ``sink``, when present, is called as
    sink(global_step, lam, w, full_objective) at multiples of cfg.record_every.
    Raises NonFiniteError naming the step on NaN/Inf gradients or iterates.
    """
    w = np.asarray(w0, dtype=float).copy()
    if w.ndim != 1 or w.shape[0] != problem.dimension:
        raise ConfigurationError(
            f"initial point has shape {w.shape}, problem dimension is {problem.dimension}"
        )
    if cfg.minibatch > problem.sample_count:
        raise ConfigurationError(
            f"minibatch size {cfg.minibatch} exceeds sample count {problem.sample_count}"
        )
    where = "" if homotopy_iteration is None else f" (homotopy iteration {homotopy_iteration}, lambda={lam})"
    alpha = cfg.alpha
    minibatch = cfg.minibatch
    sample_count = problem.sample_count
    value_and_gradient = problem.minibatch_value_and_gradient
    record = sink is not None and cfg.record_every is not None
    for t in range(1, cfg.steps + 1):
        indices = _draw_minibatch(rng, sample_count, minibatch)
        _, grad = value_and_gradient(w, lam, indices)
        # Cheap screen first: a finite squared norm certifies a finite vector,
        # so the elementwise isfinite scan only runs on suspect steps.
        if not math.isfinite(float(grad @ grad)) and not np.all(np.isfinite(grad)):
            raise NonFiniteError(
                f"non-finite gradient at step {step_offset + t}{where}",
                step=step_offset + t,
                homotopy_iteration=homotopy_iteration,
                lam=lam,
            )
        w = w - alpha * grad
        if not math.isfinite(float(w @ w)) and not np.all(np.isfinite(w)):
            raise NonFiniteError(
                f"non-finite iterate at step {step_offset + t}{where}",
                step=step_offset + t,
                homotopy_iteration=homotopy_iteration,
                lam=lam,
            )
        if record:
            global_step = step_offset + t
            if global_step % cfg.record_every == 0:
                sink(global_step, lam, w, problem.full_objective(w, lam))
    return w


def hsgd_run(w0, schedule, cfg, problem, rng, sink=None):
    """Outer homotopy loop: lambda_0 = 0, lambda_i += h(i), warm-started SGD.

    Returns w_n, the approximate solution of the lambda = 1 problem. The same
    continuing ``rng`` stream feeds all inner solves.
    """
    w = np.asarray(w0, dtype=float).copy()
    lam = 0.0
    step_offset = 0
    for i, dlam in enumerate(schedule.increments, start=1):
        lam = clamp_lambda(lam + dlam)
        w = sgd_run(
            w, cfg, problem, lam, rng,
            sink=sink, step_offset=step_offset, homotopy_iteration=i,
        )
        step_offset += cfg.steps
    if abs(lam - 1.0) > SUM_TOL:
        raise ConfigurationError(f"final homotopy parameter {lam!r} differs from 1")
    return w


def stream_seed(master_seed, repeat_index):
    """Documented per-repeat sub-seeding rule: master_seed XOR repeat_index."""
    return int(master_seed) ^ int(repeat_index)


def make_rng(seed):
    """The fixed PRNG used everywhere: PCG64, normals via numpy's ziggurat."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def steps_per_epoch(sample_count, minibatch):
    """One epoch = ceil(N/M) minibatch steps."""
    return math.ceil(sample_count / minibatch)
