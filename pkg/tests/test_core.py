"""Inner SGD solver and outer homotopy loop behavior."""

import warnings

import numpy as np
import pytest

from homotopy_opt import diagnostics
from homotopy_opt.core import (
    ConfigurationError,
    NonFiniteError,
    SgdConfig,
    clamp_lambda,
    hsgd_run,
    make_rng,
    make_schedule,
    sgd_run,
    steps_per_epoch,
    stream_seed,
)
from homotopy_opt.problems import HomotopyProblem


class NoiselessQuadratic(HomotopyProblem):
    """f(w, lam) = a/2 * w^2 with an exact (zero-variance) oracle."""

    def __init__(self, a=1.0, samples=4):
        self.a = a
        self.dimension = 1
        self.sample_count = samples

    def full_objective(self, w, lam):
        w = np.atleast_1d(w)
        return float(0.5 * self.a * w[0] ** 2)

    def minibatch_value_and_gradient(self, w, lam, indices):
        w = np.atleast_1d(w)
        return self.full_objective(w, lam), np.array([self.a * w[0]])


class BlowupProblem(HomotopyProblem):
    """Returns a finite gradient until the configured step, then infinity."""

    def __init__(self, bad_step):
        self.bad_step = bad_step
        self.calls = 0
        self.dimension = 1
        self.sample_count = 4

    def full_objective(self, w, lam):
        return 0.0

    def minibatch_value_and_gradient(self, w, lam, indices):
        self.calls += 1
        g = np.inf if self.calls >= self.bad_step else 1.0
        return 0.0, np.array([g])


def test_single_half_step_on_quadratic():
    prob = NoiselessQuadratic(a=1.0)
    w = sgd_run(np.array([1.0]), SgdConfig(0.5, 1, 4), prob, 0.5, make_rng(0))
    assert w[0] == 0.5


def test_full_step_reaches_minimum_from_any_start():
    prob = NoiselessQuadratic(a=1.0)
    for c in (-3.0, 0.25, 17.0):
        w = sgd_run(np.array([c]), SgdConfig(1.0, 1, 4), prob, 0.0, make_rng(0))
        assert w[0] == 0.0


def test_single_iteration_homotopy_degenerates_to_sgd():
    prob = NoiselessQuadratic(a=2.0)
    cfg = SgdConfig(0.3, 7, 4)
    sched = make_schedule("constant", 1)
    w_h = hsgd_run(np.array([1.5]), sched, cfg, prob, make_rng(11))
    w_s = sgd_run(np.array([1.5]), cfg, prob, 1.0, make_rng(11))
    assert w_h[0] == w_s[0]


def test_constant_schedule_visits_quarters():
    sched = make_schedule("constant", 4)
    seen = []
    prob = NoiselessQuadratic()

    cfg = SgdConfig(0.1, 1, 4, record_every=1)

    def sink(step, lam, w, fval):
        seen.append(lam)

    hsgd_run(np.array([1.0]), sched, cfg, prob, make_rng(0), sink=sink)
    assert seen == [0.25, 0.5, 0.75, 1.0]


def test_toy_terminal_loss_matches_grid_fstar(toy_problem):
    # Full-batch descent with alpha = 1/L_tilde should land on the optimal
    # value located by dense grid search.
    L = diagnostics.estimate_L(toy_problem, 1.0, 2000, 10.0, make_rng(3))
    cfg = SgdConfig(1.0 / L, 200, toy_problem.sample_count)
    w = sgd_run(np.array([-4.0]), cfg, toy_problem, 1.0, make_rng(5))
    fstar = diagnostics.estimate_fstar(
        toy_problem, 1.0, {"kind": "grid", "lo": -10.0, "hi": 10.0, "step": 1e-4}
    ).value
    assert toy_problem.full_objective(w, 1.0) - fstar < 1e-3


def test_noise_free_descent_is_monotone(toy_problem):
    L = diagnostics.estimate_L(toy_problem, 1.0, 2000, 10.0, make_rng(3))
    values = []

    def sink(step, lam, w, fval):
        values.append(fval)

    cfg = SgdConfig(1.0 / L, 150, toy_problem.sample_count, record_every=1)
    sgd_run(np.array([-4.0]), cfg, toy_problem, 1.0, make_rng(1), sink=sink)
    assert len(values) == 150
    assert np.all(np.diff(values) <= 1e-15)


def test_nonfinite_gradient_names_the_step():
    prob = BlowupProblem(bad_step=6)
    with pytest.raises(NonFiniteError) as err:
        sgd_run(np.array([0.0]), SgdConfig(0.1, 20, 4), prob, 0.0, make_rng(0))
    assert err.value.step == 6
    assert "step 6" in str(err.value)


def test_nonfinite_error_carries_homotopy_context():
    prob = BlowupProblem(bad_step=8)
    cfg = SgdConfig(0.1, 5, 4)
    sched = make_schedule("constant", 4)
    with pytest.raises(NonFiniteError) as err:
        hsgd_run(np.array([0.0]), sched, cfg, prob, make_rng(0))
    assert err.value.step == 8
    assert err.value.homotopy_iteration == 2
    assert err.value.lam == 0.5
    assert "homotopy iteration 2" in str(err.value)


def test_configuration_errors():
    prob = NoiselessQuadratic(samples=4)
    with pytest.raises(ConfigurationError):
        sgd_run(np.array([0.0]), SgdConfig(0.1, 1, 5), prob, 0.0, make_rng(0))
    with pytest.raises(ConfigurationError):
        sgd_run(np.array([[0.0]]), SgdConfig(0.1, 1, 4), prob, 0.0, make_rng(0))
    with pytest.raises(ConfigurationError):
        SgdConfig(0.0, 1, 1)
    with pytest.raises(ConfigurationError):
        SgdConfig(0.1, 0, 1)
    with pytest.raises(ConfigurationError):
        SgdConfig(0.1, 1, 0)
    with pytest.raises(ConfigurationError):
        SgdConfig(0.1, 1, 1, record_every=0)


def test_determinism_same_seed_same_iterates(toy_problem):
    cfg = SgdConfig(0.4, 60, 10)
    w1 = sgd_run(np.array([-4.0]), cfg, toy_problem, 0.8, make_rng(99))
    w2 = sgd_run(np.array([-4.0]), cfg, toy_problem, 0.8, make_rng(99))
    assert w1[0] == w2[0]


def test_step_size_range_warning():
    cfg = SgdConfig(0.9, 1, 1)
    assert cfg.step_size_in_range(1.0)
    assert not cfg.step_size_in_range(2.0)
    with pytest.warns(UserWarning, match="exceeds 1/L_tilde"):
        cfg.warn_if_out_of_range(2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cfg.warn_if_out_of_range(1.0)


def test_sink_called_at_record_multiples():
    prob = NoiselessQuadratic()
    steps_seen = []

    def sink(step, lam, w, fval):
        steps_seen.append(step)
        assert fval == prob.full_objective(w, lam)

    sgd_run(np.array([1.0]), SgdConfig(0.1, 10, 4, record_every=3), prob, 0.0,
            make_rng(0), sink=sink)
    assert steps_seen == [3, 6, 9]
    # record_every=None disables recording even when a sink is passed.
    steps_seen.clear()
    sgd_run(np.array([1.0]), SgdConfig(0.1, 10, 4), prob, 0.0, make_rng(0), sink=sink)
    assert steps_seen == []


def test_stream_seed_and_epoch_helpers():
    assert stream_seed(20240, 0) == 20240
    assert stream_seed(20240, 3) == 20240 ^ 3
    assert steps_per_epoch(100, 100) == 1
    assert steps_per_epoch(100, 30) == 4
    assert steps_per_epoch(7, 2) == 4


def test_homotopy_tracking_on_toy_problem(toy_problem):
    # With a gentle exponential schedule and enough inner steps, each inner
    # solve improves on the gap its own warm start had at the new lambda,
    # averaged over 100 seeded repeats.
    L = diagnostics.estimate_L(toy_problem, 1.0, 2000, 10.0, make_rng(3))
    sched = make_schedule("exponential", 20, eta=0.2)
    cfg = SgdConfig(1.0 / L, 25, toy_problem.sample_count)
    fstar = {
        float(lam): diagnostics.estimate_fstar(
            toy_problem, float(lam), {"kind": "grid", "lo": -10.0, "hi": 10.0, "step": 1e-4}
        ).value
        for lam in sched.lambdas()
    }
    repeats = 100
    before = np.zeros(sched.n)
    after = np.zeros(sched.n)
    for rep in range(repeats):
        rng = make_rng(stream_seed(20240, rep))
        w = np.array([-4.0])
        lam = 0.0
        for i, h in enumerate(sched.increments):
            lam = clamp_lambda(lam + h)
            before[i] += toy_problem.full_objective(w, lam) - fstar[float(lam)]
            w = sgd_run(w, cfg, toy_problem, lam, rng)
            after[i] += toy_problem.full_objective(w, lam) - fstar[float(lam)]
    assert np.all(after / repeats <= before / repeats + 1e-12)


def test_final_lambda_contract_enforced():
    prob = NoiselessQuadratic()
    bad = make_schedule("constant", 4)
    object.__setattr__(bad, "increments", np.array([0.25, 0.25, 0.25, 0.2]))
    with pytest.raises(ConfigurationError, match="differs from 1"):
        hsgd_run(np.array([1.0]), bad, SgdConfig(0.1, 1, 4), prob, make_rng(0))
