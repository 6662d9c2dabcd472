"""Parametric problem families with analytic gradients and homotopy maps.

All families expose the same surface: ``full_objective(w, lam)`` and
``minibatch_value_and_gradient(w, lam, indices)``; the minibatch gradient over
all N indices equals the full gradient and minibatch gradients are unbiased
estimates of it. Instances are immutable after construction and all
evaluations are pure, so they are safe to share across concurrent runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .core import ConfigurationError, make_rng

TWO_OVER_SQRT_PI = 2.0 / np.sqrt(np.pi)


class DomainError(ValueError):
    """Argument outside the declared domain (e.g. lambda outside [0, 1])."""


class DataError(ValueError):
    """Dataset violates a problem precondition (e.g. non-binary labels)."""


def _check_lambda(lam):
    if not (0.0 <= lam <= 1.0):
        raise DomainError(f"homotopy parameter must lie in [0, 1], got {lam}")


@dataclass(frozen=True)
class LabelInterpolationMap:
    """Affine label deformation: lambda * y_target + (1 - lambda) * y_source."""

    y_target: np.ndarray
    y_source: np.ndarray

    def __post_init__(self):
        yt = np.asarray(self.y_target, dtype=float)
        ys = np.asarray(self.y_source, dtype=float)
        if yt.shape != ys.shape or yt.ndim != 1:
            raise DataError("target and source label vectors must be equal-length 1-D arrays")
        object.__setattr__(self, "y_target", yt)
        object.__setattr__(self, "y_source", ys)

    def at(self, lam):
        _check_lambda(lam)
        if lam == 0.0:
            return self.y_source.copy()
        if lam == 1.0:
            return self.y_target.copy()
        return lam * self.y_target + (1.0 - lam) * self.y_source


def interpolate_labels(label_map: LabelInterpolationMap, lam):
    """Elementwise lambda * y_target + (1 - lambda) * y_source; exact at endpoints."""
    return label_map.at(lam)


class HomotopyProblem:
    """Base interface for a parametric objective family f(w, lambda)."""

    dimension: int
    sample_count: int

    def full_objective(self, w, lam):
        raise NotImplementedError

    def minibatch_value_and_gradient(self, w, lam, indices):
        raise NotImplementedError

    def full_gradient(self, w, lam):
        _, grad = self.minibatch_value_and_gradient(w, lam, np.arange(self.sample_count))
        return grad


class ErfRegressionProblem(HomotopyProblem):
    """1-D erf regressor with interpolated labels.

    f(w, lam) = (1/N) sum_j (y_{j,lam} - erf(w x_j))^2 with the analytic
    derivative d/dw erf(u) = (2/sqrt(pi)) e^(-u^2).
    """

    def __init__(self, xs, ys_target, ys_source):
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 1 or xs.size == 0:
            raise ConfigurationError("erf problem needs a non-empty 1-D sample vector")
        self.xs = xs
        self.labels = LabelInterpolationMap(ys_target, ys_source)
        if self.labels.y_target.shape != xs.shape:
            raise ConfigurationError("labels and inputs must have equal length")
        self.dimension = 1
        self.sample_count = xs.size

    def _residuals(self, w, lam, idx):
        u = w[0] * self.xs[idx]
        y = lam * self.labels.y_target[idx] + (1.0 - lam) * self.labels.y_source[idx]
        return u, erf(u) - y

    def full_objective(self, w, lam):
        _check_lambda(lam)
        w = np.atleast_1d(np.asarray(w, dtype=float))
        _, res = self._residuals(w, lam, slice(None))
        return float(np.mean(res**2))

    def minibatch_value_and_gradient(self, w, lam, indices):
        _check_lambda(lam)
        w = np.atleast_1d(np.asarray(w, dtype=float))
        u, res = self._residuals(w, lam, indices)
        value = float(np.mean(res**2))
        grad = np.mean(2.0 * res * TWO_OVER_SQRT_PI * np.exp(-(u**2)) * self.xs[indices])
        return value, np.array([grad])

    def objective_on_grid(self, ws, lam):
        """Vectorized full objective over a 1-D grid of w values."""
        _check_lambda(lam)
        y = lam * self.labels.y_target + (1.0 - lam) * self.labels.y_source
        res = erf(np.outer(np.asarray(ws, dtype=float), self.xs)) - y
        return np.mean(res**2, axis=1)


def erf_problem(xs, ys_target, ys_source):
    """Toy erf regression family (dimension 1)."""
    return ErfRegressionProblem(xs, ys_target, ys_source)


# Fixed MLP architecture: 1 - 10 - 10 - 1, tanh hidden units, identity output.
MLP_HIDDEN = 10
MLP_DIMENSION = 1 * MLP_HIDDEN + MLP_HIDDEN + MLP_HIDDEN * MLP_HIDDEN + MLP_HIDDEN + MLP_HIDDEN * 1 + 1


class MlpRegressionProblem(HomotopyProblem):
    """Two-hidden-layer tanh network under MSE, gradients by hand-derived backprop.

    Parameters are packed as [W1 (10x1), b1 (10), W2 (10x10), b2 (10),
    W3 (1x10), b3 (1)] into a flat vector of length 141.
    """

    def __init__(self, xs, ys_target, ys_source, init_seed=0):
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 1 or xs.size == 0:
            raise ConfigurationError("mlp problem needs a non-empty 1-D sample vector")
        self.xs = xs
        self.labels = LabelInterpolationMap(ys_target, ys_source)
        if self.labels.y_target.shape != xs.shape:
            raise ConfigurationError("labels and inputs must have equal length")
        self.dimension = MLP_DIMENSION
        self.sample_count = xs.size
        self.init_seed = init_seed
        self._label_cache_lam = None
        self._label_cache = None
        self._scratch_by_m = {}

    def _interpolated_labels(self, lam):
        """Full interpolated label vector, cached per lambda (pure in (w, lam, idx))."""
        if self._label_cache_lam != lam:
            self._label_cache = lam * self.labels.y_target + (1.0 - lam) * self.labels.y_source
            self._label_cache_lam = lam
        return self._label_cache

    @staticmethod
    def unpack(w):
        h = MLP_HIDDEN
        o = 0
        W1 = w[o:o + h].reshape(h, 1); o += h
        b1 = w[o:o + h]; o += h
        W2 = w[o:o + h * h].reshape(h, h); o += h * h
        b2 = w[o:o + h]; o += h
        W3 = w[o:o + h].reshape(1, h); o += h
        b3 = w[o:o + 1]
        return W1, b1, W2, b2, W3, b3

    @staticmethod
    def pack(W1, b1, W2, b2, W3, b3):
        return np.concatenate([W1.ravel(), b1, W2.ravel(), b2, W3.ravel(), b3])

    def default_init(self, seed=None):
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
        rng = make_rng(self.init_seed if seed is None else seed)
        h = MLP_HIDDEN
        W1 = rng.uniform(-1.0, 1.0, (h, 1))
        W2 = rng.uniform(-1.0 / np.sqrt(h), 1.0 / np.sqrt(h), (h, h))
        W3 = rng.uniform(-1.0 / np.sqrt(h), 1.0 / np.sqrt(h), (1, h))
        return self.pack(W1, np.zeros(h), W2, np.zeros(h), W3, np.zeros(1))

    def predict(self, w, xs):
        W1, b1, W2, b2, W3, b3 = self.unpack(np.asarray(w, dtype=float))
        x = np.asarray(xs, dtype=float).reshape(-1, 1)
        a1 = np.tanh(x @ W1.T + b1)
        a2 = np.tanh(a1 @ W2.T + b2)
        return (a2 @ W3.T + b3).ravel()

    def full_objective(self, w, lam):
        _check_lambda(lam)
        y = lam * self.labels.y_target + (1.0 - lam) * self.labels.y_source
        res = self.predict(w, self.xs) - y
        return float(np.mean(res**2))

    def minibatch_value_and_gradient(self, w, lam, indices):
        _check_lambda(lam)
        w = np.asarray(w, dtype=float)
        W1, b1, W2, b2, W3, b3 = self.unpack(w)
        x = self.xs[indices]
        y = self._interpolated_labels(lam)[indices]
        m = x.shape[0]
        scratch = self._scratch_by_m.get(m)
        if scratch is None:
            scratch = self._scratch_by_m[m] = [np.empty((m, MLP_HIDDEN)) for _ in range(5)]
        a1, a2, d_a2, d_a1, t = scratch

        # Input dimension is 1, so the first layer is a broadcast, not a matmul.
        w1 = W1.ravel()
        np.multiply.outer(x, w1, out=a1)       # (m, 10)
        a1 += b1
        np.tanh(a1, out=a1)
        np.dot(a1, W2.T, out=a2)
        a2 += b2
        np.tanh(a2, out=a2)
        w3 = W3.ravel()
        res = a2 @ w3 - (y - b3[0])            # (m,)
        value = float(res @ res) / m

        # MSE backprop: dL/dout = 2 res / m
        d_out = (2.0 / m) * res                # (m,)
        np.multiply.outer(d_out, w3, out=d_a2)
        np.multiply(a2, a2, out=t)
        np.subtract(1.0, t, out=t)
        d_a2 *= t                              # (m, 10)
        np.dot(d_a2, W2, out=d_a1)
        np.multiply(a1, a1, out=t)
        np.subtract(1.0, t, out=t)
        d_a1 *= t                              # (m, 10)
        h = MLP_HIDDEN
        grad = np.empty(self.dimension)
        o = 0
        grad[o:o + h] = x @ d_a1; o += h                     # gW1
        grad[o:o + h] = d_a1.sum(axis=0); o += h             # gb1
        grad[o:o + h * h] = (d_a2.T @ a1).ravel(); o += h * h  # gW2
        grad[o:o + h] = d_a2.sum(axis=0); o += h             # gb2
        grad[o:o + h] = d_out @ a2; o += h                   # gW3
        grad[o] = d_out.sum()                                # gb3
        return value, grad


def mlp_sine_problem(xs, ys_target, ys_source, init_spec=0):
    """Sine-regression MLP family; ``init_spec`` seeds the default init."""
    return MlpRegressionProblem(xs, ys_target, ys_source, init_seed=init_spec)


@dataclass(frozen=True)
class CubicLogisticModel:
    """Cubic score with lambda-gated nonlinear block: model value is affine in
    each coefficient and depends only on c7..c9 at lambda = 0."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (9,):
            raise ConfigurationError("cubic logistic model needs 9 coefficients")
        object.__setattr__(self, "coefficients", c)

    def score(self, x1, x2, lam):
        c = self.coefficients
        nonlinear = (
            c[0] * x1**3 + c[1] * x2**3 + c[2] * x1**2
            + c[3] * x2**2 + c[4] * x1**2 * x2 + c[5] * x1 * x2**2
        )
        return lam * nonlinear + c[6] * x1 + c[7] * x2 + c[8]


class CubicLogisticProblem(HomotopyProblem):
    """Binary cross-entropy of sigmoid(score) for the lambda-gated cubic model.

    The loss uses the log-sum-exp form log(1 + e^z) - y z, which is stable for
    large |z|.
    """

    def __init__(self, features, labels01):
        X = np.asarray(features, dtype=float)
        y = np.asarray(labels01, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise DataError("features must be an (N, 2) array")
        if y.shape != (X.shape[0],) or not np.all(np.isin(y, (0.0, 1.0))):
            raise DataError("labels must be 0/1 with one entry per sample")
        x1, x2 = X[:, 0], X[:, 1]
        # Design blocks: nonlinear terms carry the lambda factor, linear part does not.
        self.phi_nl = np.column_stack([x1**3, x2**3, x1**2, x2**2, x1**2 * x2, x1 * x2**2])
        self.phi_lin = np.column_stack([x1, x2, np.ones_like(x1)])
        self.labels01 = y
        self.dimension = 9
        self.sample_count = X.shape[0]

    def scores(self, w, lam, idx=slice(None)):
        w = np.asarray(w, dtype=float)
        return lam * (self.phi_nl[idx] @ w[:6]) + self.phi_lin[idx] @ w[6:]

    def full_objective(self, w, lam):
        _check_lambda(lam)
        z = self.scores(w, lam)
        return float(np.mean(np.logaddexp(0.0, z) - self.labels01 * z))

    def minibatch_value_and_gradient(self, w, lam, indices):
        _check_lambda(lam)
        z = self.scores(w, lam, indices)
        y = self.labels01[indices]
        value = float(np.mean(np.logaddexp(0.0, z) - y * z))
        d = (1.0 / (1.0 + np.exp(-z)) - y) / z.shape[0]
        grad = np.concatenate([lam * (d @ self.phi_nl[indices]), d @ self.phi_lin[indices]])
        return value, grad

    def classification_error(self, w, lam):
        """Mean 0/1 misclassification at decision threshold sigmoid(z) >= 0.5."""
        z = self.scores(w, lam)
        return float(np.mean((z >= 0.0) != (self.labels01 == 1.0)))


def cubic_logistic_problem(features, labels01):
    """Moons-classification family (dimension 9)."""
    return CubicLogisticProblem(features, labels01)


class QuadraticTrackingProblem(HomotopyProblem):
    """Synthetic 1-D family f(w, lam) = mu/2 * (w - lam)^2 with exact constants.

    Per-sample objectives mu/2 (w - lam)^2 + mu * b_j (w - lam) with centered
    offsets b_j give an unbiased stochastic oracle whose variance is known in
    closed form, while the full objective and f*(lam) = 0 stay exact.
    """

    def __init__(self, mu, offsets):
        if mu <= 0:
            raise ConfigurationError("curvature mu must be positive")
        b = np.asarray(offsets, dtype=float)
        if b.ndim != 1 or b.size < 1:
            raise ConfigurationError("offsets must be a non-empty 1-D array")
        self.mu = float(mu)
        self.offsets = b - b.mean()
        self.dimension = 1
        self.sample_count = b.size

    def full_objective(self, w, lam):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return float(0.5 * self.mu * (w[0] - lam) ** 2)

    def minibatch_value_and_gradient(self, w, lam, indices):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        d = w[0] - lam
        b = self.offsets[indices]
        value = float(0.5 * self.mu * d**2 + self.mu * np.mean(b) * d)
        grad = np.array([self.mu * d + self.mu * np.mean(b)])
        return value, grad

    def oracle_variance(self, minibatch):
        """Exact E||g - grad f||^2 for sampling without replacement."""
        n, m = self.sample_count, minibatch
        var_b = float(np.mean(self.offsets**2))
        if m >= n:
            return 0.0
        correction = (n - m) / (n - 1) if n > 1 else 0.0
        return self.mu**2 * var_b * correction / m


def quadratic_tracking_problem(mu, offsets):
    return QuadraticTrackingProblem(mu, offsets)
