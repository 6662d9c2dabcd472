"""Seeded synthetic dataset generators for the three benchmark experiments.

Determinism contract: every generator uses the fixed PCG64 generator (normals
via numpy's ziggurat), so spec + seed regenerate the same dataset bit for bit
across processes and platforms. The sine generator derives the source-label
noise stream from ``seed XOR SOURCE_NOISE_SALT``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError, make_rng

# Documented sub-seed salt for the companion source labels of the sine dataset.
SOURCE_NOISE_SALT = 0xA5A5A5A5

# N(0, v) noise parameters for the sine task are variances, not deviations.
SINE_NOISE_VAR = 0.1
SINE_SOURCE_NOISE_VAR = 0.01


@dataclass(frozen=True)
class Dataset:
    """In-memory dataset: (N, d) inputs, N targets, optional source targets."""

    inputs: np.ndarray
    targets: np.ndarray
    seed: int
    spec: dict = field(default_factory=dict)
    source_targets: np.ndarray | None = None

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ConfigurationError("inputs and targets must have equal length")

    @property
    def sample_count(self):
        return self.inputs.shape[0]


def gen_linear_toy(n=100, slope=3.0, noise_std=1.0, seed=0):
    """x uniform on [-1, 1], y = slope * x + N(0, noise_std^2)."""
    if n < 1:
        raise ConfigurationError("need at least one sample")
    if noise_std < 0:
        raise ConfigurationError("noise_std must be nonnegative")
    rng = make_rng(seed)
    x = rng.uniform(-1.0, 1.0, n)
    y = slope * x + noise_std * rng.standard_normal(n)
    return Dataset(
        inputs=x.reshape(-1, 1), targets=y, seed=seed,
        spec={"generator": "linear_toy", "n": n, "slope": slope, "noise_std": noise_std},
    )


def gen_sine(n=500, freq=10.0, noise_std=float(np.sqrt(SINE_NOISE_VAR)), seed=0):
    """x uniform on [-1, 1], y = sin(freq * x) + noise; source labels x^2 + noise.

    The source noise (variance 0.01) comes from a derived sub-seed so target
    and source labels regenerate independently but deterministically.
    """
    if n < 1:
        raise ConfigurationError("need at least one sample")
    rng = make_rng(seed)
    x = rng.uniform(-1.0, 1.0, n)
    y = np.sin(freq * x) + noise_std * rng.standard_normal(n)
    src_rng = make_rng(seed ^ SOURCE_NOISE_SALT)
    src_std = np.sqrt(SINE_SOURCE_NOISE_VAR) if noise_std > 0 else 0.0
    y_src = x**2 + src_std * src_rng.standard_normal(n)
    return Dataset(
        inputs=x.reshape(-1, 1), targets=y, seed=seed, source_targets=y_src,
        spec={"generator": "sine", "n": n, "freq": freq, "noise_std": noise_std},
    )


def gen_moons(n=1000, noise_std=0.1, seed=0):
    """Two interleaved semicircles with isotropic Gaussian corruption.

    Class 0: (cos t, sin t); class 1: (1 - cos t, 0.5 - sin t); t equally
    spaced on [0, pi] within each class; exactly n/2 samples per class.
    """
    if n < 2 or n % 2 != 0:
        raise ConfigurationError("moons generator needs an even sample count >= 2")
    rng = make_rng(seed)
    half = n // 2
    theta = np.linspace(0.0, np.pi, half)
    class0 = np.column_stack([np.cos(theta), np.sin(theta)])
    class1 = np.column_stack([1.0 - np.cos(theta), 0.5 - np.sin(theta)])
    X = np.vstack([class0, class1]) + noise_std * rng.standard_normal((n, 2))
    y = np.concatenate([np.zeros(half), np.ones(half)])
    return Dataset(
        inputs=X, targets=y, seed=seed,
        spec={"generator": "moons", "n": n, "noise_std": noise_std},
    )


def dataset_to_csv(dataset, path):
    """Write `x1[,x2],y[,y_source]` rows with 17-significant-digit decimals."""
    d = dataset.inputs.shape[1]
    header = ",".join([f"x{i + 1}" for i in range(d)] + ["y"])
    columns = [dataset.inputs[:, i] for i in range(d)] + [dataset.targets]
    if dataset.source_targets is not None:
        header += ",y_source"
        columns.append(dataset.source_targets)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in zip(*columns):
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
