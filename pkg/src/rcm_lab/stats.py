"""Estimates with standard errors, and total-variation distances for laws on
the non-negative integers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

POISSON_TAIL = 1e-12


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    trials: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")

    def within(self, value: float, k: float = 3.0, extra: float = 0.0) -> bool:
        """|mean - value| <= k * sqrt(stderr^2 + extra^2)."""
        return abs(self.mean - value) <= k * math.hypot(self.stderr, extra)


def mean_estimate(samples) -> Estimate:
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    sd = float(x.std(ddof=1)) if n > 1 else 0.0
    return Estimate(float(x.mean()), sd / math.sqrt(n), n)


def binomial_estimate(successes: int, trials: int) -> Estimate:
    if trials <= 0:
        raise ValueError("no trials")
    p = successes / trials
    return Estimate(p, math.sqrt(p * (1.0 - p) / trials), trials)


def poisson_pmf(mean: float, k) -> np.ndarray | float:
    """exp(-mean) mean^k / k!, evaluated in log space."""
    if mean < 0:
        raise ValueError("mean must be non-negative")
    k = np.asarray(k)
    if mean == 0:
        out = np.where(k == 0, 1.0, 0.0)
    else:
        out = np.exp(-mean + k * math.log(mean) - special.gammaln(k + 1.0))
    return float(out) if out.ndim == 0 else out


def empirical_pmf(counts) -> np.ndarray:
    c = np.asarray(counts, dtype=np.int64)
    if c.size == 0:
        return np.zeros(1)
    return np.bincount(c) / c.size


def poisson_support(mean: float, at_least: int = 0) -> int:
    """Smallest K >= at_least with Poisson(mean) mass beyond K below 1e-12."""
    K = max(at_least, int(mean + 10.0 * math.sqrt(mean + 1.0)) + 10)
    while special.pdtrc(K, mean) >= POISSON_TAIL:
        K += 10
    return K


@dataclass(frozen=True)
class TV:
    value: float
    stderr: float


def tv_to_poisson(counts, mean: float) -> TV:
    """Half-L1 distance between the empirical law of ``counts`` and Poisson(mean).

    Half-L1 equals the supremum over events for laws on the integers.  The
    Poisson tail past the evaluation window (mass < 1e-12) is added to the
    value.  The standard error is the multinomial delta-method one.
    """
    c = np.asarray(counts, dtype=np.int64)
    n = c.size
    emp = empirical_pmf(c)
    K = poisson_support(mean, at_least=len(emp) - 1)
    q = poisson_pmf(mean, np.arange(K + 1))
    p = np.zeros(K + 1)
    p[: len(emp)] = emp
    diff = p - q
    tail = float(special.pdtrc(K, mean)) if mean > 0 else 0.0
    value = 0.5 * float(np.abs(diff).sum()) + tail
    s = np.sign(diff)
    var = (float(s * s @ p) - float(s @ p) ** 2) / n if n else 0.0
    return TV(value, 0.5 * math.sqrt(max(var, 0.0)))


def tv_between(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    K = max(len(p), len(q))
    p = np.pad(p, (0, K - len(p)))
    q = np.pad(q, (0, K - len(q)))
    return 0.5 * float(np.abs(p - q).sum())
