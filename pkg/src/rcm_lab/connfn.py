"""Connection functions g, their spreading constant C = 2*pi * int x g(x) dx,
the strict-decay heuristic and the critical radius."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import special

from .quadrature import QuadratureError, QuadResult, integrate

DEFAULT_TOL = 1e-10
_MAX_DOUBLINGS = 60


class DivergenceError(QuadratureError):
    """The spreading-constant integral does not settle (C would be infinite)."""


class ConnectionModel:
    """Base class.  Subclasses implement ``_g`` on a float array with x >= 0."""

    name = "model"
    #: distances (in units of the scale) where g jumps or kinks
    breakpoints: tuple[float, ...] = ()
    #: g vanishes beyond this distance
    support: float = math.inf

    def _g(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, x):
        arr = np.asarray(x, dtype=float)
        if not np.isfinite(arr).all():
            raise ValueError("distance must be finite")
        if (arr < 0).any():
            raise ValueError("distance must be non-negative")
        out = self._g(arr)
        return float(out) if np.ndim(out) == 0 else out

    __call__ = evaluate

    def params(self) -> dict:
        return {}

    @cached_property
    def C(self) -> float:
        return spreading_constant(self, DEFAULT_TOL)

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class UnitDisk(ConnectionModel):
    name = "unit-disk"
    breakpoints = (1.0,)
    support = 1.0

    def _g(self, x):
        return np.where(x <= 1.0, 1.0, 0.0)


class Exponential(ConnectionModel):
    name = "exponential"

    def _g(self, x):
        return np.exp(-x)


class Rayleigh(ConnectionModel):
    name = "rayleigh"

    def _g(self, x):
        return np.exp(-x * x)


class LogNormalShadow(ConnectionModel):
    """Log-normal shadowing: P(link) = erfc(10 alpha log10(x) / (sigma sqrt 2)) / 2.

    ``sigma`` is the shadowing spread in dB and ``alpha`` the path-loss
    exponent; x = 1 is the distance where the mean received power equals
    the threshold.
    """

    name = "lognormal"

    def __init__(self, sigma: float = 4.0, alpha: float = 3.0):
        if not (sigma > 0 and alpha > 0):
            raise ValueError("LogNormalShadow needs sigma > 0 and alpha > 0")
        self.sigma = float(sigma)
        self.alpha = float(alpha)

    def params(self):
        return {"sigma": self.sigma, "alpha": self.alpha}

    def _g(self, x):
        with np.errstate(divide="ignore"):
            arg = 10.0 * self.alpha * np.log10(x) / (self.sigma * math.sqrt(2.0))
        return 0.5 * special.erfc(arg)


class Tabulated(ConnectionModel):
    """Piecewise-linear g through (distance, probability) knots, 0 past the last knot."""

    name = "tabulated"

    def __init__(self, knots: Sequence[tuple[float, float]]):
        k = np.asarray(knots, dtype=float).reshape(-1, 2)
        if len(k) < 1:
            raise ValueError("need at least one knot")
        xs, ps = k[:, 0], k[:, 1]
        if not np.isfinite(k).all():
            raise ValueError("knots must be finite")
        if (xs < 0).any() or (np.diff(xs) <= 0).any():
            raise ValueError("knot distances must be non-negative and strictly ascending")
        if ((ps < 0) | (ps > 1)).any():
            raise ValueError("knot probabilities must lie in [0, 1]")
        if (np.diff(ps) > 0).any():
            bad = float(xs[1:][np.diff(ps) > 0][0])
            raise ValueError(f"g must be non-increasing (monotonicity violated at x={bad})")
        self.xs, self.ps = xs, ps
        self.breakpoints = tuple(float(v) for v in xs)
        self.support = float(xs[-1])

    @classmethod
    def from_file(cls, path: "str | Path") -> "Tabulated":
        rows = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                d, p = line.split()
                rows.append((float(d), float(p)))
        return cls(rows)

    def params(self):
        return {"knots": [(float(a), float(b)) for a, b in zip(self.xs, self.ps)]}

    def _g(self, x):
        y = np.interp(x, self.xs, self.ps)
        return np.where(x > self.xs[-1], 0.0, y)


MODELS = {
    "unit-disk": UnitDisk,
    "exponential": Exponential,
    "rayleigh": Rayleigh,
    "lognormal": LogNormalShadow,
}


def make_model(name: str, *, sigma: float = 4.0, alpha: float = 3.0, file=None) -> ConnectionModel:
    if name == "tabulated":
        if file is None:
            raise ValueError("tabulated model needs a knot file")
        return Tabulated.from_file(file)
    if name == "lognormal":
        return LogNormalShadow(sigma, alpha)
    try:
        return MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}") from None


def _moment(m: ConnectionModel, lo: float, hi: float, tol: float) -> QuadResult:
    bps = [p for p in m.breakpoints if lo < p < hi]
    return integrate(lambda x: x * m.evaluate(x), lo, hi, rtol=tol, atol=1e-300, breakpoints=bps)


def tail_moment(m: ConnectionModel, a: float, tol: float = DEFAULT_TOL) -> QuadResult:
    """int_a^inf x g(x) dx, computed directly (no subtraction from the total).

    The upper limit X is doubled until the monotone-tail bound X * X g(X)
    falls under ``tol`` times the running estimate; a Cauchy check on the
    partial integrals flags a divergent integral.
    """
    if a >= m.support:
        return QuadResult(0.0, 0.0)
    hi = max(2.0 * a, 1.0)
    if math.isfinite(m.support):
        return _moment(m, a, m.support, tol)
    total = _moment(m, a, hi, tol)
    value, err = total
    for _ in range(_MAX_DOUBLINGS):
        tail_bound = hi * hi * float(m.evaluate(hi))
        if tail_bound <= tol * abs(value) or (value == 0.0 and tail_bound == 0.0):
            return QuadResult(value, err + tail_bound)
        piece = _moment(m, hi, 2.0 * hi, tol)
        value += piece.value
        err += piece.error
        hi *= 2.0
    raise DivergenceError(
        f"partial integrals of x*g(x) for {m!r} did not settle by x={hi:.3g}; "
        "the spreading constant appears infinite"
    )


def spreading_constant(m: ConnectionModel, tol: float = DEFAULT_TOL) -> float:
    """C = int_{R^2} g(|x|) dx = 2 pi int_0^inf x g(x) dx."""
    if not (0 < tol <= 1e-3):
        raise ValueError("tol must lie in (0, 1e-3]")
    cache = m.__dict__.setdefault("_C_cache", {})
    if tol not in cache:
        cache[tol] = 2.0 * math.pi * tail_moment(m, 0.0, tol).value
    return cache[tol]


@dataclass(frozen=True)
class DecayVerdict:
    verdict: str  # "pass", "fail" or "inconclusive"
    witness: float | None = None
    h: np.ndarray = field(default=None, repr=False)


def check_strict_decay(m: ConnectionModel, grid) -> DecayVerdict:
    """Heuristic check that h(x) = x^2 log^2(x) g(x) is eventually decreasing.

    Only grid points above sqrt(max grid) are inspected, so early growth
    (as for e^{-x} near x = 2) is tolerated.  This can never prove the
    asymptotic condition; it only flags visible violations.
    """
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or (np.diff(x) <= 0).any():
        raise ValueError("grid must be strictly increasing")
    if x[-1] < 100.0:
        raise ValueError("grid must reach at least 1e2")
    x = x[x > 1.0]
    h = x * x * np.log(x) ** 2 * m.evaluate(x)
    region = x >= math.sqrt(x[-1])
    xr, hr = x[region], h[region]
    if isinstance(m, Tabulated) and m.support < xr[0]:
        return DecayVerdict("inconclusive", None, h)
    rises = np.nonzero(hr[1:] > hr[:-1])[0]
    if rises.size:
        return DecayVerdict("fail", float(xr[rises[0] + 1]), h)
    return DecayVerdict("pass", None, h)


def critical_radius(rho: float, b: float, C: float) -> float:
    """r = sqrt((log rho + b) / (C rho)), natural log."""
    if not (rho > 1 and math.isfinite(rho)):
        raise ValueError("density must exceed 1")
    if not C > 0:
        raise ValueError("spreading constant must be positive")
    s = math.log(rho) + b
    if s <= 0:
        raise ValueError(f"log(rho) + b = {s:.6g} <= 0: radius undefined")
    return math.sqrt(s / (C * rho))


@dataclass(frozen=True)
class ScaledModel:
    """g_r(x) = g(x / r)."""

    base: ConnectionModel
    r: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError("scale must be positive")

    def evaluate(self, x):
        return self.base.evaluate(np.asarray(x, dtype=float) / self.r)

    __call__ = evaluate

    @property
    def support(self) -> float:
        return self.base.support * self.r


def scaled(m: ConnectionModel, r: float) -> ScaledModel:
    return ScaledModel(m, r)
