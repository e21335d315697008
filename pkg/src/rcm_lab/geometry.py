"""Points on A = [-1/2, 1/2]^2, the square and torus metrics, and Poisson
point process sampling."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .rng import Stream

HALF = 0.5


class Domain(enum.Enum):
    SQUARE = "square"
    TORUS = "torus"

    @property
    def diameter(self) -> float:
        return math.sqrt(2.0) if self is Domain.SQUARE else math.sqrt(2.0) / 2.0

    @classmethod
    def parse(cls, value: "str | Domain") -> "Domain":
        return value if isinstance(value, Domain) else cls(str(value).lower())


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        for c in (self.x, self.y):
            if not (-HALF <= c <= HALF):
                raise ValueError(f"coordinate {c} outside [-1/2, 1/2]")

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True, eq=False)
class PointSet:
    """Realised node positions, shape (n, 2), plus the intensity they came from."""

    coords: np.ndarray
    density: float

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        if c.size and (np.abs(c) > HALF).any():
            raise ValueError("points must lie in [-1/2, 1/2]^2")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __len__(self) -> int:
        return self.coords.shape[0]

    def points(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self.coords]


def _delta(p, q):
    p = np.asarray(tuple(p) if isinstance(p, Point) else p, dtype=float)
    q = np.asarray(tuple(q) if isinstance(q, Point) else q, dtype=float)
    return p - q


def euclidean_distance(p, q):
    d = _delta(p, q)
    out = np.hypot(d[..., 0], d[..., 1])
    return float(out) if out.ndim == 0 else out


def toroidal_distance(p, q):
    """min over integer shifts z of |p + z - q|.

    For points of A each axis separation is below 1, so the minimum is
    attained with z in {-1, 0, 1}^2 and decouples per axis.
    """
    d = np.abs(_delta(p, q))
    d = np.minimum(d, 1.0 - d)
    out = np.hypot(d[..., 0], d[..., 1])
    return float(out) if out.ndim == 0 else out


def distance(domain: Domain, p, q):
    if domain is Domain.TORUS:
        return toroidal_distance(p, q)
    return euclidean_distance(p, q)


def sample_poisson_process(rho: float, stream: Stream) -> PointSet:
    """N ~ Poisson(rho) points, uniform on A, fully determined by ``stream``."""
    if not math.isfinite(rho) or rho <= 0:
        raise ValueError(f"density must be positive and finite, got {rho}")
    n = stream.poisson(rho)
    u = stream.child("xy").uniforms(2 * n)
    return PointSet(u.reshape(n, 2) - HALF, rho)


def inside_angle(center: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Angular measure of the circle of radius ``t`` about ``center`` lying in A.

    ``center`` has shape (..., 2) and broadcasts against ``t``.  Arcs cut off
    by the four edges are intervals centred on the edge normals; only
    adjacent pairs can overlap, so inclusion-exclusion over those is exact.
    """
    center = np.asarray(center, dtype=float)
    t = np.asarray(t, dtype=float)
    cx = center[..., 0]
    cy = center[..., 1]
    dists = (HALF - cx, HALF - cy, HALF + cx, HALF + cy)  # right, top, left, bottom
    with np.errstate(divide="ignore", invalid="ignore"):
        w = [np.where(t > d, np.arccos(np.clip(d / np.where(t > 0, t, 1.0), -1.0, 1.0)), 0.0) for d in dists]
    out = 2.0 * math.pi - 2.0 * (w[0] + w[1] + w[2] + w[3])
    for i in range(4):
        out = out + np.maximum(w[i] + w[(i + 1) % 4] - 0.5 * math.pi, 0.0)
    return np.clip(out, 0.0, 2.0 * math.pi)
