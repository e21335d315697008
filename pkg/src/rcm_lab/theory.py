"""Limit laws and exact finite-density formulas for isolated nodes and
components of the random connection model on A = [-1/2, 1/2]^2."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .connfn import ConnectionModel, ScaledModel, critical_radius, tail_moment
from .geometry import HALF, Domain, distance, inside_angle
from .quadrature import fixed_panels, integrate
from .rng import Stream
from .stats import Estimate, poisson_pmf

__all__ = [
    "PredictionKind", "Prediction", "mean_isolated_asymptotic", "prob_no_isolated_asymptotic",
    "prob_connected_asymptotic", "coverage_integral", "mean_isolated_exact", "poisson_pmf",
    "connect_probability_kset", "coverage_probability", "expected_components_order_k",
    "xi_gtM_prob_lower_bound", "mean_xi_gtM_upper_bound", "mean_xi_gtM_limit",
]


class PredictionKind(enum.Enum):
    ASYMPTOTIC = "asymptotic"
    EXACT_FINITE_RHO = "exact"
    BOUND = "bound"


@dataclass(frozen=True)
class Prediction:
    name: str
    value: float
    kind: PredictionKind
    params: dict = field(default_factory=dict)
    error: float = 0.0
    meta: dict = field(default_factory=dict)


# --- asymptotic laws --------------------------------------------------------

def mean_isolated_asymptotic(b: float) -> float:
    """Limit mean e^{-b} of the isolated-node count."""
    return math.exp(-b)


def prob_no_isolated_asymptotic(b: float) -> float:
    return math.exp(-math.exp(-b))


def prob_connected_asymptotic(b: float) -> float:
    # connected iff no isolated node, asymptotically
    return prob_no_isolated_asymptotic(b)


def xi_gtM_prob_lower_bound(M: int, b: float) -> float:
    """1 - e^{-(M+1) b} / (M+1)!, clamped to [0, 1]."""
    if M < 1:
        raise ValueError("M must be >= 1")
    log_term = -(M + 1) * b - math.lgamma(M + 2)
    if log_term >= 0:
        return 0.0
    return min(1.0, max(0.0, -math.expm1(log_term)))


def mean_xi_gtM_upper_bound(M: int, b: float) -> Prediction:
    """1 + eta^{M+1} / (M+1)! at the worst case eta = e^{-b}."""
    if M < 1:
        raise ValueError("M must be >= 1")
    value = 1.0 + math.exp(-(M + 1) * b - math.lgamma(M + 2))
    return Prediction("E(xi_>M) upper bound", value, PredictionKind.BOUND, {"M": M, "b": b},
                      meta={"eta_M": "worst case e^-b"})


def mean_xi_gtM_limit(M: int, b: float) -> float:
    """e^{e^{-b}} - sum_{k=1}^{M} e^{-kb}/k!, the bound before the remainder step."""
    x = math.exp(-b)
    # The sum of the omitted terms is the Poisson(x) upper tail times e^x.
    return 1.0 + math.exp(x) * float(special.pdtrc(M, x))


# --- coverage integrals -----------------------------------------------------

def _radial_breaks(model: ConnectionModel, r: float, t_max: float) -> list[float]:
    pts = [bp * r for bp in model.breakpoints]
    if not math.isfinite(model.support):
        # geometric panels resolve the decay of g(t / r)
        pts += [r * 2.0 ** k for k in range(-3, 12)]
    return [p for p in pts if 0 < p < t_max]


def coverage_integral(model: ConnectionModel, r: float, centers, domain: Domain,
                      radius_cap: float = math.inf) -> tuple[np.ndarray, np.ndarray]:
    """int_A g(dist(x, y) / r) dx for each centre y, with error estimates.

    Computed in polar coordinates about y: the integrand is
    t g(t / r) times the angle of the circle of radius t lying in A.  That
    angle has square-root onsets at edge distances and kinks at corner
    distances, so those are panel edges and each panel is integrated after
    the substitution t = a + (b - a) u^2.  On the torus the result does not
    depend on y and equals the square value at the origin.  ``radius_cap``
    restricts the integral to the disk of that radius about y.
    """
    y = np.atleast_2d(np.asarray(centers, dtype=float))
    if domain is Domain.TORUS:
        y = np.zeros((1, 2))
    N = y.shape[0]
    ax, ay = np.abs(y[:, 0]), np.abs(y[:, 1])
    near = (HALF - ax, HALF - ay, HALF + ax, HALF + ay)
    corners = [np.hypot(HALF + sx * ax, HALF + sy * ay) for sx in (-1, 1) for sy in (-1, 1)]
    t_far = np.max(np.stack(corners), axis=0)
    t_max = np.minimum(t_far, min(model.support * r, radius_cap))
    fixed = _radial_breaks(model, r, float(t_max.max()))
    cols = [np.zeros(N), t_max] + list(near) + corners + [np.full(N, p) for p in fixed]
    brk = np.sort(np.minimum(np.stack(cols, axis=1), t_max[:, None]), axis=1)
    a, b = brk[:, :-1], brk[:, 1:]
    yy = y[:, None, None, :]
    width = (b - a)[..., None]

    def f(s):
        # panel variable s in [0, 1], t = a + (b - a) s^2
        t = a[..., None] + width * s * s
        return t * model.evaluate(t / r) * inside_angle(yy, t) * 2.0 * width * s

    val, err = fixed_panels(f, np.zeros_like(a), np.ones_like(a))
    val = val.sum(axis=1)
    err = err.sum(axis=1)
    if domain is Domain.TORUS:
        n = np.atleast_2d(np.asarray(centers, dtype=float)).shape[0]
        return np.full(n, val[0]), np.full(n, err[0])
    return val, err


def mean_isolated_exact(rho: float, model: ConnectionModel, domain: Domain, b: float = 0.0,
                        tol: float = 1e-8, r: float | None = None) -> Prediction:
    """Exact E(W) = rho int_A exp(-rho int_A g(dist(x, y)/r) dx) dy at finite rho.

    ``r`` defaults to the critical radius for (rho, b).  The square case
    integrates over the triangle 0 <= y2 <= y1 <= 1/2 (one eighth of A).
    """
    if r is None:
        r = critical_radius(rho, b, model.C)
    params = {"rho": rho, "b": b, "model": model.name, "domain": domain.value, "r": r}
    if domain is Domain.TORUS:
        cov, cov_err = coverage_integral(model, r, [(0.0, 0.0)], domain)
        value = rho * math.exp(-rho * cov[0])
        return Prediction("E(W) exact", value, PredictionKind.EXACT_FINITE_RHO, params,
                          error=value * rho * float(cov_err[0]))

    scale = model.support * r if math.isfinite(model.support) else 8.0 * r
    brk = sorted({HALF - scale, HALF - 0.5 * scale, HALF - 2.0 * scale} | {HALF - p * r for p in model.breakpoints})
    brk = [p for p in brk if 0 < p < HALF]

    def integrand(y2, y1):
        pts = np.stack([np.full_like(y2, y1), y2], axis=1)
        cov, _ = coverage_integral(model, r, pts, domain)
        return np.exp(-rho * cov)

    def row(y1_arr):
        out = np.empty_like(y1_arr)
        for i, y1 in enumerate(y1_arr):
            if y1 <= 0:
                out[i] = 0.0
                continue
            res = integrate(lambda y2: integrand(y2, y1), 0.0, y1, rtol=0.1 * tol, atol=1e-300,
                            breakpoints=[p for p in brk if p < y1])
            out[i] = res.value
        return out

    outer = integrate(row, 0.0, HALF, rtol=tol, atol=1e-300, breakpoints=brk)
    value = 8.0 * rho * outer.value
    return Prediction("E(W) exact", value, PredictionKind.EXACT_FINITE_RHO, params,
                      error=8.0 * rho * outer.error + value * 0.1 * tol)


# --- small-component formulas -----------------------------------------------

@lru_cache(maxsize=None)
def _pairs(k: int) -> tuple[tuple[int, int], ...]:
    return tuple(itertools.combinations(range(k), 2))


@lru_cache(maxsize=None)
def _connected_subsets(k: int) -> np.ndarray:
    """Boolean mask over the 2^E edge subsets of K_k: does the subset connect all k nodes?"""
    pairs = _pairs(k)
    E = len(pairs)
    mask = np.zeros(1 << E, dtype=bool)
    for s in range(1 << E):
        parent = list(range(k))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e, (i, j) in enumerate(pairs):
            if s >> e & 1:
                parent[find(i)] = find(j)
        mask[s] = len({find(i) for i in range(k)}) == 1
    return mask


def connect_probability_batch(p_edges: np.ndarray, k: int) -> np.ndarray:
    """Connection probability of k nodes given per-edge link probabilities.

    ``p_edges`` has shape (B, k(k-1)/2) in ``itertools.combinations`` order.
    Enumerates all edge subsets: subset probabilities are built by doubling
    one edge at a time (bit e of the subset index is edge e).
    """
    if not 1 <= k <= 5:
        raise ValueError("k must lie in 1..5")
    p = np.atleast_2d(np.asarray(p_edges, dtype=float))
    B = p.shape[0]
    probs = np.ones((B, 1))
    for e in range(p.shape[1]):
        pe = p[:, e:e + 1]
        probs = np.concatenate([probs * (1.0 - pe), probs * pe], axis=1)
    return probs @ _connected_subsets(k).astype(float)


def connect_probability_kset(positions, m: ScaledModel, domain: Domain) -> float:
    """g1: probability that nodes at fixed positions form a connected graph."""
    pos = [tuple(p) for p in positions]
    k = len(pos)
    if k > 5:
        raise ValueError("enumeration is limited to k <= 5 nodes")
    if k < 1:
        raise ValueError("need at least one position")
    p = [m.evaluate(distance(domain, pos[i], pos[j])) for i, j in _pairs(k)]
    return float(connect_probability_batch(np.array([p]).reshape(1, -1), k)[0])


def coverage_probability(y, positions, m: ScaledModel, domain: Domain) -> float:
    """g2: probability that a node at y links to at least one of ``positions``."""
    pos = [tuple(p) for p in positions]
    if not pos:
        return 0.0
    d = np.array([distance(domain, tuple(y), p) for p in pos])
    return float(1.0 - np.prod(1.0 - np.asarray(m.evaluate(d))))


def _wrap(z, side, domain):
    if domain is Domain.TORUS:
        return (z + 0.5 * side) % side - 0.5 * side
    return z


def _dist(a, b, side, domain):
    d = np.abs(a - b)
    if domain is Domain.TORUS:
        d = np.minimum(d, side - d)
    return np.hypot(d[..., 0], d[..., 1])


def _r2_sequence(n: int, dim: int) -> np.ndarray:
    """Additive-recurrence low-discrepancy points in [0, 1)^dim."""
    phi = 2.0
    for _ in range(50):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    alpha = (1.0 / phi) ** np.arange(1, dim + 1)
    return (0.5 + np.outer(np.arange(1, n + 1), alpha)) % 1.0


def _order_k_integral(density, side, g, g_support, kernel_radius, domain, k, samples, inner, stream,
                      chunk=64):
    """Importance-sampled (density^k / k!) int g1 exp(-density int g2) over (A_side)^k.

    Outer proposal: x1 uniform, each later point offset from a uniformly
    chosen earlier one by a kernel (uniform disk of ``kernel_radius`` mixed
    with a uniform draw over the domain when g has unbounded support), with
    the density symmetrised over all k! orderings.  The inner coverage
    integral uses a randomly shifted low-discrepancy set from the same
    kernel around the k points, split into two halves whose difference
    estimates the Jensen bias of the exponential.
    """
    area = side * side
    if domain is Domain.TORUS and kernel_radius > 0.5 * side:
        alpha = 1.0
    elif math.isfinite(g_support):
        alpha = 0.0
    else:
        alpha = 0.1
    disk_area = math.pi * kernel_radius ** 2

    def h(dist):
        return (1.0 - alpha) * (dist <= kernel_radius) / disk_area + alpha / area

    def kernel_point(center, u_mix, u_r, u_t):
        uni = (np.stack([u_r, u_t], axis=-1) - 0.5) * side
        rad = kernel_radius * np.sqrt(u_r)
        ang = 2.0 * math.pi * u_t
        off = center + np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1)
        return np.where((u_mix < alpha)[..., None], uni, _wrap(off, side, domain))

    pairs = _pairs(k)
    perms = list(itertools.permutations(range(k)))
    base = _r2_sequence(inner, 4)
    weights = np.empty(samples)
    bound_w = np.empty(samples)
    bias = np.empty(samples)
    for start in range(0, samples, chunk):
        B = min(chunk, samples - start)
        u = stream.child("outer").uniforms(B * 4 * k, offset=start * 4 * k).reshape(B, k, 4)
        x = np.empty((B, k, 2))
        x[:, 0] = (u[:, 0, :2] - 0.5) * side
        for j in range(1, k):
            parent = np.minimum((u[:, j, 3] * j).astype(int), j - 1)
            x[:, j] = kernel_point(x[np.arange(B), parent], u[:, j, 0], u[:, j, 1], u[:, j, 2])
        inside = np.all(np.abs(x) <= 0.5 * side, axis=(1, 2))
        H = h(_dist(x[:, :, None, :], x[:, None, :, :], side, domain))
        qbar = np.zeros(B)
        for perm in perms:
            prod = np.ones(B)
            for j in range(1, k):
                prod *= H[:, perm[j], list(perm[:j])].mean(axis=1)
            qbar += prod
        qbar *= (1.0 / area) / len(perms)
        if k > 1:
            pe = np.stack([g(_dist(x[:, i], x[:, j], side, domain)) for i, j in pairs], axis=1)
            g1 = connect_probability_batch(pe, k)
        else:
            g1 = np.ones(B)

        shift = stream.child("inner").uniforms(B * 4, offset=start * 4).reshape(B, 1, 4)
        v = (base[None, :, :] + shift) % 1.0  # (B, inner, 4)
        which = np.minimum((v[..., 3] * k).astype(int), k - 1)
        centers = np.take_along_axis(x, which[..., None], axis=1)
        yv = kernel_point(centers, v[..., 0], v[..., 1], v[..., 2])
        dy = _dist(yv[:, :, None, :], x[:, None, :, :], side, domain)  # (B, inner, k)
        q_in = h(dy).mean(axis=2)
        g2 = 1.0 - np.prod(1.0 - g(dy), axis=2)
        if domain is Domain.SQUARE:
            g2 = g2 * np.all(np.abs(yv) <= 0.5 * side, axis=-1)
        ratio = g2 / q_in
        half = inner // 2
        J = ratio.mean(axis=1)
        Ja, Jb = ratio[:, :half].mean(axis=1), ratio[:, half:].mean(axis=1)
        var_J = 0.25 * (Ja - Jb) ** 2
        e = np.exp(-density * J)
        sl = slice(start, start + B)
        weights[sl] = np.where(inside, g1 * e / qbar, 0.0)
        bound_w[sl] = np.where(inside, e / qbar, 0.0)
        bias[sl] = np.where(inside, 0.5 * density ** 2 * var_J * g1 * e / qbar, 0.0)
    pref = math.exp(k * math.log(density) - math.lgamma(k + 1))
    mean = pref * float(weights.mean())
    se = pref * float(weights.std(ddof=1)) / math.sqrt(samples)
    bias_est = pref * float(bias.mean())
    return Estimate(mean, math.hypot(se, bias_est), samples,
                    meta={"g1_free_bound": pref * float(bound_w.mean()), "jensen_bias": bias_est,
                          "sampling_se": se})


def expected_components_order_k(rho: float, b: float, m: ConnectionModel, domain: Domain, k: int,
                                samples: int = 10_000, seed: int = 0, inner: int = 10_000,
                                parameterization: str = "rho") -> Estimate:
    """Monte-Carlo integration of E(xi_k) = (lam^k / k!) int g1 exp(-lam int g2).

    ``parameterization="rho"`` works on A with density rho and g(./r);
    ``"lambda"`` works on the rescaled square of side 1/r with density
    lam = (log rho + b)/C and unscaled g.  The two are equal by a change of
    variables and share random numbers, so they agree to rounding.
    """
    if not 1 <= k <= 5:
        raise ValueError("k must lie in 1..5")
    if samples < 2:
        raise ValueError("need at least two samples")
    r = critical_radius(rho, b, m.C)
    if math.isfinite(m.support):
        reach = m.support
    else:
        a = 1.0
        while tail_moment(m, a).value > 1e-4 * m.C / (2.0 * math.pi):
            a *= 1.25
        reach = a
    stream = Stream.from_seed(seed).child("components", k)
    if parameterization == "rho":
        return _order_k_integral(rho, 1.0, lambda d: m.evaluate(d / r), m.support * r, reach * r,
                                 domain, k, samples, inner, stream)
    if parameterization == "lambda":
        lam = (math.log(rho) + b) / m.C
        return _order_k_integral(lam, 1.0 / r, m.evaluate, m.support, reach, domain, k, samples,
                                 inner, stream)
    raise ValueError(f"unknown parameterization {parameterization!r}")
