"""Seeded Monte-Carlo experiments: per-trial graph statistics, estimators with
standard errors, and convergence sweeps over a density grid."""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .connfn import ConnectionModel, critical_radius, scaled
from .geometry import Domain, sample_poisson_process
from .graph import build_exact, build_pruned, choose_cutoff, components
from .rng import Stream
from .stats import TV, Estimate, binomial_estimate, empirical_pmf, mean_estimate, tv_to_poisson
from . import theory

CENSUS_MAX_K = 5


@dataclass(frozen=True)
class ExperimentConfig:
    model: ConnectionModel
    domain: Domain
    rho_grid: tuple[float, ...]
    b: float = 0.0
    trials: int = 10_000
    seed: int = 0
    M: int = 20
    builder: str = "pruned"
    eps_miss: float = 0.01
    epsilon: float = 0.1
    #: fixed link scale; None means the critical radius at (rho, b)
    radius: float | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "domain", Domain.parse(self.domain))
        grid = tuple(float(v) for v in np.atleast_1d(self.rho_grid))
        object.__setattr__(self, "rho_grid", grid)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not grid:
            raise ValueError("rho_grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("rho_grid must be strictly increasing")
        for rho in grid:
            if not (rho > 1 and math.isfinite(rho)):
                raise ValueError(f"density {rho} must be finite and > 1")
            if self.radius is None and math.log(rho) + self.b <= 0:
                raise ValueError(f"log(rho) + b <= 0 at rho={rho}")
        if self.builder not in ("exact", "pruned"):
            raise ValueError(f"unknown builder {self.builder!r}")
        if self.builder == "pruned" and not self.eps_miss > 0:
            raise ValueError("eps_miss must be positive")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def identity(self) -> tuple:
        """Everything that determines results (worker count excluded)."""
        return (repr(self.model), self.domain.value, self.rho_grid, self.b, self.trials, self.seed,
                self.M, self.builder, self.eps_miss if self.builder == "pruned" else None, self.radius)

    def config_hash(self) -> str:
        return hashlib.sha256(repr(self.identity()).encode()).hexdigest()[:16]

    def radius_at(self, rho: float) -> float:
        if self.radius is not None:
            return self.radius
        return critical_radius(rho, self.b, self.model.C)

    def rho_index(self, rho: float) -> int:
        try:
            return self.rho_grid.index(float(rho))
        except ValueError:
            raise ValueError(f"density {rho} is not on the grid") from None


@dataclass(frozen=True)
class TrialResult:
    n: int
    W: int
    connected: bool
    sizes: dict[int, int]  # component order -> count
    xi_gtM: int
    meta: dict = field(default_factory=dict, compare=False)

    def xi(self, k: int) -> int:
        return self.sizes.get(k, 0)

    def to_json(self) -> dict:
        return {"n": self.n, "W": self.W, "connected": self.connected, "xi_gtM": self.xi_gtM,
                "sizes": {str(k): v for k, v in sorted(self.sizes.items())}, **self.meta}


def trial_streams(cfg: ExperimentConfig, rho_index: int, trial_index: int) -> tuple[Stream, Stream]:
    base = Stream.from_seed(cfg.seed).child(rho_index, trial_index)
    return base.child("points"), base.child("edges")


def _cutoff(cfg: ExperimentConfig, rho: float, r: float) -> float:
    return choose_cutoff(scaled(cfg.model, r), rho, cfg.eps_miss)


def run_trial(cfg: ExperimentConfig, rho: float, trial_index: int, *, _R: float | None = None) -> TrialResult:
    """One realisation at grid density ``rho``; a pure function of its arguments."""
    i = cfg.rho_index(rho)
    r = cfg.radius_at(rho)
    pts_stream, edge_stream = trial_streams(cfg, i, trial_index)
    pts = sample_poisson_process(rho, pts_stream)
    m = scaled(cfg.model, r)
    if cfg.builder == "exact":
        inst = build_exact(pts, m, cfg.domain, edge_stream)
    else:
        R = _R if _R is not None else _cutoff(cfg, rho, r)
        inst = build_pruned(pts, m, cfg.domain, edge_stream, R, cfg.eps_miss)
    st = components(inst, cfg.M)
    return TrialResult(inst.n, st.isolated_count, st.connected, dict(st.order_histogram), st.count_gt_M,
                       meta={"trial": trial_index, "rho": rho})


_RUN_CACHE: dict[tuple, list[TrialResult]] = {}


def workers_from_env(default: int = 1) -> int:
    v = os.environ.get("RCM_LAB_WORKERS")
    return int(v) if v else default


def run_trials(cfg: ExperimentConfig, rho: float) -> list[TrialResult]:
    """All trials at ``rho``, ordered by trial index.

    Memoised on the config minus its trial count: trial t has the same
    streams whatever the count, so a longer cached run is sliced and a
    shorter one is extended.
    """
    ident = cfg.identity()
    key = (ident[:4] + ident[5:], float(rho))
    done = _RUN_CACHE.get(key, [])
    if len(done) < cfg.trials:
        r = cfg.radius_at(rho)
        R = _cutoff(cfg, rho, r) if cfg.builder == "pruned" else None
        job = lambda t: run_trial(cfg, rho, t, _R=R)
        todo = range(len(done), cfg.trials)
        if cfg.workers == 1:
            new = [job(t) for t in todo]
        else:
            with ThreadPoolExecutor(cfg.workers) as ex:
                new = list(ex.map(job, todo))  # map keeps index order
        done = done + new
        _RUN_CACHE[key] = done
    return done[: cfg.trials]


def clear_cache() -> None:
    _RUN_CACHE.clear()


# --- estimators -------------------------------------------------------------

@dataclass(frozen=True)
class IsolatedLaw:
    pmf: np.ndarray
    mean: Estimate
    variance: float
    tv_asymptotic: TV
    tv_exact: TV
    exact_mean: float


def _exact_mean(cfg: ExperimentConfig, rho: float) -> float:
    return theory.mean_isolated_exact(rho, cfg.model, cfg.domain, b=cfg.b, r=cfg.radius_at(rho)).value


def estimate_isolated_pmf(cfg: ExperimentConfig, rho: float) -> IsolatedLaw:
    W = np.array([t.W for t in run_trials(cfg, rho)])
    exact = _exact_mean(cfg, rho)
    return IsolatedLaw(
        pmf=empirical_pmf(W),
        mean=mean_estimate(W),
        variance=float(W.var(ddof=1)) if W.size > 1 else 0.0,
        tv_asymptotic=tv_to_poisson(W, theory.mean_isolated_asymptotic(cfg.b)),
        tv_exact=tv_to_poisson(W, exact),
        exact_mean=exact,
    )


def estimate_prob_no_isolated(cfg: ExperimentConfig, rho: float) -> Estimate:
    res = run_trials(cfg, rho)
    return binomial_estimate(sum(t.W == 0 for t in res), len(res))


def estimate_prob_connected(cfg: ExperimentConfig, rho: float) -> Estimate:
    res = run_trials(cfg, rho)
    return binomial_estimate(sum(t.connected for t in res), len(res))


@dataclass(frozen=True)
class Census:
    xi: dict[int, Estimate]
    giant: Estimate  # P(xi_{>M} = 1)
    M: int


def estimate_component_census(cfg: ExperimentConfig, rho: float) -> Census:
    res = run_trials(cfg, rho)
    xi = {k: mean_estimate([t.xi(k) for t in res]) for k in range(1, CENSUS_MAX_K + 1)}
    giant = binomial_estimate(sum(t.xi_gtM == 1 for t in res), len(res))
    return Census(xi, giant, cfg.M)


# --- sweeps -----------------------------------------------------------------

SWEEP_COLUMNS = (
    "rho", "b", "r", "trials",
    "mean_W", "mean_W_se", "mean_W_exact", "mean_W_limit", "var_over_mean",
    "p_no_isolated", "p_no_isolated_se", "p_no_isolated_limit",
    "p_connected", "p_connected_se", "p_connected_limit",
    "tv_limit", "tv_limit_se", "tv_exact", "tv_exact_se",
    "p_giant", "p_giant_se", "chenstein_total",
)
TREND_COLUMNS = ("mean_W", "var_over_mean", "p_no_isolated", "p_connected", "tv_limit", "tv_exact",
                 "p_giant", "chenstein_total")


def trend(values: Sequence[float]) -> str:
    """'decreasing', 'increasing', 'flat' or 'mixed' from the signs of successive differences."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size < 2:
        return "flat"
    d = np.sign(np.diff(v))
    if (d == 0).all():
        return "flat"
    if (d <= 0).all():
        return "decreasing"
    if (d >= 0).all():
        return "increasing"
    return "mixed"


@dataclass(frozen=True)
class SweepTable:
    rows: list[dict]
    trends: dict[str, str]
    config: ExperimentConfig

    def column(self, name: str) -> list[float]:
        return [row[name] for row in self.rows]


def _chenstein_total(cfg: ExperimentConfig, rho: float) -> float:
    if cfg.domain is not Domain.TORUS or cfg.radius is not None:
        return math.nan
    from .chenstein import NeighborhoodSpec, tv_bound_total

    try:
        return tv_bound_total(rho, cfg.b, NeighborhoodSpec(cfg.epsilon), cfg.model, Domain.TORUS).total
    except ValueError:
        return math.nan


def convergence_sweep(cfg: ExperimentConfig) -> SweepTable:
    rows = []
    for rho in cfg.rho_grid:
        law = estimate_isolated_pmf(cfg, rho)
        p0 = estimate_prob_no_isolated(cfg, rho)
        pc = estimate_prob_connected(cfg, rho)
        census = estimate_component_census(cfg, rho)
        limit = theory.prob_no_isolated_asymptotic(cfg.b)
        rows.append({
            "rho": rho, "b": cfg.b, "r": cfg.radius_at(rho), "trials": cfg.trials,
            "mean_W": law.mean.mean, "mean_W_se": law.mean.stderr, "mean_W_exact": law.exact_mean,
            "mean_W_limit": theory.mean_isolated_asymptotic(cfg.b),
            "var_over_mean": law.variance / law.mean.mean if law.mean.mean > 0 else math.nan,
            "p_no_isolated": p0.mean, "p_no_isolated_se": p0.stderr, "p_no_isolated_limit": limit,
            "p_connected": pc.mean, "p_connected_se": pc.stderr,
            "p_connected_limit": theory.prob_connected_asymptotic(cfg.b),
            "tv_limit": law.tv_asymptotic.value, "tv_limit_se": law.tv_asymptotic.stderr,
            "tv_exact": law.tv_exact.value, "tv_exact_se": law.tv_exact.stderr,
            "p_giant": census.giant.mean, "p_giant_se": census.giant.stderr,
            "chenstein_total": _chenstein_total(cfg, rho),
        })
    trends = {c: trend([row[c] for row in rows]) for c in TREND_COLUMNS}
    return SweepTable(rows, trends, cfg)


def format_number(v) -> str:
    """Nine significant digits; integers and booleans verbatim."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.9g}"


def dump_trials_jsonl(cfg: ExperimentConfig, path, fh=None) -> None:
    """One JSON object per trial, grid order then trial order."""
    lines = []
    for rho in cfg.rho_grid:
        for t in run_trials(cfg, rho):
            lines.append(json.dumps(t.to_json(), sort_keys=True))
    text = "\n".join(lines) + ("\n" if lines else "")
    if fh is not None:
        fh.write(text)
    else:
        with open(path, "w", newline="") as f:
            f.write(text)
