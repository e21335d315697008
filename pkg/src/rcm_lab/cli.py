"""Command-line front end: ``rcm-lab {simulate,theory,chenstein,sweep,validate-model}``.

Settings come from built-in defaults, then an optional INI file (section
named after the subcommand), then command-line flags, later sources
winning.  Output is CSV (RFC 4180, header row, ``\\n`` endings) or JSON
lines, preceded by metadata comment lines (version, seed, config hash).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, theory
from .connfn import DivergenceError, check_strict_decay, make_model, spreading_constant
from .geometry import Domain
from .graph import CutoffError
from .quadrature import QuadratureError

SUBCOMMANDS = ("simulate", "theory", "chenstein", "sweep", "validate-model")
MODELS = ("unit-disk", "exponential", "rayleigh", "lognormal", "tabulated")

# setting name -> (flag, parse function)
_SETTINGS = {
    "model": "--model", "sigma": "--sigma", "alpha": "--alpha", "file": "--file", "rho": "--rho",
    "rho_grid": "--rho-grid", "b": "--b", "epsilon": "--epsilon", "trials": "--trials", "seed": "--seed",
    "workers": "--workers", "M": "--M", "domain": "--domain", "builder": "--builder",
    "eps_miss": "--eps-miss", "out": "--out", "format": "--format", "dump_trials": "--dump-trials",
}
_DEFAULTS = {
    "model": "unit-disk", "sigma": 4.0, "alpha": 3.0, "b": 0.0, "epsilon": 0.1, "M": 20,
    "domain": "torus", "builder": "pruned", "eps_miss": 0.01, "format": "csv",
}
_TRIAL_DEFAULTS = {"simulate": 10_000, "sweep": 10_000}

# Fixed output schemas, one per subcommand.
COLUMNS = {
    "simulate": ("rho", "b", "statistic", "estimate", "stderr", "prediction"),
    "sweep": ("rho", "b", "statistic", "estimate", "stderr", "prediction", "trend"),
    "theory": ("quantity", "value", "kind", "rho", "b"),
    "chenstein": ("rho", "b", "epsilon", "b1", "b2_bound", "b3_gap", "eta", "total"),
    "validate-model": ("check", "result", "detail"),
}

_EPILOG = "output columns:\n" + "\n".join(f"  {k}: {','.join(v)}" for k, v in COLUMNS.items())


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"argument {flag}: {message}")
        self.flag = flag


@dataclass
class CliInvocation:
    subcommand: str
    config_path: str | None
    overrides: dict
    settings: dict = field(default_factory=dict)
    emit_config: str | None = None

    @property
    def output(self) -> tuple[str | None, str]:
        return self.settings.get("out"), self.settings.get("format", "csv")


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _positive_int(v):
    return int(v)


_PARSERS = {
    "sigma": float, "alpha": float, "rho": float, "rho_grid": _float_list, "b": float, "epsilon": float,
    "trials": _positive_int, "seed": int, "workers": int, "M": int, "eps_miss": float,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("settings")
    g.add_argument("--config", help="INI file; the section named after the subcommand is read")
    g.add_argument("--model", choices=MODELS, help="connection function (default unit-disk)")
    g.add_argument("--sigma", help="log-normal shadowing spread in dB (default 4)")
    g.add_argument("--alpha", help="log-normal path-loss exponent (default 3)")
    g.add_argument("--file", help="knot file for --model tabulated: 'distance probability' per line")
    g.add_argument("--rho", help="node density, > 1")
    g.add_argument("--rho-grid", dest="rho_grid", help="comma-separated, strictly increasing densities")
    g.add_argument("--b", help="offset in the critical radius (default 0)")
    g.add_argument("--epsilon", help="neighbourhood exponent for the Chen-Stein terms, in (0, 1/2) (default 0.1)")
    g.add_argument("--trials", help="trials per density (default 10000)")
    g.add_argument("--seed", help="master seed (required for simulate and sweep)")
    g.add_argument("--workers", help="worker threads (default $RCM_LAB_WORKERS or 1); output does not depend on it")
    g.add_argument("--M", dest="M", help="component-size threshold for the giant-component statistic (default 20)")
    g.add_argument("--domain", choices=("square", "torus"), help="default torus")
    g.add_argument("--builder", choices=("exact", "pruned"), help="graph builder (default pruned)")
    g.add_argument("--eps-miss", dest="eps_miss", help="expected missed-edge budget of the pruned builder (default 0.01)")
    g.add_argument("--out", help="output path (default stdout)")
    g.add_argument("--format", choices=("csv", "jsonl"), help="output format (default csv)")
    g.add_argument("--dump-trials", dest="dump_trials", help="write one JSON object per trial to this path")
    g.add_argument("--emit-config", dest="emit_config", help="write the effective settings as INI and exit")

    parser = argparse.ArgumentParser(
        prog="rcm-lab", description="Connectivity experiments for the random connection model.",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"rcm-lab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    helps = {
        "simulate": "Monte-Carlo estimates at one (rho, b)",
        "theory": "limit values, exact finite-density means and component bounds",
        "chenstein": "Chen-Stein bound terms over a density grid (torus)",
        "sweep": "estimates and predictions over a density grid",
        "validate-model": "monotonicity, decay and spreading-constant checks",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], description=helps[name],
                       epilog=f"output columns: {','.join(COLUMNS[name])}")
    return parser


def _read_config(path: str, section: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if not cp.read(path):
        raise UsageError("--config", f"cannot read {path}")
    if not cp.has_section(section):
        return {}
    out = {}
    for key, value in cp.items(section):
        name = key.replace("-", "_")
        if name == "m":
            name = "M"
        if name not in _SETTINGS:
            raise UsageError("--config", f"unknown key {key!r} in section [{section}]")
        out[name] = value
    return out


def _validate(sub: str, s: dict) -> dict:
    """Parse strings and check ranges; errors name the offending flag."""
    out = {}
    for name, value in s.items():
        if value is None:
            continue
        flag = _SETTINGS[name]
        try:
            out[name] = _PARSERS.get(name, str)(value)
        except (TypeError, ValueError):
            raise UsageError(flag, f"invalid value {value!r}") from None

    def need(name, ok, msg):
        if name in out and not ok(out[name]):
            raise UsageError(_SETTINGS[name], f"{msg}, got {s[name]!r}")

    finite = lambda v: math.isfinite(v)
    need("rho", lambda v: finite(v) and v > 1, "density must be finite and > 1")
    need("rho_grid", lambda v: len(v) > 0 and all(math.isfinite(x) and x > 1 for x in v)
         and all(b > a for a, b in zip(v, v[1:])), "densities must be finite, > 1 and strictly increasing")
    need("b", finite, "must be finite")
    need("epsilon", lambda v: 0 < v < 0.5, "must lie in (0, 1/2)")
    need("trials", lambda v: v >= 1, "must be >= 1")
    need("seed", lambda v: v >= 0, "must be non-negative")
    need("workers", lambda v: v >= 1, "must be >= 1")
    need("M", lambda v: v >= 1, "must be >= 1")
    need("eps_miss", lambda v: finite(v) and v > 0, "must be positive")
    need("sigma", lambda v: finite(v) and v > 0, "must be positive")
    need("alpha", lambda v: finite(v) and v > 0, "must be positive")
    need("model", lambda v: v in MODELS, "unknown model")
    need("domain", lambda v: v in ("square", "torus"), "unknown domain")
    need("builder", lambda v: v in ("exact", "pruned"), "unknown builder")
    need("format", lambda v: v in ("csv", "jsonl"), "unknown format")

    if out.get("model") == "tabulated" and not out.get("file"):
        raise UsageError("--file", "required with --model tabulated")
    if sub in ("simulate", "sweep") and "seed" not in out:
        raise UsageError("--seed", "required: all randomness derives from it")
    if sub == "simulate" and "rho" not in out:
        raise UsageError("--rho", "required for simulate")
    if sub == "sweep" and "rho_grid" not in out and "rho" not in out:
        raise UsageError("--rho-grid", "required for sweep")
    if sub == "chenstein" and out.get("domain") == "square":
        raise UsageError("--domain", "the Chen-Stein terms are evaluated on the torus only")
    for rho in ([out["rho"]] if "rho" in out else []) + out.get("rho_grid", []):
        if math.log(rho) + out.get("b", 0.0) <= 0:
            raise UsageError("--b", f"log(rho) + b must be positive (rho={rho})")
    return out


def parse_invocation(argv=None) -> CliInvocation:
    """Parse ``argv``; raises SystemExit(2) with a message naming the bad flag."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    sub = ns.subcommand
    overrides = {k: getattr(ns, k) for k in _SETTINGS if getattr(ns, k, None) is not None}
    merged = dict(_DEFAULTS)
    if sub in _TRIAL_DEFAULTS:
        merged["trials"] = _TRIAL_DEFAULTS[sub]
    env = os.environ.get("RCM_LAB_WORKERS")
    merged["workers"] = env if env else 1
    try:
        if ns.config:
            merged.update(_read_config(ns.config, sub))
        merged.update(overrides)
        settings = _validate(sub, merged)
    except UsageError as e:
        sub_parser = parser._subparsers._group_actions[0].choices[sub]
        sub_parser.error(str(e))
    return CliInvocation(sub, ns.config, overrides, settings, ns.emit_config)


# --- execution --------------------------------------------------------------

def _model(s):
    return make_model(s["model"], sigma=s["sigma"], alpha=s["alpha"], file=s.get("file"))


def _grid(s) -> list[float]:
    if "rho_grid" in s:
        return list(s["rho_grid"])
    return [s["rho"]] if "rho" in s else []


def config_hash(settings: dict) -> str:
    keep = {k: v for k, v in settings.items() if k not in ("workers", "out", "format", "dump_trials")}
    return hashlib.sha256(json.dumps(keep, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _fmt(v) -> str:
    from .montecarlo import format_number

    if isinstance(v, str):
        return v
    if v is None:
        return ""
    return format_number(v)


def _write(inv: CliInvocation, rows: list[tuple], stream=None) -> None:
    columns = COLUMNS[inv.subcommand]
    s = inv.settings
    meta = {"tool": "rcm-lab", "version": __version__, "subcommand": inv.subcommand,
            "seed": s.get("seed"), "config_hash": config_hash(s)}
    buf = io.StringIO(newline="")
    if s.get("format", "csv") == "jsonl":
        buf.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for row in rows:
            buf.write(json.dumps(dict(zip(columns, (_fmt(v) for v in row)))) + "\n")
    else:
        for k, v in meta.items():
            buf.write(f"# {k}={'' if v is None else v}\n")
        w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    out = s.get("out")
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        (stream or sys.stdout).write(text)


def _experiment(s, grid):
    from .montecarlo import ExperimentConfig

    return ExperimentConfig(
        model=_model(s), domain=Domain.parse(s["domain"]), rho_grid=tuple(grid), b=s["b"],
        trials=s["trials"], seed=s["seed"], M=s["M"], builder=s["builder"], eps_miss=s["eps_miss"],
        epsilon=s["epsilon"], workers=s["workers"])


def _estimate_rows(cfg, rho, trend=None):
    from . import montecarlo as mc

    law = mc.estimate_isolated_pmf(cfg, rho)
    p0 = mc.estimate_prob_no_isolated(cfg, rho)
    pc = mc.estimate_prob_connected(cfg, rho)
    census = mc.estimate_component_census(cfg, rho)
    b = cfg.b
    rows = [
        ("mean_W", law.mean.mean, law.mean.stderr, law.exact_mean),
        ("var_over_mean", law.variance / law.mean.mean if law.mean.mean > 0 else math.nan, None, 1.0),
        ("p_no_isolated", p0.mean, p0.stderr, theory.prob_no_isolated_asymptotic(b)),
        ("p_connected", pc.mean, pc.stderr, theory.prob_connected_asymptotic(b)),
        ("tv_limit", law.tv_asymptotic.value, law.tv_asymptotic.stderr, 0.0),
        ("tv_exact", law.tv_exact.value, law.tv_exact.stderr, 0.0),
        ("p_giant", census.giant.mean, census.giant.stderr, theory.xi_gtM_prob_lower_bound(cfg.M, b)),
    ]
    rows += [(f"xi_{k}", e.mean, e.stderr, None) for k, e in census.xi.items()]
    out = []
    for name, est, se, pred in rows:
        row = (rho, b, name, est, se, pred)
        if trend is not None:
            row = row + (trend.get(name, ""),)
        out.append(row)
    return out


def _run_simulate(inv):
    from .montecarlo import dump_trials_jsonl

    cfg = _experiment(inv.settings, [inv.settings["rho"]])
    rows = _estimate_rows(cfg, cfg.rho_grid[0])
    if inv.settings.get("dump_trials"):
        dump_trials_jsonl(cfg, inv.settings["dump_trials"])
    return rows


def _run_sweep(inv):
    from .montecarlo import convergence_sweep, dump_trials_jsonl

    cfg = _experiment(inv.settings, _grid(inv.settings))
    table = convergence_sweep(cfg)
    trends = dict(table.trends)
    rows = []
    for rho in cfg.rho_grid:
        rows += _estimate_rows(cfg, rho, trends)
    if not math.isnan(table.rows[0]["chenstein_total"]):
        for row in table.rows:
            rows.append((row["rho"], cfg.b, "chenstein_total", row["chenstein_total"], None, None,
                         trends["chenstein_total"]))
    if inv.settings.get("dump_trials"):
        dump_trials_jsonl(cfg, inv.settings["dump_trials"])
    return rows


def _run_theory(inv):
    s = inv.settings
    b, M = s["b"], s["M"]
    rows = [
        ("mean_isolated_limit", theory.mean_isolated_asymptotic(b), "asymptotic", None, b),
        ("prob_no_isolated_limit", theory.prob_no_isolated_asymptotic(b), "asymptotic", None, b),
        ("prob_connected_limit", theory.prob_connected_asymptotic(b), "asymptotic", None, b),
        (f"xi_gt{M}_prob_lower_bound", theory.xi_gtM_prob_lower_bound(M, b), "bound", None, b),
        (f"mean_xi_gt{M}_upper_bound", theory.mean_xi_gtM_upper_bound(M, b).value, "bound", None, b),
    ]
    grid = _grid(s)
    if grid:
        m = _model(s)
        dom = Domain.parse(s["domain"])
        for rho in grid:
            p = theory.mean_isolated_exact(rho, m, dom, b=b)
            rows.append((f"mean_isolated_exact_{dom.value}", p.value, "exact", rho, b))
    return rows


def _run_chenstein(inv):
    from .chenstein import NeighborhoodSpec, tv_bound_total

    s = inv.settings
    grid = _grid(s) or [1e3, 1e4, 1e5]
    spec = NeighborhoodSpec(s["epsilon"])
    m = _model(s)
    return [tv_bound_total(rho, s["b"], spec, m, Domain.TORUS).row() for rho in grid]


class CheckFailed(Exception):
    pass


def _run_validate(inv):
    s = inv.settings
    try:
        m = _model(s)
    except ValueError as e:
        raise CheckFailed(f"monotonicity check: {e}") from None
    rows = [("non_increasing", "pass", "")]
    verdict = check_strict_decay(m, np.geomspace(1.0, 1e4, 401))
    rows.append(("strict_decay", verdict.verdict, "" if verdict.witness is None else f"rise at x={verdict.witness:.9g}"))
    C = spreading_constant(m)
    rows.append(("spreading_constant", "pass", _fmt(C)))
    failed = verdict.verdict == "fail"
    return rows, failed


_RUNNERS = {"simulate": _run_simulate, "sweep": _run_sweep, "theory": _run_theory,
            "chenstein": _run_chenstein}


def emit_config(inv: CliInvocation, path: str) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    sec = {}
    for name, value in sorted(inv.settings.items()):
        if name in ("emit_config",):
            continue
        if name == "rho_grid":
            value = ",".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        sec[name] = str(value)
    cp[inv.subcommand] = sec
    with open(path, "w", newline="") as fh:
        cp.write(fh)


def execute(inv: CliInvocation, stream=None) -> int:
    if inv.emit_config:
        emit_config(inv, inv.emit_config)
        return 0
    op = inv.subcommand
    try:
        if op == "validate-model":
            try:
                rows, failed = _run_validate(inv)
            except CheckFailed as e:
                print(f"rcm-lab validate-model: {e}", file=sys.stderr)
                return 1
            _write(inv, rows, stream)
            if failed:
                print("rcm-lab validate-model: strict-decay check failed", file=sys.stderr)
                return 1
            return 0
        rows = _RUNNERS[op](inv)
    except (QuadratureError, DivergenceError, CutoffError, ValueError, OSError) as e:
        print(f"rcm-lab {op}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    _write(inv, rows, stream)
    return 0


def main(argv=None) -> int:
    inv = parse_invocation(argv)
    return execute(inv)


if __name__ == "__main__":
    sys.exit(main())
