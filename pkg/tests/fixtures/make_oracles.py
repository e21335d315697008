"""Regenerate the frozen oracle values in oracles.json.

    python3 tests/fixtures/make_oracles.py [square|sweep|all]

Independent of the package's integrators and RNG: the square-domain mean
uses numpy's PCG64 and Poisson thinning; the TV calibration sweep runs the
simulator at seeds that the acceptance suite does not use.
"""
from __future__ import annotations

import json
import math
import sys
import time
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
OUT = HERE / "oracles.json"


def square_mean_mc(rho: float, b: float, samples: int, seed: int = 2024, chunk: int = 500_000):
    """rho * E_y[exp(-rho |A cap D(y, r)|)] for the unit-disk model on the square.

    For each uniform y, throw Poisson(rho pi r^2) uniform points into the
    disk about y; the event 'none of them lands in A' has probability
    exp(-rho |A cap D(y, r)|), which makes the indicator unbiased.
    """
    r = math.sqrt((math.log(rho) + b) / (math.pi * rho))
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        y = rng.random((n, 2)) - 0.5
        k = rng.poisson(rho * math.pi * r * r, n)
        owner = np.repeat(np.arange(n), k)
        rad = r * np.sqrt(rng.random(owner.size))
        ang = 2 * math.pi * rng.random(owner.size)
        px = y[owner, 0] + rad * np.cos(ang)
        py = y[owner, 1] + rad * np.sin(ang)
        inside = (np.abs(px) <= 0.5) & (np.abs(py) <= 0.5)
        covered = np.zeros(n, dtype=bool)
        covered[owner[inside]] = True
        hits += int((~covered).sum())
        done += n
    p = hits / samples
    return rho * p, rho * math.sqrt(p * (1 - p) / samples)


def tv_sweep(seeds, grid, trials):
    from rcm_lab.connfn import UnitDisk
    from rcm_lab.montecarlo import ExperimentConfig, estimate_isolated_pmf

    rows = []
    for seed in seeds:
        cfg = ExperimentConfig(UnitDisk(), "torus", tuple(grid), 0.0, trials, seed)
        for rho in grid:
            t0 = time.time()
            law = estimate_isolated_pmf(cfg, rho)
            rows.append({"seed": seed, "rho": rho, "trials": trials, "tv": law.tv_asymptotic.value,
                         "tv_se": law.tv_asymptotic.stderr, "mean_W": law.mean.mean,
                         "var_W": law.variance})
            print(rows[-1], f"{time.time() - t0:.1f}s", flush=True)
    return rows


def main(what: str = "all"):
    data = json.loads(OUT.read_text()) if OUT.exists() else {}
    if what in ("square", "all"):
        v, se = square_mean_mc(500.0, 0.0, 10_000_000)
        data["square_mean_unit_disk_rho500_b0"] = {"value": v, "stderr": se, "samples": 10_000_000,
                                                   "method": "4-D Monte Carlo, Poisson thinning, PCG64 seed 2024"}
        print("square", v, se)
    if what in ("sweep", "all"):
        grid = [200.0, 400.0, 800.0, 1600.0, 3200.0]
        data["tv_calibration_sweep"] = {"model": "unit-disk", "domain": "torus", "b": 0.0,
                                        "grid": grid, "rows": tv_sweep([101, 102, 103], grid, 10_000)}
    OUT.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main(*sys.argv[1:])
