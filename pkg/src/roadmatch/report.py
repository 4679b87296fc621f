"""Monte-Carlo aggregation across seeds and NEES consistency bands."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np
from scipy.stats import chi2

from roadmatch.matcher import MatchConfig
from roadmatch.simulator import Scenario, run_scenario


class SeedFailure(RuntimeError):
    def __init__(self, seed: int, cause):
        self.seed = seed
        self.cause = cause if isinstance(cause, str) else repr(cause)
        super().__init__(f"seed {seed} failed: {self.cause}")

    def __reduce__(self):
        return SeedFailure, (self.seed, self.cause)


def nees_band(dof: int = 3, level: float = 0.95, runs: int = 1) -> tuple[float, float]:
    """Two-sided acceptance band for a NEES averaged over ``runs``
    independent samples of a ``dof``-dimensional error."""
    alpha = (1 - level) / 2
    n = dof * runs
    return float(chi2.ppf(alpha, n) / runs), float(chi2.ppf(1 - alpha, n) / runs)


def _one(args):
    scenario, config = args
    try:
        sim, results, metrics = run_scenario(scenario, config)
    except Exception as exc:  # reported with the seed attached
        raise SeedFailure(scenario.seed, exc) from exc
    return {
        "seed": scenario.seed,
        "correct_rate": metrics.correct_rate,
        "rmse": metrics.rmse,
        "final_error": metrics.final_error,
        "final_correct": results[-1].best_segment == sim.truth.segment_ids[-1],
        "disambiguation": metrics.disambiguation_steps,
        "nees": metrics.nees.tolist(),
    }


def monte_carlo(scenario: Scenario, seeds, config: MatchConfig | None = None, jobs: int = 1) -> dict:
    tasks = [(replace(scenario, seed=int(s)), config) for s in seeds]
    if not tasks:
        raise ValueError("need at least one seed")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_one, tasks))
    else:
        runs = [_one(t) for t in tasks]
    rates = np.array([r["correct_rate"] for r in runs])
    steps = [d for r in runs for d in r["disambiguation"]]
    all_nees = np.concatenate([np.asarray(r["nees"]) for r in runs])
    lo, hi = nees_band(3)
    resolved = [d for d in steps if d is not None]
    report = {
        "kind": scenario.kind,
        "seeds": [r["seed"] for r in runs],
        "mean_rate": float(rates.mean()),
        "min_rate": float(rates.min()),
        "final_correct_fraction": float(np.mean([r["final_correct"] for r in runs])),
        "mean_final_error": float(np.mean([r["final_error"] for r in runs])),
        "disambiguation_steps": steps,
        "disambiguation_summary": {
            "events": len(steps),
            "unresolved": sum(d is None for d in steps),
            "median": float(np.median(resolved)) if resolved else None,
            "max": int(max(resolved)) if resolved else None,
        },
        "nees": {
            "band_3dof_95": [lo, hi],
            "mean": float(np.nanmean(all_nees)),
            "coverage": float(np.mean((all_nees >= lo) & (all_nees <= hi))),
        },
        "runs": [{k: v for k, v in r.items() if k != "nees"} for r in runs],
    }
    # per-step NEES averaged across runs, when all runs have equal length
    lengths = {len(r["nees"]) for r in runs}
    if len(lengths) == 1:
        anees = np.mean([r["nees"] for r in runs], axis=0)
        alo, ahi = nees_band(3, runs=len(runs))
        report["nees"]["anees_band"] = [alo, ahi]
        report["nees"]["anees_coverage"] = float(np.mean((anees >= alo) & (anees <= ahi)))
    return report
