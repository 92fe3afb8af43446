"""Algorithm family registry mapping configuration values to run functions."""

from __future__ import annotations

import math

import numpy as np

from . import modcma, modde
from .runresult import RunResult


def run_random_search(problem, budget: int, seed: int) -> RunResult:
    """Uniform random search baseline (used by the bias false-positive tests)."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1)))
    best_f = math.inf
    best_x = None
    traj = np.empty(budget)
    done = 0
    while done < budget:
        n = min(4096, budget - done)
        xs = rng.uniform(problem.lower, problem.upper, (n, problem.dim))
        fs = problem.evaluate_many(xs)
        traj[done : done + n] = np.minimum(np.minimum.accumulate(fs), best_f)
        k = int(np.argmin(fs))
        if fs[k] < best_f:
            best_f = float(fs[k])
            best_x = xs[k].copy()
        done += n
    return RunResult(traj, best_x, best_f, 0, budget)


def _run_modcma(values, problem, budget, seed):
    return modcma.run(modcma.CmaConfig.from_values(values), problem, budget, seed)


def _run_modde(values, problem, budget, seed):
    return modde.run(modde.DeConfig.from_values(values), problem, budget, seed)


def _run_rs(values, problem, budget, seed):
    return run_random_search(problem, budget, seed)


FAMILIES = {
    "modcma": _run_modcma,
    "modde": _run_modde,
    "random_search": _run_rs,
}


def run_family(family: str, values: dict, problem, budget: int, seed: int) -> RunResult:
    try:
        runner = FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"unknown family {family!r}; known: {sorted(FAMILIES)}"
        ) from None
    return runner(values, problem, budget, seed)
