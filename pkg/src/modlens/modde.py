"""Modular Differential Evolution.

Module slots: base vector (best/rand/target), reference vector
(none/best/pbest/rand), number of differences (1/2), external archive,
crossover (bin/exp), F and CR adaptation (none/jde/shade), and linear
population size reduction.

Donor composition rule (reproduces rand/1, best/1, current-to-pbest/1):

    v = x_base + F * (x_ref - x_base) [if ref != none]
               + sum_k F * (x_r_k - x_s_k)        k = 1..diffs

All sampled indices are drawn pairwise distinct and distinct from the
target where the population permits; with archive enabled the last
difference's subtrahend is drawn from population + archive.  Boundary
handling is saturation.  Fixed constants: pbest fraction 0.1, SHADE
memory size max(5, 6*dim), LPSR floor 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .configspace import Configuration
from .runresult import RunResult

PBEST_FRACTION = 0.1
LAMBDA_MIN = 4
JDE_RESAMPLE_P = 0.1


@dataclass(frozen=True)
class DeConfig:
    lam: int
    f: float
    cr: float
    base: str = "rand"
    ref: str = "none"
    diffs: int = 1
    archive: bool = False
    crossover: str = "bin"
    adaptation: str = "none"
    lpsr: bool = False

    def __post_init__(self):
        if self.lam < LAMBDA_MIN:
            raise ValueError(f"lambda must be >= {LAMBDA_MIN}")
        if not 0.0 <= self.cr <= 1.0:
            raise ValueError("cr must lie in [0, 1]")
        if self.f <= 0.0:
            raise ValueError("f must be positive")
        if self.diffs not in (1, 2):
            raise ValueError("diffs must be 1 or 2")

    @classmethod
    def from_values(cls, values: dict) -> "DeConfig":
        truthy = {"true": True, "false": False}
        return cls(
            lam=int(values["lambda"]),
            f=float(values["f"]),
            cr=float(values["cr"]),
            base=str(values["base"]),
            ref=str(values["ref"]),
            diffs=int(values["diffs"]),
            archive=truthy[str(values["archive"]).lower()],
            crossover=str(values["crossover"]),
            adaptation=str(values["adaptation"]).lower(),
            lpsr=truthy[str(values["lpsr"]).lower()],
        )


def from_configuration(config: Configuration) -> DeConfig:
    return DeConfig.from_values(config.values)


def _draw_excluding(rng: np.random.Generator, n: int, used: set) -> int:
    """Uniform index in [0, n) avoiding ``used`` when any candidate remains."""
    if len(used) >= n:
        return int(rng.integers(n))
    for _ in range(16 * n):
        j = int(rng.integers(n))
        if j not in used:
            return j
    choices = [j for j in range(n) if j not in used]
    return choices[int(rng.integers(len(choices)))]


def mutate(pop, fits, config: DeConfig, f_values, rng, archive) -> np.ndarray:
    """Donor vectors for every target index.

    Per target the rng is consumed in this order: base draw (rand base),
    reference draw (pbest/rand), then (r, s) per difference.
    """
    lam = len(pop)
    best = int(np.argmin(fits))
    n_top = max(1, math.ceil(PBEST_FRACTION * lam))
    top = np.argsort(fits, kind="stable")[:n_top]
    donors = np.empty_like(pop)
    arch_len = len(archive)

    for i in range(lam):
        used = {i}
        if config.base == "target":
            b = i
        elif config.base == "best":
            b = best
            used.add(b)
        else:
            b = _draw_excluding(rng, lam, used)
            used.add(b)
        v = pop[b].copy()

        if config.ref != "none":
            if config.ref == "best":
                r_ref = best
            elif config.ref == "rand":
                r_ref = _draw_excluding(rng, lam, used)
            else:  # pbest
                pool = [int(t) for t in top if int(t) not in used]
                if not pool:
                    pool = [int(t) for t in top]
                r_ref = pool[int(rng.integers(len(pool)))]
            used.add(r_ref)
            v = v + f_values[i] * (pop[r_ref] - pop[b])

        for k in range(config.diffs):
            r = _draw_excluding(rng, lam, used)
            used.add(r)
            with_archive = config.archive and k == config.diffs - 1
            if with_archive and arch_len:
                s = _draw_excluding(rng, lam + arch_len, used)
                used.add(s)
                x_s = archive[s - lam] if s >= lam else pop[s]
            else:
                s = _draw_excluding(rng, lam, used)
                used.add(s)
                x_s = pop[s]
            v = v + f_values[i] * (pop[r] - x_s)
        donors[i] = v
    return donors


def crossover(target, donor, cr: float, kind: str, rng) -> np.ndarray:
    """Binomial or exponential crossover; always takes >= 1 donor coordinate."""
    d = len(target)
    if kind == "bin":
        mask = rng.random(d) < cr
        mask[int(rng.integers(d))] = True
        return np.where(mask, donor, target)
    if kind == "exp":
        start = int(rng.integers(d))
        length = 1
        while length < d and rng.random() < cr:
            length += 1
        trial = target.copy()
        idx = (start + np.arange(length)) % d
        trial[idx] = donor[idx]
        return trial
    raise ValueError(f"unknown crossover {kind!r}")


def lpsr_schedule(lam_init: int, lam_min: int, budget: int, evals: int) -> int:
    """Linear population size at a given evaluation count."""
    if lam_min > lam_init:
        raise ValueError("lam_min must not exceed lam_init")
    frac = min(max(evals, 0), budget) / budget
    return int(round(lam_init + (lam_min - lam_init) * frac))


class ShadeMemory:
    """Success-history memory for F and CR (size max(5, 6 * dim))."""

    def __init__(self, dim: int, f_init: float, cr_init: float):
        self.size = max(5, 6 * dim)
        self.m_f = np.full(self.size, min(1.0, f_init))
        self.m_cr = np.full(self.size, float(np.clip(cr_init, 0.0, 1.0)))
        self.pos = 0

    def sample(self, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
        ks = rng.integers(self.size, size=n)
        f = np.empty(n)
        for j in range(n):
            val = 0.0
            while val <= 0.0:
                val = self.m_f[ks[j]] + 0.1 * rng.standard_cauchy()
            f[j] = min(val, 1.0)
        cr = np.clip(rng.normal(self.m_cr[ks], 0.1), 0.0, 1.0)
        return f, cr

    def update(self, f_succ, cr_succ, improvements) -> None:
        """Record one generation; no successes leaves the memory unchanged."""
        if len(f_succ) == 0:
            return
        w = np.asarray(improvements, dtype=float)
        w = w / np.sum(w) if np.sum(w) > 0 else np.full(len(f_succ), 1.0 / len(f_succ))
        f_succ = np.asarray(f_succ)
        cr_succ = np.asarray(cr_succ)
        self.m_f[self.pos] = np.sum(w * f_succ**2) / np.sum(w * f_succ)
        self.m_cr[self.pos] = np.sum(w * cr_succ)
        self.pos = (self.pos + 1) % self.size


def run(config: DeConfig, problem, budget: int, seed: int) -> RunResult:
    """Budget-exact DE run; deterministic given (config, problem, seed)."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1)))
    dim = problem.dim
    lower, upper = problem.lower, problem.upper

    traj = np.empty(budget)
    evals = 0
    best_f = math.inf
    best_x = None

    def eval_batch(xs: np.ndarray):
        nonlocal evals, best_f, best_x
        take = min(len(xs), budget - evals)
        xs_t = xs[:take]
        fs = problem.evaluate_many(xs_t)
        traj[evals : evals + take] = np.minimum(np.minimum.accumulate(fs), best_f)
        if take:
            k = int(np.argmin(fs))
            if fs[k] < best_f:
                best_f = float(fs[k])
                best_x = xs_t[k].copy()
        evals += take
        return fs, take < len(xs)

    lam = config.lam
    pop = rng.uniform(lower, upper, (lam, dim))
    fits, truncated = eval_batch(pop)
    if truncated:
        return RunResult(traj, best_x, best_f, 0, evals)

    archive: list[np.ndarray] = []
    jde_f = np.full(lam, config.f)
    jde_cr = np.full(lam, config.cr)
    shade = ShadeMemory(dim, config.f, config.cr) if config.adaptation == "shade" else None

    while evals < budget:
        lam = len(pop)
        if config.adaptation == "jde":
            new_f = jde_f.copy()
            new_cr = jde_cr.copy()
            m1 = rng.random(lam) < JDE_RESAMPLE_P
            new_f[m1] = 0.1 + 0.9 * rng.random(int(np.sum(m1)))
            m2 = rng.random(lam) < JDE_RESAMPLE_P
            new_cr[m2] = rng.random(int(np.sum(m2)))
            f_values, cr_values = new_f, new_cr
        elif config.adaptation == "shade":
            f_values, cr_values = shade.sample(lam, rng)
        else:
            f_values = np.full(lam, config.f)
            cr_values = np.full(lam, config.cr)

        donors = mutate(pop, fits, config, f_values, rng, archive)
        trials = np.empty_like(pop)
        for i in range(lam):
            trials[i] = crossover(pop[i], donors[i], cr_values[i], config.crossover, rng)
        np.clip(trials, lower, upper, out=trials)

        trial_fits, truncated = eval_batch(trials)
        if truncated:
            break

        f_succ, cr_succ, improvements = [], [], []
        for i in range(lam):
            if trial_fits[i] < fits[i]:
                f_succ.append(f_values[i])
                cr_succ.append(cr_values[i])
                improvements.append(fits[i] - trial_fits[i])
            if trial_fits[i] <= fits[i]:
                if config.archive:
                    archive.append(pop[i].copy())
                pop[i] = trials[i]
                fits[i] = trial_fits[i]
                if config.adaptation == "jde":
                    jde_f[i] = f_values[i]
                    jde_cr[i] = cr_values[i]

        if shade is not None:
            shade.update(f_succ, cr_succ, improvements)

        if config.lpsr:
            target = lpsr_schedule(config.lam, LAMBDA_MIN, budget, evals)
            if target < len(pop):
                keep = np.argsort(fits, kind="stable")[:target]
                keep = np.sort(keep)
                pop = pop[keep]
                fits = fits[keep]
                jde_f = jde_f[keep]
                jde_cr = jde_cr[keep]

        while len(archive) > len(pop):
            archive.pop(int(rng.integers(len(archive))))

    return RunResult(traj, best_x, best_f, 0, evals)
