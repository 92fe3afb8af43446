"""Modular CMA-ES with configurable operator modules.

Modules: covariance adaptation on/off (off freezes C at the identity,
an MA-ES-like simplification), active update, base sampler
(gaussian/halton/sobol through the inverse normal CDF), elitism,
mirrored sampling (off/mirrored/pairwise), recombination weights
(default/equal/lambda_decay), step-size adaptation (csa/psr), and
local restarts (none/ipop/bipop).

Fixed constants: Hansen-default cumulation/learning rates, PSR target
0.25 with damping 2, sigma0 = 0.2 * box width, eigendecomposition
refreshed every max(1, floor(1/(10 d (c1+cmu)))) generations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .configspace import Configuration
from .samplers import make_sampler
from .runresult import RunResult

PSR_TARGET = 0.25
PSR_DAMPING = 2.0
SIGMA_MIN = 1e-12
SIGMA_MAX = 1e12
EIG_FLOOR = 1e-14


def default_lambda(dim: int) -> int:
    return 4 + int(math.floor(3.0 * math.log(dim)))


@dataclass(frozen=True)
class CmaConfig:
    lam: int
    mu: int
    covariance: bool = True
    active: bool = False
    base_sampler: str = "gaussian"
    elitist: bool = False
    mirrored: str = "off"
    weights: str = "default"
    ssa: str = "csa"
    local_restart: str = "none"

    def __post_init__(self):
        if self.mu > self.lam:
            raise ValueError(f"mu={self.mu} exceeds lambda={self.lam}")
        if self.lam < 1 or self.mu < 1:
            raise ValueError("lambda and mu must be positive")

    @classmethod
    def from_values(cls, values: dict) -> "CmaConfig":
        truthy = {"true": True, "false": False}
        return cls(
            lam=int(values["lambda"]),
            mu=int(values["mu"]),
            covariance=truthy[str(values["covariance"]).lower()],
            active=truthy[str(values["active"]).lower()],
            base_sampler=str(values["base_sampler"]),
            elitist=truthy[str(values["elitist"]).lower()],
            mirrored=str(values["mirrored"]),
            weights=str(values["weights"]),
            ssa=str(values["ssa"]),
            local_restart=str(values["local_restart"]),
        )


def from_configuration(config: Configuration) -> CmaConfig:
    return CmaConfig.from_values(config.values)


def recombination_weights(kind: str, lam: int, mu: int) -> np.ndarray:
    """Positive recombination weights of length mu, normalized to sum 1."""
    if mu > lam:
        raise ValueError("mu must not exceed lambda")
    i = np.arange(1, mu + 1, dtype=float)
    if kind == "equal":
        w = np.ones(mu)
    elif kind == "default":
        w = np.log((lam + 1.0) / 2.0) - np.log(i)
        w = np.maximum(w, 0.0)
        if not np.any(w > 0.0):
            w = np.ones(mu)
    elif kind == "lambda_decay":
        w = lambda_decay_weights(lam)[:mu]
    else:
        raise ValueError(f"unknown weights kind {kind!r}")
    return w / np.sum(w)


def lambda_decay_weights(lam: int) -> np.ndarray:
    """Raw decay weights w_i = 2^-i + 1/(lam * 2^lam), before truncation."""
    i = np.arange(1, lam + 1, dtype=float)
    return np.power(2.0, -i) + 1.0 / (lam * math.pow(2.0, lam))


class _Constants:
    """Strategy constants for a given (dim, lambda, mu, weights kind)."""

    def __init__(self, dim: int, lam: int, mu: int, weights_kind: str, pool: int):
        self.lam = lam
        self.pool = pool  # selection pool size (lam, or pairs for pairwise)
        self.mu = min(mu, pool)
        self.w = recombination_weights(weights_kind, lam, self.mu)
        self.mueff = 1.0 / np.sum(self.w**2)
        d = float(dim)
        self.c_sigma = (self.mueff + 2.0) / (d + self.mueff + 5.0)
        self.d_sigma = (
            1.0
            + 2.0 * max(0.0, math.sqrt((self.mueff - 1.0) / (d + 1.0)) - 1.0)
            + self.c_sigma
        )
        self.c_c = (4.0 + self.mueff / d) / (d + 4.0 + 2.0 * self.mueff / d)
        self.c_1 = 2.0 / ((d + 1.3) ** 2 + self.mueff)
        self.c_mu = min(
            1.0 - self.c_1,
            2.0 * (self.mueff - 2.0 + 1.0 / self.mueff) / ((d + 2.0) ** 2 + self.mueff),
        )
        self.chi_n = math.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))
        self.lazy_gap = max(1, int(1.0 / (10.0 * d * (self.c_1 + self.c_mu))))
        # scale for the negative (active) weights: mirrored positive weights
        # bounded to keep C positive definite
        alpha = min(
            1.0 + self.c_1 / self.c_mu,
            1.0 + 2.0 * self.mueff / (self.mueff + 2.0),
            (1.0 - self.c_1 - self.c_mu) / (d * self.c_mu),
        )
        self.w_neg = -alpha * self.w[::-1]


class _CmaState:
    def __init__(self, dim, lower, upper, config, consts, rng):
        self.dim = dim
        self.m = rng.uniform(lower, upper, dim)
        self.sigma0 = 0.2 * (upper - lower)
        self.sigma = self.sigma0
        self.C = np.eye(dim)
        self.B = np.eye(dim)
        self.D = np.ones(dim)
        self.p_sigma = np.zeros(dim)
        self.p_c = np.zeros(dim)
        self.gen = 0
        self.last_eig_gen = 0
        self.prev_fs = None
        self.prev_best = None  # (f, x) of best parent so far in this regime
        self.best_hist: list[float] = []
        self.consts = consts
        self.config = config

    def transform(self, z: np.ndarray) -> np.ndarray:
        """Map standard draws to search space steps (x = m + sigma * A z)."""
        if not self.config.covariance:
            return z
        return (z * self.D) @ self.B.T

    def refresh_eigen(self, force=False):
        if not self.config.covariance:
            return
        if not force and self.gen - self.last_eig_gen < self.consts.lazy_gap:
            return
        self.last_eig_gen = self.gen
        self.C = 0.5 * (self.C + self.C.T)
        vals, vecs = np.linalg.eigh(self.C)
        if not np.all(np.isfinite(vals)):
            self.C = np.eye(self.dim)
            vals, vecs = np.ones(self.dim), np.eye(self.dim)
        floor = EIG_FLOOR * max(1.0, float(np.max(vals)))
        if np.any(vals < floor):
            vals = np.maximum(vals, floor)
            self.C = (vecs * vals) @ vecs.T
        self.B = vecs
        self.D = np.sqrt(vals)

    def c_invsqrt_apply(self, y: np.ndarray) -> np.ndarray:
        if not self.config.covariance:
            return y
        return self.B @ ((self.B.T @ y) / self.D)


def sample_offspring(state: _CmaState, config: CmaConfig, sampler, n: int):
    """n standard draws honoring the mirrored-sampling module."""
    if config.mirrored == "off":
        return sampler.draw(n)
    half = (n + 1) // 2
    z_half = sampler.draw(half)
    z = np.empty((2 * half, state.dim))
    z[0::2] = z_half
    z[1::2] = -z_half
    return z[:n]


def _update_distribution(state: _CmaState, config: CmaConfig, xs, fs):
    """One full distribution update from a ranked selection pool."""
    consts = state.consts
    order = np.argsort(fs, kind="stable")
    xs = xs[order]
    fs = fs[order]

    mu = consts.mu
    m_old = state.m
    ys = (xs - m_old) / state.sigma
    y_w = consts.w @ ys[:mu]
    state.m = m_old + state.sigma * y_w

    c_sigma, d_sigma = consts.c_sigma, consts.d_sigma
    state.p_sigma = (1.0 - c_sigma) * state.p_sigma + math.sqrt(
        c_sigma * (2.0 - c_sigma) * consts.mueff
    ) * state.c_invsqrt_apply(y_w)

    state.gen += 1
    norm_ps = float(np.linalg.norm(state.p_sigma))
    h_sig_thresh = (1.4 + 2.0 / (state.dim + 1.0)) * consts.chi_n
    denom = math.sqrt(1.0 - (1.0 - c_sigma) ** (2.0 * state.gen))
    h_sig = (norm_ps / denom) < h_sig_thresh

    c_c = consts.c_c
    state.p_c = (1.0 - c_c) * state.p_c + (
        math.sqrt(c_c * (2.0 - c_c) * consts.mueff) * y_w if h_sig else 0.0
    )

    if config.covariance:
        c_1, c_mu = consts.c_1, consts.c_mu
        delta_h = (1.0 - float(h_sig)) * c_c * (2.0 - c_c)
        w_sum = 1.0
        rank_mu = (consts.w[:, None, None] * np.einsum(
            "ij,ik->ijk", ys[:mu], ys[:mu]
        )).sum(axis=0)
        if config.active and len(ys) >= 2 * mu:
            y_neg = ys[-mu:][::-1]  # worst first weight pairs with w_neg order
            scale = np.empty(mu)
            for j in range(mu):
                nrm = float(np.linalg.norm(state.c_invsqrt_apply(y_neg[j])))
                scale[j] = math.sqrt(state.dim) / nrm if nrm > 0 else 0.0
            y_tilde = y_neg * scale[:, None]
            rank_mu = rank_mu + (consts.w_neg[:, None, None] * np.einsum(
                "ij,ik->ijk", y_tilde, y_tilde
            )).sum(axis=0)
            w_sum += float(np.sum(consts.w_neg))
        state.C = (
            (1.0 + c_1 * delta_h - c_1 - c_mu * w_sum) * state.C
            + c_1 * np.outer(state.p_c, state.p_c)
            + c_mu * rank_mu
        )
        state.C = 0.5 * (state.C + state.C.T)

    if config.ssa == "csa":
        state.sigma *= math.exp((c_sigma / d_sigma) * (norm_ps / consts.chi_n - 1.0))
    state.sigma = float(np.clip(state.sigma, SIGMA_MIN, SIGMA_MAX))

    state.best_hist.append(float(fs[0]))
    hist_len = 10 + int(math.ceil(30.0 * state.dim / consts.lam))
    if len(state.best_hist) > hist_len:
        del state.best_hist[: len(state.best_hist) - hist_len]


def psr_success(prev_fs: np.ndarray, cur_fs: np.ndarray) -> float:
    """Rank-sum success measure in [-1, 1]; positive when current wins."""
    merged = np.concatenate([prev_fs, cur_fs])
    ranks = np.empty(len(merged))
    ranks[np.argsort(merged, kind="stable")] = np.arange(len(merged))
    n_prev, n_cur = len(prev_fs), len(cur_fs)
    z = (np.mean(ranks[:n_prev]) - np.mean(ranks[n_prev:])) / (
        (n_prev + n_cur) / 2.0
    )
    return float(np.clip(z, -1.0, 1.0))


def _stop_condition(state: _CmaState) -> bool:
    hist_len = 10 + int(math.ceil(30.0 * state.dim / state.consts.lam))
    if len(state.best_hist) >= hist_len:
        if max(state.best_hist) - min(state.best_hist) < 1e-12:
            return True
    if state.config.covariance:
        dmax, dmin = float(np.max(state.D)), float(np.min(state.D))
        if dmin <= 0 or (dmax / dmin) ** 2 > 1e14:
            return True
    axis = state.gen % state.dim
    step = 0.1 * state.sigma * state.D[axis] * state.B[:, axis]
    if np.all(state.m == state.m + step):
        return True
    return False


def run(config: CmaConfig, problem, budget: int, seed: int) -> RunResult:
    """Budget-exact CMA-ES run; deterministic given (config, problem, seed)."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1)))
    dim = problem.dim
    lower, upper = problem.lower, problem.upper
    sampler = make_sampler(config.base_sampler, dim, rng)

    traj = np.empty(budget)
    evals = 0
    best_f = math.inf
    best_x = None

    def eval_batch(xs: np.ndarray):
        nonlocal evals, best_f, best_x
        room = budget - evals
        take = min(len(xs), room)
        xs_t = np.clip(xs[:take], lower, upper)
        fs = problem.evaluate_many(xs_t)
        traj[evals : evals + take] = np.minimum(np.minimum.accumulate(fs), best_f)
        k = int(np.argmin(fs)) if take else 0
        if take and fs[k] < best_f:
            best_f = float(fs[k])
            best_x = xs_t[k].copy()
        evals += take
        return xs_t, fs, take < len(xs)

    lam0, mu0 = config.lam, config.mu
    mu_ratio = mu0 / lam0
    lam = lam0
    restarts = 0
    regime_large_evals = 0
    regime_small_evals = 0
    lam_large = lam0

    def make_consts(lam_cur: int, mu_cur: int) -> _Constants:
        pool = (lam_cur + 1) // 2 if config.mirrored == "pairwise" else lam_cur
        return _Constants(dim, lam_cur, mu_cur, config.weights, pool)

    state = _CmaState(dim, lower, upper, config, make_consts(lam, mu0), rng)
    current_regime = "large"
    sigma_start = state.sigma0

    while evals < budget:
        state.refresh_eigen()
        z = sample_offspring(state, config, sampler, lam)
        xs = state.m + state.sigma * state.transform(z)
        xs_eval, fs, truncated = eval_batch(xs)
        if current_regime == "large":
            regime_large_evals += len(fs)
        else:
            regime_small_evals += len(fs)
        if truncated:
            break

        if config.mirrored == "pairwise":
            keep = []
            for a in range(0, len(fs) - 1, 2):
                keep.append(a if fs[a] <= fs[a + 1] else a + 1)
            if len(fs) % 2 == 1:
                keep.append(len(fs) - 1)
            pool_x, pool_f = xs_eval[keep], fs[keep]
        else:
            pool_x, pool_f = xs_eval, fs

        if config.elitist and state.prev_best is not None:
            pf, px = state.prev_best
            if pf < np.min(pool_f):
                pool_x = np.vstack([px[None, :], pool_x])
                pool_f = np.concatenate([[pf], pool_f])

        _update_distribution(state, config, pool_x, pool_f)
        state.prev_best = (float(np.min(pool_f)), pool_x[int(np.argmin(pool_f))].copy())

        if config.ssa == "psr":
            if state.prev_fs is not None:
                z_meas = psr_success(state.prev_fs, fs)
                state.sigma *= math.exp((z_meas - PSR_TARGET) / PSR_DAMPING)
                state.sigma = float(np.clip(state.sigma, SIGMA_MIN, SIGMA_MAX))
            state.prev_fs = fs.copy()

        if config.local_restart != "none" and evals < budget and _stop_condition(state):
            restarts += 1
            if config.local_restart == "ipop":
                lam = 2 * lam
                sigma_start = state.sigma0
            else:  # bipop: run the regime with less consumed budget
                if regime_large_evals <= regime_small_evals:
                    lam_large *= 2
                    lam = lam_large
                    current_regime = "large"
                    sigma_start = state.sigma0
                else:
                    u = rng.uniform()
                    lam = max(2, int(lam0 * (0.5 * lam_large / lam0) ** (u * u)))
                    current_regime = "small"
                    sigma_start = state.sigma0 * 10.0 ** (-2.0 * rng.uniform())
            mu_cur = max(1, min(lam, round(lam * mu_ratio)))
            state = _CmaState(dim, lower, upper, config, make_consts(lam, mu_cur), rng)
            state.sigma = sigma_start

    traj[evals:] = best_f  # only reachable if a batch was cut at the budget edge
    return RunResult(
        best_curve=traj, best_x=best_x, best_f=best_f, restarts=restarts, n_evals=evals
    )
