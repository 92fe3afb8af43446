"""Base samplers for the ES: Gaussian and inverse-CDF-mapped Halton/Sobol.

The quasi-random streams come from scipy's generators (Halton on the
first d primes, Sobol direction numbers).  Both skip the initial
all-zeros point, so the first raw Sobol point is (0.5, ..., 0.5).
Per run, Halton gets a random mod-1 shift and Sobol a seeded scramble.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc

_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def inv_norm_cdf(p: np.ndarray) -> np.ndarray:
    """Inverse standard-normal CDF (Acklam rational approximation).

    Absolute error below 1.15e-9 over (0, 1); inputs are clipped away
    from the endpoints.
    """
    p = np.clip(np.asarray(p, dtype=float), 1e-300, 1.0 - 1e-16)
    out = np.empty_like(p)

    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        out[mid] = num * q / den
    if np.any(lo):
        q = np.sqrt(-2.0 * np.log(p[lo]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        out[lo] = num / den
    if np.any(hi):
        q = np.sqrt(-2.0 * np.log(1.0 - p[hi]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        out[hi] = -num / den
    return out


def halton_raw(dim: int, n: int) -> np.ndarray:
    """Unshifted Halton points, zero point skipped."""
    eng = qmc.Halton(d=dim, scramble=False)
    eng.fast_forward(1)
    return eng.random(n)


def sobol_raw(dim: int, n: int) -> np.ndarray:
    """Unscrambled Sobol points, zero point skipped; first row is all 0.5."""
    eng = qmc.Sobol(d=dim, scramble=False)
    eng.fast_forward(1)
    return eng.random(n)


class GaussianSampler:
    def __init__(self, dim: int, rng: np.random.Generator):
        self.dim = dim
        self.rng = rng

    def draw(self, n: int) -> np.ndarray:
        return self.rng.standard_normal((n, self.dim))


class HaltonSampler:
    def __init__(self, dim: int, rng: np.random.Generator):
        self.dim = dim
        self.shift = rng.uniform(0.0, 1.0, dim)
        self.eng = qmc.Halton(d=dim, scramble=False)
        self.eng.fast_forward(1)

    def draw(self, n: int) -> np.ndarray:
        u = (self.eng.random(n) + self.shift) % 1.0
        return inv_norm_cdf(u)


class SobolSampler:
    def __init__(self, dim: int, rng: np.random.Generator):
        self.dim = dim
        seed = int(rng.integers(2**63))
        self.eng = qmc.Sobol(d=dim, scramble=True, seed=seed)

    def draw(self, n: int) -> np.ndarray:
        u = self.eng.random(n)
        return inv_norm_cdf(u)


def make_sampler(kind: str, dim: int, rng: np.random.Generator):
    if kind == "gaussian":
        return GaussianSampler(dim, rng)
    if kind == "halton":
        return HaltonSampler(dim, rng)
    if kind == "sobol":
        return SobolSampler(dim, rng)
    raise ValueError(f"unknown sampler {kind!r}")
