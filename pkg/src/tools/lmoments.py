"""
lmoments.py — Sample L-moments, GEV estimation from L-moments, bootstrap.

Estimators:
  * unbiased probability-weighted moments b_r from the sorted sample;
  * Hosking's rational approximation of the GEV shape from t3, valid for
    |xi'| <= 0.5;
  * percentile bootstrap over resamples drawn with replacement.

Everything is vectorised over a leading axis so a whole batch of bootstrap
resamples is processed in one call.
"""

from __future__ import annotations

import logging
import math
from typing import Dict, Tuple

import numpy as np
from scipy import special

from src.errors import DegenerateSampleError, DomainError
from src.state import FitResult, GevParams, Interval, LMomentSet

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
LN2 = math.log(2.0)
LN3 = math.log(3.0)

# Shape values smaller than this are treated as the Gumbel limit
SMALL_SHAPE = 1e-8

BOOTSTRAP_BATCH = 100


# ---------------------------------------------------------------------------
# Sample L-moments
# ---------------------------------------------------------------------------


def _pwm_weights(size: int) -> np.ndarray:
    """Rows r = 0..3 of C(i-1, r) / C(N-1, r) for i = 1..N."""
    i = np.arange(size, dtype=np.float64)
    nm1 = size - 1.0
    w = np.empty((4, size))
    w[0] = 1.0
    w[1] = i / nm1
    w[2] = w[1] * (i - 1.0) / (nm1 - 1.0)
    w[3] = w[2] * (i - 2.0) / (nm1 - 2.0)
    return w / size


def _lmoments_sorted(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(l1, l2, l3, l4) for an array sorted along its last axis."""
    b = x @ _pwm_weights(x.shape[-1]).T
    b0, b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    l1 = b0
    l2 = 2.0 * b1 - b0
    l3 = 6.0 * b2 - 6.0 * b1 + b0
    l4 = 20.0 * b3 - 30.0 * b2 + 12.0 * b1 - b0
    return l1, l2, l3, l4


def sample_lmoments(data) -> LMomentSet:
    """L-location, L-scale, L-skewness and L-kurtosis of a sample.

    Ties are legitimate (plateaux of singular cdfs) and are kept as they are.
    A constant sample is returned with l2 = 0 and the degenerate flag set.
    """
    x = np.sort(np.asarray(data, dtype=np.float64).ravel(), kind="stable")
    if x.size < 4:
        raise DomainError(f"L-moments need at least 4 values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("L-moments need finite values")
    if x[0] == x[-1]:
        return LMomentSet(l1=float(x[0]), l2=0.0, t3=0.0, t4=0.0, size=x.size, degenerate=True)
    l1, l2, l3, l4 = _lmoments_sorted(x)
    return LMomentSet(
        l1=float(l1),
        l2=float(l2),
        t3=float(l3 / l2),
        t4=float(l4 / l2),
        size=x.size,
    )


def pairwise_l2(data) -> float:
    """L-scale as half the mean absolute pairwise difference."""
    x = np.sort(np.asarray(data, dtype=np.float64))
    n = x.size
    total = sum(x[j] - x[i] for i in range(n) for j in range(i + 1, n))
    return float(total / (2.0 * math.comb(n, 2)))


# ---------------------------------------------------------------------------
# GEV from L-moments
# ---------------------------------------------------------------------------


def _hosking_shape(t3):
    c = 2.0 / (3.0 + t3) - LN2 / LN3
    return 7.8590 * c + 2.9554 * c * c


def _gev_from_lmoments(l1, l2, t3):
    """Vectorised Hosking estimator; returns (mu, sigma, xi')."""
    l1 = np.asarray(l1, dtype=np.float64)
    l2 = np.asarray(l2, dtype=np.float64)
    kh = _hosking_shape(np.asarray(t3, dtype=np.float64))
    small = np.abs(kh) < SMALL_SHAPE
    ks = np.where(small, 1.0, kh)
    g = special.gamma(1.0 + ks)
    sigma = np.where(small, l2 / LN2, l2 * ks / ((1.0 - np.exp2(-ks)) * g))
    mu = np.where(small, l1 - EULER_GAMMA * sigma, l1 - sigma * (1.0 - g) / ks)
    return mu, sigma, -kh


def fit_gev_lmoments(lm: LMomentSet) -> GevParams:
    """GEV parameters from sample L-moments (Hosking's approximation).

    Fits with |xi'| > 0.5 are returned but lie outside the approximation's
    validity; GevParams.within_lmoment_validity reports it.
    """
    if lm.degenerate or lm.l2 <= 0.0:
        raise DegenerateSampleError("cannot fit a GEV to a sample with zero L-scale")
    mu, sigma, xi = _gev_from_lmoments(lm.l1, lm.l2, lm.t3)
    params = GevParams(mu=float(mu), sigma=float(sigma), xi=float(xi))
    if not params.within_lmoment_validity:
        logger.debug("GEV fit with xi'=%.3f lies outside |xi'| <= 0.5", params.xi)
    return params


def gev_lmoments(params: GevParams) -> Dict[str, float]:
    """Population (l1, l2, t3, t4) of a GEV, Hosking's forward relations."""
    k = -params.xi
    if abs(k) < SMALL_SHAPE:
        return {
            "l1": params.mu + EULER_GAMMA * params.sigma,
            "l2": params.sigma * LN2,
            "t3": math.log(9.0 / 8.0) / LN2,
            "t4": 16.0 - 10.0 * LN3 / LN2,
        }
    g = math.gamma(1.0 + k)
    d2 = 1.0 - 2.0**-k
    return {
        "l1": params.mu + params.sigma * (1.0 - g) / k,
        "l2": params.sigma * d2 * g / k,
        "t3": 2.0 * (1.0 - 3.0**-k) / d2 - 3.0,
        "t4": (5.0 * (1.0 - 4.0**-k) - 10.0 * (1.0 - 3.0**-k) + 6.0 * d2) / d2,
    }


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


def _rng(seed_or_rng):
    if seed_or_rng is None:
        return np.random.default_rng()
    if isinstance(seed_or_rng, (int, np.integer)):
        return np.random.default_rng(int(seed_or_rng))
    return getattr(seed_or_rng, "generator", seed_or_rng)


def bootstrap_ci(
    data,
    B: int = 1000,
    level: float = 0.95,
    rng=None,
) -> FitResult:
    """Point fit plus percentile intervals from B resamples.

    Resamples that come out constant are dropped and counted. Intervals are
    widened, if needed, to contain the point estimate.
    """
    if B < 100:
        raise DomainError(f"bootstrap needs B >= 100 resamples, got {B}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    x = np.asarray(data, dtype=np.float64).ravel()
    lm = sample_lmoments(x)
    if lm.degenerate:
        logger.debug("Degenerate sample of size %d: no bootstrap", x.size)
        return FitResult(degenerate=True, level=level)
    point = fit_gev_lmoments(lm)
    gen = _rng(rng)

    size = x.size
    estimates = []
    failed = 0
    done = 0
    while done < B:
        batch = min(BOOTSTRAP_BATCH, B - done)
        idx = gen.integers(0, size, size=(batch, size))
        resamples = np.sort(x[idx], axis=1)
        ok = resamples[:, 0] != resamples[:, -1]
        failed += int(batch - np.count_nonzero(ok))
        if np.any(ok):
            l1, l2, l3, _ = _lmoments_sorted(resamples[ok])
            mu, sigma, xi = _gev_from_lmoments(l1, l2, l3 / l2)
            estimates.append(np.column_stack([mu, sigma, xi]))
        done += batch

    if failed:
        logger.debug("Bootstrap dropped %d constant resamples out of %d", failed, B)
    ci: Dict[str, Interval] = {}
    if estimates:
        table = np.vstack(estimates)
        tail = 100.0 * (1.0 - level) / 2.0
        lo, hi = np.percentile(table, [tail, 100.0 - tail], axis=0)
        for j, name in enumerate(("mu", "sigma", "xi")):
            value = getattr(point, name)
            ci[name] = Interval(lo=min(float(lo[j]), value), hi=max(float(hi[j]), value))
    return FitResult(
        params=point,
        ci95=ci,
        level=level,
        n_boot=B - failed,
        n_failed=failed,
        out_of_validity=not point.within_lmoment_validity,
    )

