"""
gev.py — GEV distribution primitives and the predicted parameter scaling.

Convention: F(x) = exp(-[1 + xi (x - mu)/sigma]^(-1/xi)), so xi > 0 is the
Frechet type (bounded below) and xi < 0 the Weibull type (bounded above).
"""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from src.errors import DomainError
from src.state import GevParams, ObservableKind, TheoreticalPrediction

logger = logging.getLogger(__name__)

# Below this |xi| the exact Gumbel form is used
GUMBEL_SWITCH = 1e-8


def gev_cdf(params: GevParams, x):
    """GEV cdf; 0 below a lower endpoint, 1 above an upper endpoint."""
    z = (np.asarray(x, dtype=np.float64) - params.mu) / params.sigma
    if abs(params.xi) < GUMBEL_SWITCH:
        out = np.exp(-np.exp(-z))
    else:
        t = 1.0 + params.xi * z
        outside = t <= 0.0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            # log1p keeps the tail exact when xi is just above the switch
            inside = np.exp(-np.exp(-np.log1p(np.where(outside, 0.0, params.xi * z)) / params.xi))
        out = np.where(outside, 0.0 if params.xi > 0 else 1.0, inside)
    return float(out) if np.ndim(out) == 0 else out


def gev_quantile(params: GevParams, p):
    """Exact inverse of gev_cdf on (0, 1)."""
    prob = np.asarray(p, dtype=np.float64)
    if np.any((prob <= 0.0) | (prob >= 1.0)) or np.any(np.isnan(prob)):
        raise DomainError(f"quantile probability must lie in (0, 1), got {p}")
    y = -np.log(prob)
    if abs(params.xi) < GUMBEL_SWITCH:
        out = params.mu - params.sigma * np.log(y)
    else:
        out = params.mu + params.sigma * np.expm1(-params.xi * np.log(y)) / params.xi
    return float(out) if np.ndim(out) == 0 else out


def gev_sample(params: GevParams, size: int, rng) -> np.ndarray:
    """Draws by inversion; rng is a numpy Generator or an RngStream."""
    u = rng.random(size)
    # random() may return exactly 0.0
    u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    return gev_quantile(params, u)


def theoretical_prediction(
    kind: ObservableKind, delta: float, alpha: float = 4.0, C: float = 10.0
) -> TheoreticalPrediction:
    """Scaling laws of (mu, sigma, xi') in n at fixed series length."""
    if delta <= 0:
        raise DomainError(f"dimension must be positive, got {delta}")
    if kind == "g1":
        return TheoreticalPrediction(
            kind=kind,
            xi_pred=0.0,
            sigma_law="constant",
            sigma_value=1.0 / delta,
            mu_law="affine_ln_n",
            mu_slope=-1.0 / delta,
        )
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    e = 1.0 / (alpha * delta)
    if kind == "g2":
        return TheoreticalPrediction(
            kind=kind,
            xi_pred=e,
            sigma_law="power_law",
            sigma_exponent=-e,
            mu_law="power_law",
            mu_exponent=-e,
        )
    if kind == "g3":
        return TheoreticalPrediction(
            kind=kind,
            xi_pred=-e,
            sigma_law="power_law",
            sigma_exponent=e,
            mu_law="constant",
            mu_value=C,
        )
    raise DomainError(f"unknown observable kind {kind!r}")


def theoretical_params(
    kind: ObservableKind,
    delta: float,
    alpha: float,
    C: float,
    k: int,
    n: int,
    prefactor: float = 1.0,
) -> GevParams:
    """Predicted parameters at block count n.

    g1 is fully determined. For g2 and g3 only the exponents are known;
    `prefactor` stands in for the undetermined constant of the power laws.
    """
    pred = theoretical_prediction(kind, delta, alpha, C)
    if kind == "g1":
        return GevParams(mu=math.log(k / n) / delta, sigma=pred.sigma_value, xi=0.0)
    if kind == "g2":
        return GevParams(
            mu=prefactor * n**pred.mu_exponent,
            sigma=prefactor * n**pred.sigma_exponent,
            xi=pred.xi_pred,
        )
    return GevParams(mu=C, sigma=prefactor * n**pred.sigma_exponent, xi=pred.xi_pred)


def gamma_m_diagnostic(sample: Sequence[float], m: int) -> float:
    """Empirical (1 - 1/m)-quantile of the observable distribution.

    For g1, log(m) / gamma_m tends to the information dimension.
    """
    if m < 2:
        raise DomainError(f"m must be >= 2, got {m}")
    data = np.asarray(sample, dtype=np.float64)
    if m > data.size:
        raise DomainError(f"m={m} exceeds the sample size {data.size}")
    return float(np.quantile(data, 1.0 - 1.0 / m, method="linear"))
