"""
dimension.py — Information dimension from fitted GEV parameters.

Three routes:
  * sigma_g1:  Delta = 1 / <sigma(g1)>;
  * xi_g2/g3:  Delta = 1 / (alpha |<xi'>|);
  * slopes:    Delta from the angular coefficient of mu or sigma versus n
               at fixed series length (ln n for mu(g1), log10-log10 otherwise).

Ensemble statistics use ddof=1; a singleton ensemble has no defined spread.
"""

from __future__ import annotations

import logging
import math
from typing import Dict, Iterable, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.errors import DomainError, InsufficientRowsError, UndefinedEstimatorError
from src.state import DimensionEstimate, EnsembleSummary, ObservableKind, ParamSeries, ScalingFit

logger = logging.getLogger(__name__)

SlopeRoute = Literal["mu_g1", "mu_g2", "sigma_g2", "sigma_g3"]

# route -> (observable, parameter)
SLOPE_ROUTES: Dict[str, Tuple[ObservableKind, str]] = {
    "mu_g1": ("g1", "mu"),
    "mu_g2": ("g2", "mu"),
    "sigma_g2": ("g2", "sigma"),
    "sigma_g3": ("g3", "sigma"),
}

MIN_SLOPE_ROWS = 3


def linear_fit(x: Sequence[float], y: Sequence[float], abscissa: str = "log10_n") -> ScalingFit:
    """Ordinary least squares y = intercept + slope * x with standard errors."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.shape != ys.shape:
        raise DomainError(f"x and y differ in length: {xs.size} vs {ys.size}")
    if xs.size < MIN_SLOPE_ROWS:
        raise InsufficientRowsError(f"a linear fit needs at least {MIN_SLOPE_ROWS} points, got {xs.size}")
    if np.ptp(xs) == 0.0:
        raise DomainError("cannot fit a line: all abscissae are equal")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise DomainError("linear fit needs finite values")
    res = stats.linregress(xs, ys)
    return ScalingFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        stderr_slope=float(np.nan_to_num(res.stderr)),
        stderr_intercept=float(np.nan_to_num(res.intercept_stderr)),
        abscissa=abscissa,
    )


def delta_from_sigma_g1(
    mean_sigma: float,
    std: float = 0.0,
    n: Optional[int] = None,
) -> DimensionEstimate:
    """Delta = 1/<sigma(g1)>, uncertainty std/<sigma>^2."""
    if not math.isfinite(mean_sigma) or mean_sigma <= 0.0:
        raise DomainError(f"mean sigma must be positive, got {mean_sigma}")
    return DimensionEstimate(
        delta=1.0 / mean_sigma,
        uncertainty=abs(std) / mean_sigma**2,
        method="sigma_g1",
        n=n,
    )


def delta_from_xi(
    mean_xi: float,
    alpha: float,
    std: float = 0.0,
    kind: ObservableKind = "g2",
    n: Optional[int] = None,
) -> DimensionEstimate:
    """Delta = 1/(alpha |<xi'>|); the sign of xi' plays no role."""
    if kind not in ("g2", "g3"):
        raise DomainError(f"the shape route applies to g2 or g3, got {kind!r}")
    if alpha <= 0.0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if mean_xi == 0.0 or not math.isfinite(mean_xi):
        raise UndefinedEstimatorError("xi' = 0 carries no information on the dimension")
    a = abs(mean_xi)
    return DimensionEstimate(
        delta=1.0 / (alpha * a),
        uncertainty=abs(std) / (alpha * a * a),
        method=f"xi_{kind}",
        n=n,
    )


def delta_from_slope(
    series: ParamSeries,
    which: SlopeRoute,
    min_block: int = 1000,
) -> DimensionEstimate:
    """Delta from the n-dependence of one ensemble-mean parameter.

    Rows with n < min_block or m < min_block are excluded and listed on the
    estimate. mu_g1 regresses mu on ln n (Delta = 1/|kappa|); the other
    routes regress log10(param) on log10 n (Delta = 1/(alpha |kappa|)).
    """
    if which not in SLOPE_ROUTES:
        raise DomainError(f"unknown slope route {which!r}")
    kind, param = SLOPE_ROUTES[which]
    if series.kind != kind:
        raise DomainError(f"route {which} needs a {kind} series, got {series.kind}")

    kept = [r for r in series.rows if r.n >= min_block and r.m >= min_block]
    kept_n = {r.n for r in kept}
    excluded = [r.n for r in series.rows if r.n not in kept_n]
    if excluded:
        logger.warning("%s: rows n=%s excluded (n or m below %d)", which, excluded, min_block)
    if len(kept) < MIN_SLOPE_ROWS:
        raise InsufficientRowsError(
            f"{which} needs {MIN_SLOPE_ROWS} rows with n, m >= {min_block}; got {len(kept)}"
        )

    ns = np.array([r.n for r in kept], dtype=np.float64)
    values = np.array([getattr(r, param) for r in kept], dtype=np.float64)
    if which == "mu_g1":
        fit = linear_fit(np.log(ns), values, abscissa="ln_n")
        scale = 1.0
    else:
        if np.any(values <= 0.0):
            raise DomainError(f"{which}: log-log fit needs positive {param} values")
        fit = linear_fit(np.log10(ns), np.log10(values), abscissa="log10_n")
        scale = series.alpha

    kappa = abs(fit.slope)
    if kappa == 0.0:
        raise UndefinedEstimatorError(f"{which}: flat parameter curve")
    delta = 1.0 / (scale * kappa)
    return DimensionEstimate(
        delta=delta,
        uncertainty=delta * fit.stderr_slope / kappa,
        method=f"{which}_slope",
        excluded_n=excluded,
    )


def aggregate_ensemble(values: Iterable[float]) -> EnsembleSummary:
    """Mean, standard deviation and standard error of an ensemble."""
    data = np.asarray(list(values), dtype=np.float64)
    if data.size == 0:
        raise DomainError("cannot aggregate an empty ensemble")
    if data.size == 1:
        logger.debug("Singleton ensemble: spread undefined")
        return EnsembleSummary(mean=float(data[0]), count=1)
    std = float(data.std(ddof=1))
    return EnsembleSummary(
        mean=float(data.mean()),
        std=std,
        stderr=std / math.sqrt(data.size),
        count=int(data.size),
    )


def spread_components(groups: Mapping[int, Sequence[float]]) -> Dict[str, Optional[float]]:
    """Spread of a parameter split by center.

    realizations: mean within-center standard deviation;
    centers: standard deviation of the per-center means;
    combined: standard deviation of all members pooled.
    """
    members = [np.asarray(v, dtype=np.float64) for _, v in sorted(groups.items()) if len(v)]
    if not members:
        raise DomainError("no members to decompose")
    within = [g.std(ddof=1) for g in members if g.size > 1]
    means = np.array([g.mean() for g in members])
    pooled = np.concatenate(members)
    return {
        "realizations": float(np.mean(within)) if within else None,
        "centers": float(means.std(ddof=1)) if means.size > 1 else None,
        "combined": float(pooled.std(ddof=1)) if pooled.size > 1 else None,
    }
