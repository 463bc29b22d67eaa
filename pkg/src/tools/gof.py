"""
gof.py — Kolmogorov-Smirnov deviation and candidate-model ranking.

KS is used as a deviation measure between the empirical cdf of the maxima
and a fitted cdf, not as a formal test: no p-values are reported. Every
candidate family is fitted by its own L-moment relations.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats

from src.errors import DegenerateSampleError, DomainError, FitError, ModelSelectionError
from src.state import Family, GevParams, KsReport
from src.tools.gev import gev_cdf
from src.tools.lmoments import EULER_GAMMA, LN2, fit_gev_lmoments, sample_lmoments

logger = logging.getLogger(__name__)

# The comparison set is a stand-in for an unspecified "wide class" of models
CANDIDATE_FAMILIES: List[Family] = ["GEV", "Gumbel", "Normal", "Exponential"]


class FittedModel(BaseModel):
    """A fitted candidate: its family, parameters and cdf."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    family: Family
    params: Dict[str, float]
    cdf: Callable


def ks_statistic(sample: Sequence[float], model_cdf: Callable, model_name: str = "model") -> KsReport:
    """sup |F_N - F| over the sample; the p-value is discarded."""
    x = np.asarray(sample, dtype=np.float64)
    size = x.size
    if size == 0:
        raise DomainError("KS statistic of an empty sample")

    def clipped(values):
        return np.clip(np.asarray(model_cdf(values), dtype=np.float64), 0.0, 1.0)

    D = float(stats.kstest(x, clipped).statistic)
    return KsReport(statistic=D, sample_size=size, model_name=model_name)


def fit_candidate(family: Family, sample: Sequence[float]) -> FittedModel:
    """L-moment fit of one candidate family."""
    x = np.asarray(sample, dtype=np.float64)
    lm = sample_lmoments(x)
    if lm.degenerate:
        raise DegenerateSampleError(f"cannot fit {family} to a constant sample")

    if family == "GEV":
        params = fit_gev_lmoments(lm)
        return FittedModel(
            family=family,
            params=params.model_dump(),
            cdf=lambda v, p=params: gev_cdf(p, v),
        )
    if family == "Gumbel":
        sigma = lm.l2 / LN2
        params = GevParams(mu=lm.l1 - EULER_GAMMA * sigma, sigma=sigma, xi=0.0)
        return FittedModel(
            family=family,
            params=params.model_dump(),
            cdf=lambda v, p=params: gev_cdf(p, v),
        )
    if family == "Normal":
        loc, scale = lm.l1, lm.l2 * math.sqrt(math.pi)
        return FittedModel(
            family=family,
            params={"mu": loc, "sigma": scale},
            cdf=lambda v, a=loc, b=scale: stats.norm.cdf(v, loc=a, scale=b),
        )
    if family == "Exponential":
        # Two-parameter exponential: l1 = loc + 1/rate, l2 = 1/(2 rate)
        scale = 2.0 * lm.l2
        loc = lm.l1 - scale
        if float(np.min(x)) < loc:
            raise FitError(
                f"sample minimum {np.min(x):.6g} lies below the fitted exponential support {loc:.6g}"
            )
        return FittedModel(
            family=family,
            params={"loc": loc, "rate": 1.0 / scale},
            cdf=lambda v, a=loc, b=scale: stats.expon.cdf(v, loc=a, scale=b),
        )
    raise DomainError(f"unknown family {family!r}")


def model_selection(
    sample: Sequence[float],
    families: Optional[Sequence[Family]] = None,
) -> List[KsReport]:
    """KS deviation of every family that can be fitted, best first.

    Ties keep the order of `families`.
    """
    families = list(families or CANDIDATE_FAMILIES)
    reports: List[KsReport] = []
    for family in families:
        try:
            model = fit_candidate(family, sample)
        except (FitError, DegenerateSampleError) as exc:
            logger.debug("Candidate %s rejected: %s", family, exc)
            continue
        reports.append(ks_statistic(sample, model.cdf, model_name=family))
    if not reports:
        raise ModelSelectionError(f"none of {families} could be fitted")
    return sorted(reports, key=lambda r: r.statistic)
