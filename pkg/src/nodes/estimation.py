"""
estimation.py — Fan-in and dimension estimation over cell records.

Aggregation always runs over records sorted by key, so the estimates are
the same whatever order the cells finished in. The same functions serve
the pipeline and the record-file commands of the CLI, which keeps tables
and estimates recomputed from the raw records.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from typing import Any, Dict, Iterable, List, Literal, Optional, Sequence, Tuple

from src.errors import ExtremesError
from src.state import (
    DimensionEstimate,
    DimensionMethod,
    ExperimentRecord,
    ExperimentState,
    ExperimentSummary,
    GevParams,
    ObservableKind,
    ParamRow,
    ParamSeries,
)
from src.tools.dimension import (
    aggregate_ensemble,
    delta_from_sigma_g1,
    delta_from_slope,
    delta_from_xi,
    spread_components,
)
from src.tools.maps import classical_system, theoretical_dimension

logger = logging.getLogger(__name__)

ALL_METHODS: Tuple[DimensionMethod, ...] = (
    "sigma_g1",
    "xi_g2",
    "xi_g3",
    "mu_g1_slope",
    "mu_g2_slope",
    "sigma_g2_slope",
    "sigma_g3_slope",
)


def sort_records(records: Iterable[ExperimentRecord]) -> List[ExperimentRecord]:
    return sorted(records, key=lambda r: (r.system, r.key))


def _of_kind(records: Sequence[ExperimentRecord], kind: ObservableKind) -> List[ExperimentRecord]:
    return [r for r in records if r.observable == kind and r.ok]


def param_rows(records: Sequence[ExperimentRecord], kind: ObservableKind) -> List[ParamRow]:
    """Ensemble-mean parameters of one observable, one row per n."""
    by_n: Dict[int, List[ExperimentRecord]] = defaultdict(list)
    for r in _of_kind(records, kind):
        by_n[r.n].append(r)
    return [
        ParamRow.from_params(
            n, group[0].m, [GevParams(mu=r.mu, sigma=r.sigma, xi=r.xi) for r in group]
        )
        for n, group in sorted(by_n.items())
    ]


def param_series(records: Sequence[ExperimentRecord], kind: ObservableKind, k: Optional[int] = None) -> ParamSeries:
    rows = param_rows(records, kind)
    fitted = _of_kind(records, kind)
    if not fitted:
        raise ExtremesError(f"no successful {kind} fits")
    first = fitted[0]
    return ParamSeries(
        kind=kind,
        alpha=first.alpha,
        C=first.C,
        system=first.system,
        k=k or max(r.n * r.m for r in rows),
        rows=rows,
    )


def reference_n(records: Sequence[ExperimentRecord]) -> Optional[int]:
    """The grid point closest to n = m (n near sqrt(k)); smaller n on ties."""
    pairs = sorted({(r.n, r.m) for r in records})
    if not pairs:
        return None
    return min(pairs, key=lambda p: (abs(math.log(p[0]) - math.log(p[1])), p[0]))[0]


def _point_estimate(
    records: Sequence[ExperimentRecord],
    method: Literal["sigma_g1", "xi_g2", "xi_g3"],
    n: Optional[int],
) -> DimensionEstimate:
    kind: ObservableKind = "g1" if method == "sigma_g1" else method[-2:]  # type: ignore[assignment]
    param = "sigma" if method == "sigma_g1" else "xi"
    at_n = [r for r in _of_kind(records, kind) if n is None or r.n == n]
    if not at_n:
        raise ExtremesError(f"{method}: no successful {kind} fits at n={n}")

    values = [getattr(r, param) for r in at_n]
    ensemble = aggregate_ensemble(values)
    groups: Dict[int, List[float]] = defaultdict(list)
    for r in at_n:
        groups[r.center_idx].append(getattr(r, param))
    spread = spread_components(groups)
    std = ensemble.std or 0.0

    if method == "sigma_g1":
        est = delta_from_sigma_g1(ensemble.mean, std, n=n)
        scale = 1.0 / ensemble.mean**2
    else:
        alpha = at_n[0].alpha
        est = delta_from_xi(ensemble.mean, alpha, std, kind=kind, n=n)
        scale = 1.0 / (alpha * ensemble.mean**2)

    return est.model_copy(
        update={
            "uncertainty_realizations": None if spread["realizations"] is None else spread["realizations"] * scale,
            "uncertainty_centers": None if spread["centers"] is None else spread["centers"] * scale,
        }
    )


def estimate(
    records: Sequence[ExperimentRecord],
    method: DimensionMethod,
    min_block: int = 1000,
    k: Optional[int] = None,
) -> DimensionEstimate:
    """One dimension estimate recomputed from raw records."""
    records = sort_records(records)
    if method in ("sigma_g1", "xi_g2", "xi_g3"):
        return _point_estimate(records, method, reference_n(records))
    route = method[: -len("_slope")]
    kind: ObservableKind = route[-2:]  # type: ignore[assignment]
    return delta_from_slope(param_series(records, kind, k), route, min_block=min_block)  # type: ignore[arg-type]


def estimate_all(
    records: Sequence[ExperimentRecord],
    min_block: int = 1000,
    k: Optional[int] = None,
) -> Tuple[List[DimensionEstimate], List[str]]:
    """Every method that applies to the records, plus notes for those that do not."""
    kinds = {r.observable for r in records}
    estimates: List[DimensionEstimate] = []
    notes: List[str] = []
    for method in ALL_METHODS:
        needed = "g1" if "g1" in method else ("g2" if "g2" in method else "g3")
        if needed not in kinds:
            continue
        try:
            estimates.append(estimate(records, method, min_block=min_block, k=k))
        except ExtremesError as exc:
            notes.append(f"{method}: {exc}")
            logger.info("Estimator %s not available: %s", method, exc)
    return estimates, notes


def summarize(
    records: Sequence[ExperimentRecord],
    k: int,
    theoretical_delta: Optional[float] = None,
    min_block: int = 1000,
) -> ExperimentSummary:
    records = sort_records(records)
    system = records[0].system if records else ""
    if theoretical_delta is None:
        preset = classical_system(system)
        theoretical_delta = theoretical_dimension(preset) if preset is not None else math.nan
    estimates, notes = estimate_all(records, min_block=min_block, k=k)
    rows = {}
    for kind in sorted({r.observable for r in records}):
        rows[kind] = param_rows(records, kind)
    return ExperimentSummary(
        system=system,
        k=k,
        theoretical_delta=theoretical_delta,
        estimates=estimates,
        rows=rows,
        failed_cells=sum(1 for r in records if not r.ok),
        total_cells=len(records),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Graph nodes
# ---------------------------------------------------------------------------


def cell_sync(state: ExperimentState) -> Dict[str, Any]:
    """Fan-in point after the cell layer."""
    records = state.get("records", [])
    failed = [r for r in records if not r.ok]
    logger.info("Cell sync: %d records collected, %d failed.", len(records), len(failed))
    if not records:
        return {"error": "No records produced by any cell."}
    for r in sort_records(failed)[:5]:
        logger.warning(
            "Failed cell center=%d realization=%d %s n=%d: %s",
            r.center_idx, r.realization_idx, r.observable, r.n, r.error,
        )
    return {}


def estimate_dimension(state: ExperimentState) -> Dict[str, Any]:
    config = state["config"]
    summary = summarize(
        state.get("records", []),
        k=config.k,
        theoretical_delta=theoretical_dimension(config.system),
        min_block=config.min_block,
    )
    for est in summary.estimates:
        logger.info(
            "Delta(%s) = %.4f ± %.4f (theory %.4f)",
            est.method, est.delta, est.uncertainty, summary.theoretical_delta,
        )
    return {"summary": summary}


def route_after_sync(state: ExperimentState) -> Literal["estimate_dimension", "__end__"]:
    if state.get("error"):
        logger.warning("Fatal error detected; skipping estimation: %s", state["error"])
        return "__end__"
    return "estimate_dimension"
