"""
simulation.py — Center preparation and per-cell simulation nodes.

The experiment grid is center x realization x n. Every cell is an
independent job with its own RNG stream, derived from the root seed and
the cell key only, so results do not depend on the order or the number of
threads that run the cells.

Per-cell failures (divergent orbits, degenerate samples, failed fits) are
recorded on the cell's records and never abort the batch.
"""

from __future__ import annotations

import logging
from typing import Any, Dict, List, Optional

from langgraph.types import Send
from pydantic import ValidationError

from src.errors import ExtremesError
from src.state import (
    CellTask,
    CenterInfo,
    ExperimentConfig,
    ExperimentRecord,
    ExperimentState,
    ObservableTemplate,
)
from src.tools.gof import model_selection
from src.tools.lmoments import bootstrap_ci
from src.tools.maps import RngStream, derive_seed, select_center
from src.tools.observables import streamed_block_maxima

logger = logging.getLogger(__name__)

CENTER_STREAM = 0
CELL_STREAM = 1

# Bootstrap sub-streams are keyed by observable kind, not list position
KIND_STREAM = {"g1": 1, "g2": 2, "g3": 3}


def center_seed(config: ExperimentConfig, index: int) -> int:
    return derive_seed(config.seed, CENTER_STREAM, index)


def cell_seed(config: ExperimentConfig, center: int, realization: int, n: int) -> int:
    return derive_seed(config.seed, CELL_STREAM, center, realization, n)


def make_center(config: ExperimentConfig, index: int) -> CenterInfo:
    """Draw center `index` from its own stream; divergence is kept on the info."""
    seed = center_seed(config, index)
    rng = RngStream(seed)
    try:
        point = select_center(config.system, rng, config.effective_burn_in, config.start_jitter)
    except ExtremesError as exc:
        logger.warning("Center %d could not be placed: %s", index, exc)
        return CenterInfo(index=index, seed=seed, error=_describe(exc))
    return CenterInfo(index=index, seed=seed, point=point)


def prepare_centers(state: ExperimentState) -> Dict[str, Any]:
    """First node: one center per index on the invariant set."""
    config = state["config"]
    centers = [make_center(config, i) for i in range(config.centers)]
    failed = sum(1 for c in centers if c.error)
    logger.info(
        "Prepared %d centers for %s (%d failed, burn-in %d)",
        len(centers),
        config.system_tag,
        failed,
        config.effective_burn_in,
    )
    return {"centers": centers}


def dispatch_cells(state: ExperimentState) -> List[Send]:
    """Fan out one simulate_cell job per (center, realization, n)."""
    config = state["config"]
    sends = [
        Send("simulate_cell", CellTask(config=config, center=center, realization=r, n=n))
        for center in state["centers"]
        for r in range(config.ensemble)
        for n in config.n_grid
    ]
    logger.info("Dispatching %d cells (k=%d, n_grid=%s)", len(sends), config.k, config.n_grid)
    return sends


# ---------------------------------------------------------------------------
# One cell
# ---------------------------------------------------------------------------


def _describe(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def _blank(
    config: ExperimentConfig,
    task: CellTask,
    template: ObservableTemplate,
    seed: int,
    **fields: Any,
) -> ExperimentRecord:
    return ExperimentRecord(
        system=config.system_tag,
        observable=template.kind,
        alpha=template.alpha,
        C=template.C,
        center_idx=task["center"].index,
        realization_idx=task["realization"],
        n=task["n"],
        m=config.k // task["n"],
        cell_seed=seed,
        **fields,
    )


def _fit_record(
    config: ExperimentConfig,
    task: CellTask,
    template: ObservableTemplate,
    seed: int,
    sample,
) -> ExperimentRecord:
    boot_rng = RngStream(seed).spawn(KIND_STREAM[template.kind])
    fit = bootstrap_ci(sample.maxima, B=config.bootstrap_B, rng=boot_rng)
    if fit.degenerate or fit.params is None:
        return _blank(
            config, task, template, seed,
            clamp_count=sample.clamp_count,
            error="DegenerateSampleError: all block maxima are equal",
        )
    ranking = model_selection(sample.maxima, config.families)
    p, ci = fit.params, fit.ci95
    fields: Dict[str, Optional[float]] = {"mu": p.mu, "sigma": p.sigma, "xi": p.xi}
    for name in ("mu", "sigma", "xi"):
        if name in ci:
            fields[f"{name}_lo"] = ci[name].lo
            fields[f"{name}_hi"] = ci[name].hi
    return _blank(
        config, task, template, seed,
        ks_winner=ranking[0].model_name,
        ks_D=ranking[0].statistic,
        clamp_count=sample.clamp_count,
        **fields,
    )


def run_cell(task: CellTask) -> List[ExperimentRecord]:
    """Records of one cell, one per observable.

    The orbit start is a fresh invariant-set point drawn from the cell's
    stream; the same stream then drives the orbit. Calling this again with
    the same task reproduces the records exactly.
    """
    config = task["config"]
    center = task["center"]
    n = task["n"]
    seed = cell_seed(config, center.index, task["realization"], n)

    if center.error or center.point is None:
        reason = f"center unavailable ({center.error})"
        return [_blank(config, task, t, seed, error=reason) for t in config.observables]

    rng = RngStream(seed)
    try:
        start = select_center(config.system, rng, config.effective_burn_in, config.start_jitter)
        samples = streamed_block_maxima(
            config.system, config.observables, center.point, start, config.k, n, rng
        )
    except ExtremesError as exc:
        logger.warning(
            "Cell (center=%d, realization=%d, n=%d) failed: %s",
            center.index, task["realization"], n, exc,
        )
        return [_blank(config, task, t, seed, error=_describe(exc)) for t in config.observables]

    records = []
    for template in config.observables:
        sample = samples[template.kind]
        try:
            records.append(_fit_record(config, task, template, seed, sample))
        except (ExtremesError, ValidationError) as exc:
            logger.warning(
                "Fit of %s failed in cell (center=%d, realization=%d, n=%d): %s",
                template.kind, center.index, task["realization"], n, exc,
            )
            records.append(
                _blank(config, task, template, seed, clamp_count=sample.clamp_count, error=_describe(exc))
            )
    return records


def simulate_cell(task: CellTask) -> Dict[str, Any]:
    """Worker node: appends this cell's records through the operator.add reducer."""
    records = run_cell(task)
    logger.debug(
        "Cell (center=%d, realization=%d, n=%d) done: %d/%d fitted",
        task["center"].index,
        task["realization"],
        task["n"],
        sum(1 for r in records if r.ok),
        len(records),
    )
    return {"records": records}
