"""
LangGraph StateGraph for the extremes experiment pipeline.

    START
      │
    prepare_centers
      │
      ├──► simulate_cell (center 0, realization 0, n_1)  ──┐
      ├──► simulate_cell (...)                             ──┤   (Send fan-out)
      └──► simulate_cell (center C-1, realization R-1, n_N) ─┤
                                                             │
                                 cell_sync  (fan-in sync point)
                                     │
                           [route_after_sync]
                              ├── error ──► END
                              └── ok    ──► estimate_dimension
                                                 │
                                            report_node
                                                 │
                                                END

Cells append their records through the operator.add reducer. The number of
cells in flight is bounded by the `max_concurrency` run option; the numba
kernels release the GIL, so cells overlap on threads.
"""

from __future__ import annotations

import logging
from typing import Any, Dict

from langgraph.graph import END, START, StateGraph

from src.nodes.estimation import cell_sync, estimate_dimension, route_after_sync, sort_records
from src.nodes.simulation import dispatch_cells, prepare_centers, simulate_cell
from src.state import ExperimentConfig, ExperimentState

logger = logging.getLogger(__name__)


def report_node(state: ExperimentState) -> Dict[str, Any]:
    """Final node: logs completion of the run.

    Files are written by the caller so the output location stays a CLI
    concern.
    """
    summary = state.get("summary")
    if summary is None:
        logger.error("report_node received no summary in state.")
        return {}
    logger.info(
        "Experiment complete for %s: %d/%d cells fitted, %d estimates.",
        summary.system,
        summary.total_cells - summary.failed_cells,
        summary.total_cells,
        len(summary.estimates),
    )
    return {}


def build_experiment_graph():
    """Build and compile the experiment StateGraph."""
    builder = StateGraph(ExperimentState)

    builder.add_node("prepare_centers", prepare_centers)
    builder.add_node("simulate_cell", simulate_cell)
    builder.add_node("cell_sync", cell_sync)
    builder.add_node("estimate_dimension", estimate_dimension)
    builder.add_node("report_node", report_node)

    builder.add_edge(START, "prepare_centers")

    # --- Cell fan-out: one Send per (center, realization, n) ----------------
    builder.add_conditional_edges("prepare_centers", dispatch_cells, ["simulate_cell"])
    builder.add_edge("simulate_cell", "cell_sync")

    builder.add_conditional_edges(
        "cell_sync",
        route_after_sync,
        {
            "estimate_dimension": "estimate_dimension",
            "__end__": END,
        },
    )
    builder.add_edge("estimate_dimension", "report_node")
    builder.add_edge("report_node", END)

    graph = builder.compile()
    logger.debug("Experiment graph compiled.")
    return graph


def run_experiment(config: ExperimentConfig, threads: int = 1) -> Dict[str, Any]:
    """Run the full pipeline for one config.

    Returns the final state; `records` are sorted by key, so the result is
    the same for any thread count.
    """
    graph = build_experiment_graph()
    initial_state: ExperimentState = {
        "config": config,
        "centers": [],
        "records": [],
        "summary": None,
        "error": None,
    }
    run_config = {"max_concurrency": max(1, threads)}
    logger.info(
        "Starting %s experiment: %d centers x %d realizations x %d block counts, %d thread(s)",
        config.system_tag,
        config.centers,
        config.ensemble,
        len(config.n_grid),
        threads,
    )
    final_state = graph.invoke(initial_state, run_config)
    final_state["records"] = sort_records(final_state.get("records", []))
    return final_state
