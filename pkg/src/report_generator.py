"""
report_generator.py — Record files, dimension tables and parameter curves.

Outputs are plain files meant to be diffed and consumed by other tools:

  * records.csv   one row per (center, realization, observable, n) cell,
                  fixed column order, floats with 9 significant digits;
  * records.json  sidecar: config echo, seed lineage, centers, failures;
  * curve_<system>_<observable>_<param>.csv  parameter versus log10 n;
  * table_t1.md / table_t2.md and summary.json / summary.md.

Every file is written atomically and contains nothing that depends on the
wall clock or the thread schedule.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ExtremesError, InsufficientRowsError
from src.nodes.estimation import estimate, param_rows, sort_records
from src.state import (
    CenterInfo,
    DimensionTable,
    ExperimentRecord,
    ExperimentSummary,
    TableCell,
)
from src.tools.dimension import linear_fit
from src.tools.maps import classical_system, theoretical_dimension
from src.tools.observables import empirical_cdf

logger = logging.getLogger(__name__)

RECORD_COLUMNS = [
    "system",
    "observable",
    "alpha",
    "C",
    "center_idx",
    "realization_idx",
    "n",
    "m",
    "mu",
    "sigma",
    "xi",
    "mu_lo",
    "mu_hi",
    "sigma_lo",
    "sigma_hi",
    "xi_lo",
    "xi_hi",
    "ks_winner",
    "ks_D",
    "clamp_count",
    "cell_seed",
]
INT_COLUMNS = {"center_idx", "realization_idx", "n", "m", "clamp_count", "cell_seed"}
TEXT_COLUMNS = {"system", "observable", "ks_winner"}

CURVE_COLUMNS = ["log10_n", "mean", "std", "fit_value", "theory_value"]

TABLE_SYSTEMS = {"t1": ["cantor", "sierpinski"], "t2": ["baker", "henon", "lozi"]}
TABLE_ROWS = [
    ("mu(g2)", "mu_g2_slope"),
    ("sigma(g2)", "sigma_g2_slope"),
    ("sigma(g3)", "sigma_g3_slope"),
]

# parameters following a power law in n, fitted on log-log axes
POWER_LAW = {("g2", "mu"), ("g2", "sigma"), ("g3", "sigma")}


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.9g}"
    if isinstance(value, (np.floating,)):
        return format_value(float(value))
    return str(value)


def _atomic_write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    try:
        with open(tmp_path, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        os.replace(tmp_path, path)
    except BaseException:
        # Clean up the temporary file and re-raise
        try:
            if tmp_path.exists():
                tmp_path.unlink()
        except OSError:
            pass
        raise
    logger.debug("Wrote %s (%d bytes)", path, len(content))


def _csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


def write_records(
    records: Sequence[ExperimentRecord],
    out_dir: str,
    config_echo: Optional[Dict[str, Any]] = None,
    centers: Optional[Sequence[CenterInfo]] = None,
) -> Tuple[Path, Path]:
    """records.csv plus its JSON sidecar; failures are listed in the sidecar."""
    ordered = sort_records(records)
    out = Path(out_dir)
    csv_path = out / "records.csv"
    sidecar_path = out / "records.json"

    text = _csv_text(
        RECORD_COLUMNS,
        ([getattr(r, c) for c in RECORD_COLUMNS] for r in ordered),
    )
    sidecar = {
        "config": config_echo or {},
        "seed_lineage": {
            "root_seed": (config_echo or {}).get("seed"),
            "centers": "SeedSequence(root, spawn_key=(0, center_idx))",
            "cells": "SeedSequence(root, spawn_key=(1, center_idx, realization_idx, n))",
            "bootstrap": "SeedSequence(cell_seed, spawn_key=(kind,)), g1=1 g2=2 g3=3",
        },
        "centers": [c.model_dump(mode="json") for c in (centers or [])],
        "failures": [
            {
                "system": r.system,
                "observable": r.observable,
                "center_idx": r.center_idx,
                "realization_idx": r.realization_idx,
                "n": r.n,
                "cell_seed": r.cell_seed,
                "error": r.error,
            }
            for r in ordered
            if r.error is not None
        ],
    }
    _atomic_write(csv_path, text)
    _atomic_write(sidecar_path, json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    logger.info("Records written to %s (%d rows, %d failed)", csv_path, len(ordered), len(sidecar["failures"]))
    return csv_path, sidecar_path


def _parse_cell(column: str, text: str) -> Any:
    if text == "":
        return None
    if column in TEXT_COLUMNS:
        return text
    if column in INT_COLUMNS:
        return int(text)
    return float(text)


def read_records(path: str) -> Tuple[List[ExperimentRecord], Dict[str, Any]]:
    """Records from a records.csv and, when present, its sidecar."""
    csv_path = Path(path)
    sidecar_path = csv_path.with_suffix(".json")
    sidecar: Dict[str, Any] = {}
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    errors = {
        (f["system"], f["observable"], f["center_idx"], f["realization_idx"], f["n"]): f["error"]
        for f in sidecar.get("failures", [])
    }

    records = []
    with open(csv_path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != RECORD_COLUMNS:
            raise ExtremesError(f"{csv_path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            fields = {c: _parse_cell(c, row[c]) for c in RECORD_COLUMNS}
            key = (fields["system"], fields["observable"], fields["center_idx"], fields["realization_idx"], fields["n"])
            error = errors.get(key)
            if error is None and fields["sigma"] is None:
                error = "unknown failure (no sidecar entry)"
            records.append(ExperimentRecord(error=error, **fields))
    logger.info("Read %d records from %s", len(records), csv_path)
    return records, sidecar


# ---------------------------------------------------------------------------
# Dimension tables
# ---------------------------------------------------------------------------


def _table_cell(records: Sequence[ExperimentRecord], method: str, min_block: int) -> TableCell:
    kind = method.split("_")[1]
    if not records:
        return TableCell(reason="no_records")
    if not any(r.observable == kind for r in records):
        return TableCell(reason=f"missing_{kind}")
    try:
        est = estimate(records, method, min_block=min_block)
    except InsufficientRowsError:
        return TableCell(reason="insufficient_rows")
    except ExtremesError as exc:
        logger.debug("Table cell %s failed: %s", method, exc)
        return TableCell(reason="estimator_failed")
    return TableCell(value=est.delta, uncertainty=est.uncertainty)


def emit_table(records: Sequence[ExperimentRecord], table: str, min_block: int = 1000) -> DimensionTable:
    """Slope-route dimensions per system plus the theoretical row.

    Values are recomputed from the raw records on every call.
    """
    table = table.lower()
    if table not in TABLE_SYSTEMS:
        raise ExtremesError(f"unknown table {table!r}, expected t1 or t2")
    systems = TABLE_SYSTEMS[table]
    by_system: Dict[str, List[ExperimentRecord]] = defaultdict(list)
    for r in records:
        by_system[r.system].append(r)
    if not records:
        logger.warning("No records: table %s is blank", table)

    rows: Dict[str, Dict[str, TableCell]] = {}
    for label, method in TABLE_ROWS:
        rows[label] = {s: _table_cell(by_system.get(s, []), method, min_block) for s in systems}
    rows["theoretical"] = {
        s: TableCell(value=theoretical_dimension(classical_system(s))) for s in systems
    }
    return DimensionTable(table=table, systems=systems, rows=rows)


def render_table(table: DimensionTable) -> str:
    """Markdown rendering of a dimension table."""
    lines = []
    lines.append("| Delta | " + " | ".join(table.systems) + " |")
    lines.append("|---" * (len(table.systems) + 1) + "|")
    for label, cells in table.rows.items():
        shown = []
        for s in table.systems:
            cell = cells[s]
            if cell.blank:
                shown.append(f"({cell.reason})")
            elif cell.uncertainty is None:
                shown.append(f"{cell.value:.4f}")
            else:
                shown.append(f"{cell.value:.4f} ± {cell.uncertainty:.4f}")
        lines.append(f"| {label} | " + " | ".join(shown) + " |")
    return "\n".join(lines) + "\n"


def write_table(table: DimensionTable, out_dir: str) -> Path:
    path = Path(out_dir) / f"table_{table.table}.md"
    _atomic_write(path, render_table(table))
    logger.info("Table %s written to %s", table.table, path)
    return path


# ---------------------------------------------------------------------------
# Parameter curves
# ---------------------------------------------------------------------------


def _theory_curve(
    kind: str,
    param: str,
    log_n: np.ndarray,
    means: np.ndarray,
    ms: np.ndarray,
    delta: float,
    alpha: float,
    C: float,
) -> Optional[np.ndarray]:
    """Predicted parameter at each n; power laws get the slope, not the prefactor."""
    if not math.isfinite(delta) or delta <= 0:
        return None
    e = 1.0 / (alpha * delta)
    if kind == "g1":
        if param == "sigma":
            return np.full_like(log_n, 1.0 / delta)
        if param == "mu":
            # ln(k/n) with k/n ~ m
            return np.log(ms) / delta
        return np.zeros_like(log_n)
    if param == "xi":
        return np.full_like(log_n, e if kind == "g2" else -e)
    if kind == "g3" and param == "mu":
        return np.full_like(log_n, C)
    if np.any(means <= 0):
        return None
    slope = -e if kind == "g2" else e
    log_y = np.log10(means)
    intercept = log_y.mean() - slope * log_n.mean()
    return np.power(10.0, intercept + slope * log_n)


def _fit_curve(kind: str, param: str, log_n: np.ndarray, means: np.ndarray) -> Optional[np.ndarray]:
    try:
        if (kind, param) in POWER_LAW:
            if np.any(means <= 0):
                return None
            fit = linear_fit(log_n, np.log10(means))
            return np.power(10.0, fit.predict(log_n))
        return linear_fit(log_n, means).predict(log_n)
    except ExtremesError:
        return None


def curve_rows(
    records: Sequence[ExperimentRecord],
    kind: str,
    param: str,
    theoretical_delta: Optional[float] = None,
) -> List[List[Optional[float]]]:
    """Rows of one curve: log10 n, mean, std, fit value, theory value."""
    rows = param_rows(records, kind)  # type: ignore[arg-type]
    if not rows:
        return []
    first = next(r for r in records if r.observable == kind)
    log_n = np.log10([r.n for r in rows])
    means = np.array([getattr(r, param) for r in rows], dtype=np.float64)
    stds = np.array([getattr(r, f"{param}_std") for r in rows], dtype=np.float64)
    ms = np.array([r.m for r in rows], dtype=np.float64)

    if theoretical_delta is None:
        preset = classical_system(first.system)
        theoretical_delta = theoretical_dimension(preset) if preset is not None else math.nan
    fit = _fit_curve(kind, param, log_n, means)
    theory = _theory_curve(kind, param, log_n, means, ms, theoretical_delta, first.alpha, first.C)
    return [
        [
            float(log_n[i]),
            float(means[i]),
            float(stds[i]),
            None if fit is None else float(fit[i]),
            None if theory is None else float(theory[i]),
        ]
        for i in range(len(rows))
    ]


def emit_curves(
    records: Sequence[ExperimentRecord],
    out_dir: str,
    theoretical_delta: Optional[float] = None,
) -> List[Path]:
    """One CSV per (system, observable, parameter)."""
    ordered = sort_records(records)
    paths = []
    groups: Dict[Tuple[str, str], List[ExperimentRecord]] = defaultdict(list)
    for r in ordered:
        groups[(r.system, r.observable)].append(r)
    for (system, kind), group in sorted(groups.items()):
        if not any(r.ok for r in group):
            logger.warning("No successful fits for %s %s: no curves", system, kind)
            continue
        for param in ("mu", "sigma", "xi"):
            rows = curve_rows(group, kind, param, theoretical_delta)
            path = Path(out_dir) / f"curve_{system}_{kind}_{param}.csv"
            _atomic_write(path, _csv_text(CURVE_COLUMNS, rows))
            paths.append(path)
    logger.info("Wrote %d curve files to %s", len(paths), out_dir)
    return paths


# ---------------------------------------------------------------------------
# Misc outputs
# ---------------------------------------------------------------------------


def write_ecdf(sample: Sequence[float], path: str) -> Path:
    """Empirical cdf of a maxima sample as (x, F) rows."""
    support, fractions = empirical_cdf(sample)
    target = Path(path)
    _atomic_write(target, _csv_text(["x", "F"], zip(support.tolist(), fractions.tolist())))
    logger.info("Empirical cdf with %d steps written to %s", support.size, target)
    return target


def write_sweep(rows: Sequence[Dict[str, Any]], path: str) -> Path:
    columns = ["w", "delta_sigma_g1", "delta_xi_g2", "delta_xi_g3", "theory"]
    target = Path(path)
    _atomic_write(target, _csv_text(columns, ([row.get(c) for c in columns] for row in rows)))
    logger.info("Sweep over %d weights written to %s", len(rows), target)
    return target


def render_summary(summary: ExperimentSummary) -> str:
    lines = []
    lines.append(f"# Extremes experiment: {summary.system}")
    lines.append("")
    lines.append(f"**Series length k:** {summary.k}")
    lines.append(f"**Theoretical dimension:** {summary.theoretical_delta:.5f}")
    lines.append(f"**Cells fitted:** {summary.total_cells - summary.failed_cells}/{summary.total_cells}")
    lines.append("")
    lines.append("| Method | Delta | ± 1 std | realizations | centers | n | excluded n |")
    lines.append("|--------|-------|---------|--------------|---------|---|------------|")
    for est in summary.estimates:
        lines.append(
            f"| {est.method} | {est.delta:.4f} | {est.uncertainty:.4f} "
            f"| {format_value(est.uncertainty_realizations)} | {format_value(est.uncertainty_centers)} "
            f"| {format_value(est.n)} | {', '.join(str(n) for n in est.excluded_n)} |"
        )
    if summary.notes:
        lines.append("")
        lines.append("## Notes")
        lines.append("")
        for note in summary.notes:
            lines.append(f"- {note}")
    lines.append("")
    lines.append(
        "KS ranking compares GEV, Gumbel, Normal and Exponential fits; the family list"
        " is a fixed stand-in for a wider comparison class."
    )
    return "\n".join(lines) + "\n"


def write_summary(summary: ExperimentSummary, out_dir: str) -> Tuple[Path, Path]:
    out = Path(out_dir)
    json_path = out / "summary.json"
    md_path = out / "summary.md"
    _atomic_write(json_path, summary.model_dump_json(indent=2) + "\n")
    _atomic_write(md_path, render_summary(summary))
    logger.info("Summary written to %s", md_path)
    return json_path, md_path
