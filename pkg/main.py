"""
main.py — CLI entry point for the singular-extremes toolkit.

Usage:
    uv run python main.py run <config> [--seed S] [--threads T] [--out DIR]
    uv run python main.py table <records.csv>... --table t1|t2
    uv run python main.py curves <records.csv> [--out DIR]
    uv run python main.py dimension <records.csv> --method <tag>
    uv run python main.py selftest

Examples:
    # Cantor experiment on 8 threads
    uv run python main.py run configs/cantor.cfg --threads 8

    # Table 1 from two record files
    uv run python main.py table results/cantor/records.csv results/sierpinski/records.csv --table t1

    # Dimension sweep over IFS weights
    uv run python main.py sweep configs/weighted.cfg --weights 0.35,0.45,0.55,0.65

Exit codes: 0 success, 1 usage or config error, 2 runtime failure,
130 interrupted.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import signal
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from dotenv import load_dotenv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_INTERRUPTED = 130


# ---------------------------------------------------------------------------
# SIGINT handler: forcefully terminate even when worker threads are inside
# numba kernels. sys.exit() only raises SystemExit which worker threads can
# ignore; os._exit() kills the process at the OS level immediately.
# ---------------------------------------------------------------------------
def _sigint_handler(signum, frame):
    """Handle Ctrl+C by forcefully killing the process."""
    print("\n" + "!" * 60, file=sys.stderr)
    print("RUN INTERRUPTED BY USER (Ctrl+C). Force-killing process...", file=sys.stderr)
    print("!" * 60, file=sys.stderr)
    os._exit(EXIT_INTERRUPTED)


def setup_logging(verbose: bool = False) -> None:
    """Configure logging for the toolkit."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s │ %(name)-30s │ %(levelname)-7s │ %(message)s",
        datefmt="%H:%M:%S",
    )
    # Reduce noise from the JIT compiler
    logging.getLogger("numba").setLevel(logging.WARNING)


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser that exits with status 1 on usage errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = UsageParser(
        prog="main.py",
        description="Extreme value statistics of dynamical systems with singular measures",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  uv run python main.py run cantor.cfg --threads 8\n"
            "  uv run python main.py table a/records.csv b/records.csv --table t1\n"
            "  uv run python main.py dimension records.csv --method mu_g2_slope\n"
        ),
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable debug logging")
    sub = parser.add_subparsers(dest="command", metavar="<command>")
    sub.required = True

    def config_command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="Path to a key = value experiment config")
        p.add_argument("--seed", type=int, default=None, help="Override the root seed")
        p.add_argument("--threads", type=int, default=1, help="Cells simulated concurrently")
        p.add_argument("--out", default=None, help="Override the output directory")
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="Enable debug logging")
        return p

    config_command("run", "Run an experiment and write records, curves and a summary")

    p = sub.add_parser("table", help="Dimension table from record files")
    p.add_argument("records", nargs="+", help="records.csv files")
    p.add_argument("--table", choices=["t1", "t2"], required=True)
    p.add_argument("--min-block", type=int, default=1000, dest="min_block")
    p.add_argument("--out", default=None, help="Also write table_<t>.md into this directory")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("curves", help="Parameter-versus-log10 n curves from a record file")
    p.add_argument("records", help="records.csv file")
    p.add_argument("--out", default=None, help="Output directory (default: next to the records)")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("dimension", help="One dimension estimate from a record file")
    p.add_argument("records", help="records.csv file")
    p.add_argument("--method", required=True, help="sigma_g1, xi_g2, xi_g3 or a *_slope route")
    p.add_argument("--min-block", type=int, default=1000, dest="min_block")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("selftest", help="Run the fast property suites")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = config_command("ecdf", "Empirical cdf of one maxima sample")
    p.add_argument("--observable", choices=["g1", "g2", "g3"], default="g1")
    p.add_argument("--n", type=int, default=None, help="Block count (default: first grid entry)")

    p = config_command("gamma", "log m / gamma_m diagnostic on one long g1 series")
    p.add_argument("--m", type=int, default=100_000)

    p = config_command("sweep", "Dimension estimates over a range of IFS weights")
    p.add_argument("--weights", required=True, help="Comma-separated weights in (0, 1)")

    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _load(args):
    from src.config import load_config

    overrides: Dict[str, str] = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out is not None:
        overrides["output_dir"] = args.out
    return load_config(args.config, overrides)


def _theory_from_sidecar(sidecar: Dict) -> Optional[float]:
    from pydantic import TypeAdapter, ValidationError

    from src.state import SystemSpec
    from src.tools.maps import theoretical_dimension

    system = sidecar.get("config", {}).get("system")
    if not system:
        return None
    try:
        return theoretical_dimension(TypeAdapter(SystemSpec).validate_python(system))
    except (ValidationError, TypeError):
        return None


def cmd_run(args, logger: logging.Logger) -> int:
    from src.config import config_echo
    from src.graph import run_experiment
    from src.report_generator import emit_curves, write_records, write_summary
    from src.tools.maps import theoretical_dimension

    config = _load(args)
    out_dir = config.output_dir
    logger.info("=" * 60)
    logger.info("EXTREMES EXPERIMENT -- %s", config.system_tag)
    logger.info("=" * 60)
    logger.info("k:            %d", config.k)
    logger.info("n grid:       %s", config.n_grid)
    logger.info("Centers:      %d x %d realizations", config.centers, config.ensemble)
    logger.info("Root seed:    %d", config.seed)
    logger.info("Output dir:   %s", out_dir)
    logger.info("=" * 60)

    final_state = run_experiment(config, threads=args.threads)
    summary = final_state.get("summary")
    records = final_state.get("records", [])
    write_records(records, out_dir, config_echo(config), final_state.get("centers", []))
    if summary is None:
        logger.error("RUN FAILED: %s", final_state.get("error", "Unknown error"))
        return EXIT_RUNTIME
    write_summary(summary, out_dir)
    emit_curves(records, out_dir, theoretical_dimension(config.system))

    logger.info("=" * 60)
    logger.info("RUN COMPLETE (theoretical Delta = %.5f)", summary.theoretical_delta)
    for est in summary.estimates:
        logger.info("   %-16s %.4f ± %.4f", est.method, est.delta, est.uncertainty)
    logger.info("=" * 60)
    return EXIT_OK


def cmd_table(args, logger: logging.Logger) -> int:
    from src.report_generator import emit_table, read_records, render_table, write_table

    records = []
    for path in args.records:
        got, _ = read_records(path)
        records.extend(got)
    table = emit_table(records, args.table, min_block=args.min_block)
    print(render_table(table), end="")
    if args.out:
        write_table(table, args.out)
    return EXIT_OK


def cmd_curves(args, logger: logging.Logger) -> int:
    from src.report_generator import emit_curves, read_records

    records, sidecar = read_records(args.records)
    out_dir = args.out or str(Path(args.records).parent)
    emit_curves(records, out_dir, _theory_from_sidecar(sidecar))
    return EXIT_OK


def cmd_dimension(args, logger: logging.Logger) -> int:
    from src.nodes.estimation import ALL_METHODS, estimate
    from src.report_generator import read_records

    if args.method not in ALL_METHODS:
        print(f"unknown method {args.method!r}; expected one of {', '.join(ALL_METHODS)}", file=sys.stderr)
        return EXIT_USAGE
    records, sidecar = read_records(args.records)
    k = sidecar.get("config", {}).get("k")
    est = estimate(records, args.method, min_block=args.min_block, k=k)
    print(f"{est.method}: Delta = {est.delta:.6f} ± {est.uncertainty:.6f}")
    if est.excluded_n:
        print(f"excluded n: {', '.join(str(n) for n in est.excluded_n)}")
    return EXIT_OK


def cmd_selftest(args, logger: logging.Logger) -> int:
    import pytest

    tests = Path(__file__).resolve().parent / "tests"
    code = pytest.main([str(tests), "-m", "not slow", "-q"])
    return EXIT_OK if code == 0 else EXIT_RUNTIME


def cmd_ecdf(args, logger: logging.Logger) -> int:
    from src.nodes.simulation import cell_seed, make_center
    from src.report_generator import write_ecdf
    from src.tools.maps import RngStream, select_center
    from src.tools.observables import streamed_block_maxima

    config = _load(args)
    n = args.n or config.n_grid[0]
    center = make_center(config, 0)
    if center.point is None:
        logger.error("Center could not be placed: %s", center.error)
        return EXIT_RUNTIME
    rng = RngStream(cell_seed(config, 0, 0, n))
    start = select_center(config.system, rng, config.effective_burn_in, config.start_jitter)
    templates = [t for t in config.observables if t.kind == args.observable]
    if not templates:
        print(f"observable {args.observable} is not configured", file=sys.stderr)
        return EXIT_USAGE
    samples = streamed_block_maxima(config.system, templates, center.point, start, config.k, n, rng)
    path = Path(config.output_dir) / f"ecdf_{config.system_tag}_{args.observable}_n{n}.csv"
    write_ecdf(samples[args.observable].maxima, str(path))
    return EXIT_OK


def cmd_gamma(args, logger: logging.Logger) -> int:
    from src.nodes.simulation import cell_seed, make_center
    from src.state import ObservableTemplate
    from src.tools.gev import gamma_m_diagnostic
    from src.tools.maps import RngStream, select_center, theoretical_dimension
    from src.tools.observables import series

    config = _load(args)
    center = make_center(config, 0)
    if center.point is None:
        logger.error("Center could not be placed: %s", center.error)
        return EXIT_RUNTIME
    rng = RngStream(cell_seed(config, 0, 0, 1))
    start = select_center(config.system, rng, config.effective_burn_in, config.start_jitter)
    obs = ObservableTemplate(kind="g1").at(center.point)
    values = series(config.system, obs, start, config.k, rng)
    gamma = gamma_m_diagnostic(values.values, args.m)
    ratio = math.log(args.m) / gamma
    print(f"m = {args.m}: gamma_m = {gamma:.6f}, log m / gamma_m = {ratio:.5f} "
          f"(theory {theoretical_dimension(config.system):.5f})")
    return EXIT_OK


def cmd_sweep(args, logger: logging.Logger) -> int:
    from src.errors import ExtremesError
    from src.graph import run_experiment
    from src.nodes.estimation import estimate
    from src.report_generator import write_sweep
    from src.state import WeightedIFS
    from src.tools.maps import theoretical_dimension

    base = _load(args)
    if base.system_tag not in ("cantor", "weighted_ifs"):
        print(f"sweep needs a cantor or weighted_ifs config, got {base.system_tag}", file=sys.stderr)
        return EXIT_USAGE
    try:
        weights = [float(w) for w in args.weights.split(",") if w.strip()]
        systems = [WeightedIFS.cantor(w) for w in weights]
    except ValueError as exc:
        print(f"invalid --weights: {exc}", file=sys.stderr)
        return EXIT_USAGE

    rows: List[Dict] = []
    for w, system in zip(weights, systems):
        config = base.model_copy(update={"system": system})
        logger.info("Sweep: w = %.4f", w)
        records = run_experiment(config, threads=args.threads)["records"]
        row: Dict = {"w": w, "theory": theoretical_dimension(system)}
        for method, column in (
            ("sigma_g1", "delta_sigma_g1"),
            ("xi_g2", "delta_xi_g2"),
            ("xi_g3", "delta_xi_g3"),
        ):
            try:
                row[column] = estimate(records, method, min_block=config.min_block).delta
            except ExtremesError as exc:
                logger.warning("w = %.4f: %s unavailable: %s", w, method, exc)
        rows.append(row)
    write_sweep(rows, str(Path(base.output_dir) / "sweep.csv"))
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "table": cmd_table,
    "curves": cmd_curves,
    "dimension": cmd_dimension,
    "selftest": cmd_selftest,
    "ecdf": cmd_ecdf,
    "gamma": cmd_gamma,
    "sweep": cmd_sweep,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, dispatch to a subcommand and return the exit code."""
    # Load environment variables before the output directory is resolved
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits with 0, usage errors with EXIT_USAGE
        if exc.code is None:
            return EXIT_OK
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    setup_logging(args.verbose)
    logger = logging.getLogger("main")

    from src.errors import ConfigError, ExtremesError

    try:
        return COMMANDS[args.command](args, logger)
    except ConfigError as exc:
        logger.error("Config error: %s", exc)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        logger.error("File not found: %s", exc)
        return EXIT_USAGE
    except KeyboardInterrupt:
        logger.warning("!" * 60)
        logger.warning("RUN INTERRUPTED BY USER (Ctrl+C). Shutting down...")
        logger.warning("!" * 60)
        return EXIT_INTERRUPTED
    except (ExtremesError, OSError) as exc:
        logger.exception("Run failed: %s", exc)
        return EXIT_RUNTIME


def main() -> None:
    signal.signal(signal.SIGINT, _sigint_handler)
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
