import pytest

from main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, build_parser, cli_main
from src.config import OUTPUT_DIR_ENV

SMALL_CONFIG = """\
# small Cantor run
system = cantor
k = 20000
n_grid = 100, 200
ensemble = 2
centers = 2
bootstrap_B = 100
min_block = 1
seed = 99
"""


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "small.cfg"
    config.write_text(SMALL_CONFIG, encoding="utf-8")
    out = root / "out"
    code = cli_main(["run", str(config), "--out", str(out), "--threads", "2"])
    return code, config, out


@pytest.fixture(autouse=True)
def _no_output_override(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)


def test_unknown_subcommand_is_a_usage_error():
    assert cli_main(["bogus"]) == EXIT_USAGE
    assert cli_main(["run"]) == EXIT_USAGE


def test_help_returns_success(capsys):
    assert cli_main(["--help"]) == EXIT_OK
    assert "run" in capsys.readouterr().out


def test_verbose_flag_after_the_subcommand():
    args = build_parser().parse_args(["table", "a.csv", "--table", "t1", "-v"])
    assert args.verbose is True
    args = build_parser().parse_args(["-v", "table", "a.csv", "--table", "t1"])
    assert args.verbose is True


def test_missing_config_file(tmp_path):
    assert cli_main(["run", str(tmp_path / "missing.cfg")]) == EXIT_USAGE


def test_invalid_config(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("system = cantor\nk = 1000\nn_grid = 600\n", encoding="utf-8")
    assert cli_main(["run", str(path)]) == EXIT_USAGE


def test_run_writes_all_outputs(finished_run):
    code, _, out = finished_run
    assert code == EXIT_OK
    for name in ("records.csv", "records.json", "summary.json", "summary.md"):
        assert (out / name).exists()
    assert (out / "curve_cantor_g1_sigma.csv").exists()
    assert not list(out.glob("*.tmp"))


def test_dimension_from_records(finished_run, capsys):
    _, _, out = finished_run
    assert cli_main(["dimension", str(out / "records.csv"), "--method", "sigma_g1"]) == EXIT_OK
    assert "sigma_g1: Delta =" in capsys.readouterr().out


def test_dimension_unknown_method(finished_run):
    _, _, out = finished_run
    assert cli_main(["dimension", str(out / "records.csv"), "--method", "box_count"]) == EXIT_USAGE


def test_slope_route_on_a_two_point_grid_is_a_runtime_failure(finished_run):
    _, _, out = finished_run
    code = cli_main(["dimension", str(out / "records.csv"), "--method", "mu_g2_slope", "--min-block", "1"])
    assert code == EXIT_RUNTIME


def test_table_and_curves_commands(finished_run, tmp_path, capsys):
    _, _, out = finished_run
    assert cli_main(["table", str(out / "records.csv"), "--table", "t1", "--out", str(tmp_path)]) == EXIT_OK
    printed = capsys.readouterr().out
    assert printed.startswith("| Delta | cantor | sierpinski |")
    assert "(insufficient_rows)" in printed
    assert (tmp_path / "table_t1.md").exists()
    assert cli_main(["curves", str(out / "records.csv"), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "curve_cantor_g2_mu.csv").exists()


def test_ecdf_command(finished_run):
    _, config, out = finished_run
    code = cli_main(["ecdf", str(config), "--observable", "g2", "--n", "100", "--out", str(out)])
    assert code == EXIT_OK
    assert (out / "ecdf_cantor_g2_n100.csv").exists()


def test_sweep_rejects_maps(tmp_path):
    path = tmp_path / "lozi.cfg"
    path.write_text("system = lozi\nk = 1e4\nn_grid = 10\n", encoding="utf-8")
    assert cli_main(["sweep", str(path), "--weights", "0.4"]) == EXIT_USAGE
