"""Simulation-scale checks against the known dimensions (pytest -m slow)."""

import math

import numpy as np
import pytest

from src.graph import run_experiment
from src.nodes.estimation import estimate
from src.nodes.simulation import make_center
from src.report_generator import emit_table
from src.state import ExperimentConfig, ObservableTemplate, WeightedIFS
from src.tools.gev import gamma_m_diagnostic
from src.tools.maps import RngStream, classical_system, select_center, theoretical_dimension
from src.tools.observables import series

from conftest import CANTOR_DELTA, SIERPINSKI_DELTA

pytestmark = pytest.mark.slow


def _config(system, **overrides):
    payload = {
        "system": system,
        "observables": [{"kind": "g1"}],
        "k": 1_000_000,
        "n_grid": [1000],
        "ensemble": 3,
        "centers": 10,
        "bootstrap_B": 200,
        "seed": 20130401,
    }
    payload.update(overrides)
    return ExperimentConfig.model_validate(payload)


SLOPE_GRID = [1000, 2000, 5000, 10_000]


def _slope_run(system):
    config = _config(
        system,
        observables=[{"kind": "g1"}, {"kind": "g2"}, {"kind": "g3"}],
        k=10_000_000,
        n_grid=SLOPE_GRID,
        ensemble=2,
        centers=5,
    )
    return run_experiment(config, threads=4)["records"]


@pytest.fixture(scope="module")
def cantor_slope_records():
    return _slope_run({"kind": "cantor"})


@pytest.fixture(scope="module")
def sierpinski_slope_records():
    return _slope_run({"kind": "sierpinski"})


def _ok(records, kind):
    return [r for r in records if r.observable == kind and r.ok]


def test_cantor_g1_scale_and_shape():
    records = run_experiment(_config({"kind": "cantor"}), threads=4)["records"]
    fits = _ok(records, "g1")
    assert len(fits) == 30
    sigma = np.mean([r.sigma for r in fits])
    xi = np.mean([r.xi for r in fits])
    assert sigma == pytest.approx(1.0 / CANTOR_DELTA, rel=0.05)
    assert abs(xi) < 0.05


def test_sierpinski_sigma_route():
    records = run_experiment(_config({"kind": "sierpinski"}), threads=4)["records"]
    est = estimate(records, "sigma_g1")
    assert est.delta == pytest.approx(SIERPINSKI_DELTA, abs=0.08)


@pytest.mark.parametrize("w", [0.35, 0.45, 0.55, 0.65])
def test_weighted_ifs_sigma_route(w):
    system = WeightedIFS.cantor(w)
    records = run_experiment(_config(system.model_dump(by_alias=True)), threads=4)["records"]
    est = estimate(records, "sigma_g1")
    assert est.delta == pytest.approx(theoretical_dimension(system), abs=0.06)


def test_log_quantile_ratio_approaches_the_dimension():
    config = _config({"kind": "cantor"}, k=10_000_000, n_grid=[1000])
    center = make_center(config, 0)
    rng = RngStream(7)
    start = select_center(config.system, rng)
    values = series(config.system, ObservableTemplate(kind="g1").at(center.point), start, config.k, rng)
    m = 100_000
    ratio = math.log(m) / gamma_m_diagnostic(values.values, m)
    assert ratio == pytest.approx(CANTOR_DELTA, rel=0.10)


def test_gev_wins_the_ks_ranking_on_cantor_g2():
    config = _config({"kind": "cantor"}, observables=[{"kind": "g2"}])
    records = _ok(run_experiment(config, threads=4)["records"], "g2")
    winners = [r.ks_winner for r in records]
    assert winners.count("GEV") >= 0.9 * len(winners)


def test_cantor_mu_g1_slope(cantor_slope_records):
    est = estimate(cantor_slope_records, "mu_g1_slope")
    assert 0.60 <= est.delta <= 0.68
    assert est.excluded_n == []


def test_table_one_cells(cantor_slope_records, sierpinski_slope_records):
    table = emit_table(cantor_slope_records + sierpinski_slope_records, "t1")
    for label in ("mu(g2)", "sigma(g2)", "sigma(g3)"):
        for system, truth in (("cantor", CANTOR_DELTA), ("sierpinski", SIERPINSKI_DELTA)):
            cell = table.rows[label][system]
            assert cell.reason is None, (label, system)
            assert cell.value == pytest.approx(truth, abs=0.05), (label, system)


@pytest.mark.parametrize("name, tolerance", [("baker", 0.10), ("lozi", 0.07), ("henon", 0.10)])
def test_map_mu_g2_slope(name, tolerance):
    system = classical_system(name)
    config = _config(
        system.model_dump(),
        observables=[{"kind": "g2"}],
        k=10_000_000,
        n_grid=SLOPE_GRID,
        ensemble=2,
        centers=5,
    )
    records = run_experiment(config, threads=4)["records"]
    assert len(_ok(records, "g2")) == 5 * 2 * len(SLOPE_GRID)
    est = estimate(records, "mu_g2_slope")
    assert est.delta == pytest.approx(theoretical_dimension(system), abs=tolerance)
