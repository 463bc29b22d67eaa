import math

import numpy as np
import pytest

from src.errors import DomainError, OrbitDivergenceError
from src.state import Baker, CantorIFS, Henon, Lozi, Point, Sierpinski, WeightedIFS
from src.tools.maps import (
    RngStream,
    baker_dimension,
    classical_system,
    derive_seed,
    ifs_dimension,
    orbit,
    orbit_array,
    select_center,
    step,
    stream_block_minima,
    theoretical_dimension,
)


def test_derive_seed_is_a_pure_function_of_root_and_key():
    assert derive_seed(7, 1, 2, 3) == derive_seed(7, 1, 2, 3)
    assert derive_seed(7, 1, 2, 3) != derive_seed(7, 1, 2, 4)
    assert derive_seed(7, 1, 2, 3) != derive_seed(8, 1, 2, 3)
    assert 0 <= derive_seed(7, 0) < 2**64


def test_rng_stream_equal_seeds_give_equal_draws():
    a, b = RngStream(42), RngStream(42)
    np.testing.assert_array_equal(a.random(10), b.random(10))
    assert a.spawn(3).seed == b.spawn(3).seed


def test_cantor_step_follows_the_drawn_branch():
    system = CantorIFS()
    x = 0.5
    u = RngStream(11).random(1)[0]
    expected = x / 3.0 if u < 0.5 else (x + 2.0) / 3.0
    got = step(system, Point(coords=[x]), RngStream(11))
    assert got.coords[0] == pytest.approx(expected, abs=1e-15)


def test_henon_steps():
    p = step(Henon(), Point(coords=[0.0, 0.0]), RngStream(0))
    assert p.coords == pytest.approx([1.0, 0.0])
    q = step(Henon(), p, RngStream(0))
    assert q.coords == pytest.approx([-0.4, 0.3])


def test_lozi_step():
    p = step(Lozi(), Point(coords=[0.1, 0.1]), RngStream(0))
    assert p.coords == pytest.approx([0.93, 0.05])


def test_baker_step_lower_strip():
    p = step(Baker(), Point(coords=[0.5, 0.2]), RngStream(0))
    assert p.coords == pytest.approx([0.1, 0.6])


def test_baker_step_upper_strip():
    p = step(Baker(), Point(coords=[0.4, 2.0 / 3.0]), RngStream(0))
    assert p.coords == pytest.approx([0.6, 0.5])


def test_orbit_starts_at_start_and_has_requested_length(rng):
    pts = orbit(Sierpinski(), Point(coords=[0.1, 0.1]), 50, rng)
    assert len(pts) == 50
    assert pts[0].coords == [0.1, 0.1]


def test_cantor_orbit_stays_in_unit_interval(rng):
    arr = orbit_array(CantorIFS(), Point(coords=[0.0]), 5000, rng)
    assert arr.shape == (5000, 1)
    assert np.all((arr >= 0.0) & (arr <= 1.0))


def test_divergent_orbit_reports_step_index():
    with pytest.raises(OrbitDivergenceError) as exc:
        orbit(Henon(), Point(coords=[10.0, 10.0]), 100, RngStream(0))
    assert exc.value.step_index > 0
    assert exc.value.system == "henon"


def test_wrong_dimension_point_is_rejected(rng):
    with pytest.raises(DomainError):
        step(Henon(), Point(coords=[0.0]), rng)


def test_cantor_center_lies_in_the_outer_thirds(rng):
    c = select_center(CantorIFS(), rng, burn_in=1000)
    x = c.coords[0]
    assert 0.0 <= x <= 1.0
    assert x <= 1.0 / 3.0 + 1e-12 or x >= 2.0 / 3.0 - 1e-12


def test_henon_center_is_on_the_attractor(rng):
    c = select_center(Henon(), rng, burn_in=10_000, jitter=1e-6)
    x, y = c.coords
    assert -1.5 < x < 1.5
    assert -0.45 < y < 0.45


def test_center_jitter_separates_streams():
    a = select_center(Lozi(), RngStream(1), burn_in=2000, jitter=1e-6)
    b = select_center(Lozi(), RngStream(2), burn_in=2000, jitter=1e-6)
    assert a.coords != b.coords


def test_select_center_rejects_zero_burn_in(rng):
    with pytest.raises(DomainError):
        select_center(CantorIFS(), rng, burn_in=0)


def test_streamed_minima_match_the_stored_orbit_1d():
    system = CantorIFS()
    start = Point(coords=[0.2])
    center = Point(coords=[0.7])
    k, n = 600_000, 3  # blocks longer than one stream chunk
    minima, clamps = stream_block_minima(system, center, start, k, n, RngStream(5))
    arr = orbit_array(system, start, k, RngStream(5))
    expected = np.abs(arr[:, 0] - 0.7).reshape(n, k // n).min(axis=1)
    np.testing.assert_array_equal(minima, expected)
    assert clamps == 0


def test_streamed_minima_match_the_stored_orbit_2d():
    system = Henon()
    start = Point(coords=[0.1, 0.1])
    center = Point(coords=[0.6, 0.1])
    k, n = 10_000, 7
    m = k // n
    minima, _ = stream_block_minima(system, center, start, k, n, RngStream(0))
    arr = orbit_array(system, start, n * m, RngStream(0))
    d = np.hypot(arr[:, 0] - 0.6, arr[:, 1] - 0.1)
    np.testing.assert_allclose(minima, d.reshape(n, m).min(axis=1), rtol=1e-12)


def test_streamed_minima_cross_chunks_on_a_map():
    system = Lozi()
    start = Point(coords=[0.1, 0.1])
    center = Point(coords=[0.5, 0.0])
    k, n = 600_000, 3
    minima, _ = stream_block_minima(system, center, start, k, n, RngStream(0))
    arr = orbit_array(system, start, k, RngStream(0))
    d = np.hypot(arr[:, 0] - 0.5, arr[:, 1])
    np.testing.assert_allclose(minima, d.reshape(n, k // n).min(axis=1), rtol=1e-12)


def test_streaming_stops_at_the_last_series_point():
    system = Henon()
    start = Point(coords=[10.0, 10.0])
    with pytest.raises(OrbitDivergenceError) as exc:
        orbit(system, start, 100, RngStream(0))
    finite = exc.value.step_index
    # every point the series needs is finite; the next one is not
    arr = orbit_array(system, start, finite, RngStream(0))
    origin = Point(coords=[0.0, 0.0])
    minima, _ = stream_block_minima(system, origin, start, finite, 1, RngStream(0))
    assert minima[0] == pytest.approx(np.hypot(arr[:, 0], arr[:, 1]).min(), rel=1e-12)
    with pytest.raises(OrbitDivergenceError) as again:
        stream_block_minima(system, origin, start, finite + 1, 1, RngStream(0))
    assert again.value.step_index == finite


def test_theoretical_dimensions():
    assert theoretical_dimension(CantorIFS()) == pytest.approx(math.log(2) / math.log(3), rel=1e-12)
    assert theoretical_dimension(Sierpinski()) == pytest.approx(math.log(3) / math.log(2), rel=1e-12)
    assert theoretical_dimension(Baker()) == pytest.approx(1.4357, abs=1e-3)
    assert theoretical_dimension(Henon()) == pytest.approx(1.25826)
    assert theoretical_dimension(Lozi()) == pytest.approx(1.40419)


def test_weighted_ifs_dimension():
    assert theoretical_dimension(WeightedIFS.cantor(0.4)) == pytest.approx(0.6126, abs=1e-4)
    # equal weights reduce to the Cantor set
    assert theoretical_dimension(WeightedIFS.cantor(0.5)) == pytest.approx(
        theoretical_dimension(CantorIFS()), rel=1e-12
    )


def test_baker_dimension_is_kaplan_yorke():
    h = -(0.5 * math.log(0.5) * 2)
    lam = math.log(0.25)
    assert baker_dimension(0.5, 0.25, 0.25) == pytest.approx(1.0 + h / abs(lam))


def test_weighted_ifs_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        WeightedIFS(
            branches=[
                {"offset": [0.0], "ratio": 0.5, "weight": 0.3},
                {"offset": [0.5], "ratio": 0.5, "weight": 0.3},
            ]
        )


def test_classical_system_presets():
    assert isinstance(classical_system("lozi"), Lozi)
    assert classical_system("weighted_ifs") is None


def test_baker_orbit_stays_in_the_unit_square(rng):
    arr = orbit_array(Baker(), Point(coords=rng.random(2).tolist()), 10_000, rng)
    assert np.all((arr >= 0.0) & (arr <= 1.0))


def test_lozi_orbit_stays_bounded():
    arr = orbit_array(Lozi(), Point(coords=[0.1, 0.1]), 10_000, RngStream(0))
    assert np.all(np.abs(arr[:, 0]) <= 2.0)
    assert np.all(np.abs(arr[:, 1]) <= 1.0)


def test_ifs_dimension_ignores_branch_order():
    branches = [
        {"offset": [0.0], "ratio": 0.2, "weight": 0.5},
        {"offset": [0.4], "ratio": 0.3, "weight": 0.2},
        {"offset": [0.8], "ratio": 0.2, "weight": 0.3},
    ]
    base = theoretical_dimension(WeightedIFS(branches=branches))
    for order in ([2, 0, 1], [1, 2, 0], [2, 1, 0]):
        shuffled = WeightedIFS(branches=[branches[i] for i in order])
        assert theoretical_dimension(shuffled) == pytest.approx(base, rel=1e-12)
    assert ifs_dimension([0.2, 0.3, 0.2], [0.5, 0.2, 0.3]) == pytest.approx(base, rel=1e-12)
