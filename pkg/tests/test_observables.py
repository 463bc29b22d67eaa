import numpy as np
import pytest

from src.errors import DomainError, InvalidPartitionError
from src.state import CantorIFS, ObservableSpec, ObservableTemplate, Point, Sierpinski
from src.tools.maps import RngStream, orbit_array
from src.tools.observables import (
    block_maxima,
    distances,
    ecdf_at,
    empirical_cdf,
    evaluate,
    series,
    streamed_block_maxima,
    transform,
)

CENTER_1D = Point(coords=[0.0])


@pytest.mark.parametrize(
    "kind, expected",
    [("g1", 2.302585093), ("g2", 1.778279410), ("g3", 9.437658674)],
)
def test_observable_values_at_distance_one_tenth(kind, expected):
    obs = ObservableSpec(kind=kind, alpha=4.0, C=10.0, center=CENTER_1D)
    assert evaluate(obs, Point(coords=[0.1])) == pytest.approx(expected, rel=1e-9)


def test_zero_distance_is_clamped():
    obs = ObservableSpec(kind="g1", center=CENTER_1D)
    assert evaluate(obs, Point(coords=[0.0])) == pytest.approx(690.7755279, rel=1e-9)


def test_all_observables_decrease_with_distance():
    d = np.array([1e-6, 1e-3, 0.1, 0.5])
    for kind in ("g1", "g2", "g3"):
        values = transform(kind, 4.0, 10.0, d)
        assert np.all(np.diff(values) < 0)


def test_unknown_kind_is_rejected():
    with pytest.raises(DomainError):
        transform("g4", 4.0, 10.0, np.array([0.1]))


def test_distances_2d_are_euclidean():
    pts = np.array([[3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_allclose(distances(pts, Point(coords=[0.0, 0.0])), [5.0, 0.0])


def test_block_maxima_drops_the_remainder():
    sample = block_maxima([1, 5, 2, 8, 3, 9, 4], 3)
    np.testing.assert_array_equal(sample.maxima, [5.0, 8.0, 9.0])
    assert sample.block_size == 2
    assert sample.dropped == 1
    assert sample.source_length == 7


def test_block_maxima_rejects_bad_partitions():
    with pytest.raises(InvalidPartitionError):
        block_maxima([1.0, 2.0], 3)
    with pytest.raises(InvalidPartitionError):
        block_maxima([1.0, 2.0], 0)


def test_series_has_requested_length(rng):
    obs = ObservableSpec(kind="g2", center=Point(coords=[0.5, 0.2]))
    s = series(Sierpinski(), obs, Point(coords=[0.1, 0.1]), 1000, rng)
    assert s.k == 1000
    assert s.kind == "g2"
    assert np.all(np.isfinite(s.values))


def test_streamed_maxima_equal_maxima_of_the_stored_series():
    system = CantorIFS()
    center = Point(coords=[0.7])
    start = Point(coords=[0.3])
    k, n = 50_000, 50
    templates = [ObservableTemplate(kind=kind) for kind in ("g1", "g2", "g3")]
    streamed = streamed_block_maxima(system, templates, center, start, k, n, RngStream(3))
    for t in templates:
        s = series(system, t.at(center), start, k, RngStream(3))
        stored = block_maxima(s, n)
        np.testing.assert_allclose(streamed[t.kind].maxima, stored.maxima, rtol=1e-12)
        assert streamed[t.kind].block_size == k // n


def test_series_matches_the_orbit():
    system = CantorIFS()
    obs = ObservableSpec(kind="g1", center=Point(coords=[0.25]))
    s = series(system, obs, Point(coords=[0.0]), 100, RngStream(8))
    pts = orbit_array(system, Point(coords=[0.0]), 100, RngStream(8))
    np.testing.assert_allclose(s.values, -np.log(np.abs(pts[:, 0] - 0.25)))


def test_empirical_cdf_steps_at_ties():
    support, F = empirical_cdf([3.0, 1.0, 2.0, 2.0])
    np.testing.assert_array_equal(support, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(F, [0.25, 0.75, 1.0])


def test_ecdf_is_right_continuous():
    sample = [3.0, 1.0, 2.0, 2.0]
    assert ecdf_at(sample, 0.5) == 0.0
    assert ecdf_at(sample, 2.0) == 0.75
    assert ecdf_at(sample, 2.5) == 0.75
    assert ecdf_at(sample, 10.0) == 1.0


def test_empirical_cdf_of_empty_sample():
    with pytest.raises(DomainError):
        empirical_cdf([])
