"""
observables.py — Distance observables and block maxima.

g1 = -log d, g2 = d^(-1/alpha), g3 = C - d^(1/alpha), with d the distance
from the orbit point to the center. All three decrease with d, so the block
maximum of any of them is the observable applied to the block-minimum
distance; the streaming path relies on this.
"""

from __future__ import annotations

import logging
from typing import Dict, Sequence, Tuple

import numpy as np

from src.errors import DomainError, InvalidPartitionError
from src.state import MaximaSample, ObservableKind, ObservableSeries, ObservableSpec, Point
from src.tools.maps import CLAMP_DISTANCE, RngStream, orbit_array, stream_block_minima

logger = logging.getLogger(__name__)


def distances(points: np.ndarray, center: Point) -> np.ndarray:
    """Euclidean distance in 2-D, absolute difference in 1-D."""
    c = center.as_array()
    if points.shape[1] == 1:
        return np.abs(points[:, 0] - c[0])
    return np.hypot(points[:, 0] - c[0], points[:, 1] - c[1])


def clamp(dist: np.ndarray) -> Tuple[np.ndarray, int]:
    hits = dist < CLAMP_DISTANCE
    count = int(np.count_nonzero(hits))
    if count:
        dist = np.where(hits, CLAMP_DISTANCE, dist)
    return dist, count


def transform(kind: ObservableKind, alpha: float, C: float, dist: np.ndarray) -> np.ndarray:
    """Apply g to already-clamped distances."""
    dist = np.asarray(dist, dtype=np.float64)
    if kind == "g1":
        return -np.log(dist)
    if kind == "g2":
        return np.power(dist, -1.0 / alpha)
    if kind == "g3":
        return C - np.power(dist, 1.0 / alpha)
    raise DomainError(f"unknown observable kind {kind!r}")


def evaluate(obs: ObservableSpec, p: Point) -> float:
    """g(dist(p, center)); distances under the clamp threshold are clamped."""
    dist, count = clamp(distances(p.as_array()[None, :], obs.center))
    if count:
        logger.debug("Clamped distance at %s (center %s)", p.coords, obs.center.coords)
    return float(transform(obs.kind, obs.alpha, obs.C, dist)[0])


def series(system, obs: ObservableSpec, start: Point, k: int, rng: RngStream) -> ObservableSeries:
    """The observable along the first k orbit points (start included)."""
    if k < 1:
        raise DomainError(f"series length must be >= 1, got {k}")
    points = orbit_array(system, start, k, rng)
    dist, count = clamp(distances(points, obs.center))
    if count:
        logger.warning("%d distances clamped to %g in a %d-point series", count, CLAMP_DISTANCE, k)
    return ObservableSeries(
        values=transform(obs.kind, obs.alpha, obs.C, dist),
        clamp_count=count,
        kind=obs.kind,
    )


def block_maxima(values, n: int) -> MaximaSample:
    """Maxima of n consecutive non-overlapping blocks; the remainder is dropped."""
    if isinstance(values, ObservableSeries):
        clamps = values.clamp_count
        values = values.values
    else:
        clamps = 0
    data = np.asarray(values, dtype=np.float64)
    k = data.shape[0]
    if n < 1 or n > k:
        raise InvalidPartitionError(f"cannot split {k} values into {n} blocks")
    m = k // n
    maxima = data[: n * m].reshape(n, m).max(axis=1)
    return MaximaSample(maxima=maxima, block_size=m, n=n, dropped=k - n * m, clamp_count=clamps)


def streamed_block_maxima(
    system,
    templates: Sequence,
    center: Point,
    start: Point,
    k: int,
    n: int,
    rng: RngStream,
) -> Dict[str, MaximaSample]:
    """Block maxima of several observables sharing one orbit and one center.

    The orbit is scanned once for block-minimum distances; each observable
    is then applied to those minima.
    """
    if n < 1 or n > k:
        raise InvalidPartitionError(f"cannot split {k} values into {n} blocks")
    minima, clamps = stream_block_minima(system, center, start, k, n, rng)
    if clamps:
        logger.warning("%d distances clamped to %g (k=%d, n=%d)", clamps, CLAMP_DISTANCE, k, n)
    m = k // n
    out: Dict[str, MaximaSample] = {}
    for t in templates:
        out[t.kind] = MaximaSample(
            maxima=transform(t.kind, t.alpha, t.C, minima),
            block_size=m,
            n=n,
            dropped=k - n * m,
            clamp_count=clamps,
        )
    return out


def empirical_cdf(sample: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Right-continuous step function: distinct support points and F at each."""
    data = np.sort(np.asarray(sample, dtype=np.float64), kind="stable")
    if data.size == 0:
        raise DomainError("empirical cdf of an empty sample")
    support, counts = np.unique(data, return_counts=True)
    return support, np.cumsum(counts) / data.size


def ecdf_at(sample: Sequence[float], x: float) -> float:
    support, fractions = empirical_cdf(sample)
    idx = np.searchsorted(support, x, side="right")
    return 0.0 if idx == 0 else float(fractions[idx - 1])

