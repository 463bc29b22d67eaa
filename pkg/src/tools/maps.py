"""
maps.py — Dynamical systems with singular invariant measures.

Six systems are supported: the Cantor and Sierpinski IFS, a general weighted
IFS, and the Baker, Henon and Lozi maps. IFS systems are run as random
iterations (one uniform draw per step, mapped to a branch by cumulative
weight); the three maps are deterministic.

The hot loops are numba kernels. They release the GIL so independent orbits
can run on threads, and they never allocate per step.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from src.errors import DomainError, OrbitDivergenceError
from src.state import (
    IFS_KINDS,
    Baker,
    CantorIFS,
    Henon,
    IfsBranch,
    Lozi,
    Point,
    Sierpinski,
    WeightedIFS,
)

logger = logging.getLogger(__name__)

# Distances below this are clamped to it and counted
CLAMP_DISTANCE = 1e-300

# Literature values for the strange attractors
HENON_DIMENSION = 1.25826
LOZI_DIMENSION = 1.40419

MAP_HENON = 0
MAP_LOZI = 1
MAP_BAKER = 2

# Orbit points processed per kernel call when streaming
STREAM_CHUNK = 1 << 18


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


class RngStream:
    """Reproducible, splittable random stream.

    A stream is fully described by its 64-bit seed: equal seeds give
    bit-identical draws. Children are derived with numpy's SeedSequence
    spawn keys, so the seed of any child is a pure function of
    (parent seed, key) and never depends on scheduling.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.generator = np.random.default_rng(self.seed)

    def spawn(self, *key: int) -> "RngStream":
        return RngStream(derive_seed(self.seed, *key))

    def random(self, size: Optional[int] = None):
        return self.generator.random(size)

    def uniform(self, low: float, high: float, size: Optional[int] = None):
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size=size)


def derive_seed(root: int, *key: int) -> int:
    """Collapse (root, key...) into a 64-bit seed, counter-based."""
    seq = np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _pick_branch(u, cumw):
    s = cumw.shape[0]
    for q in range(s - 1):
        if u < cumw[q]:
            return q
    return s - 1


@njit(cache=True, nogil=True)
def _distance(x, center):
    if x.shape[0] == 1:
        return abs(x[0] - center[0])
    return math.hypot(x[0] - center[0], x[1] - center[1])


@njit(cache=True, nogil=True)
def _map_advance(code, p0, p1, p2, x):
    """Advance a deterministic map in place; returns False on a non-finite image."""
    x0 = x[0]
    x1 = x[1]
    if code == 0:
        nx = x1 + 1.0 - p0 * x0 * x0
        ny = p1 * x0
    elif code == 1:
        nx = x1 + 1.0 - p0 * abs(x0)
        ny = p1 * x0
    else:
        # Baker: p0 = alpha, p1 = gamma_a, p2 = gamma_b
        if x1 < p0:
            nx = (p1 * x0) % 1.0
            ny = (x1 / p0) % 1.0
        else:
            nx = (0.5 + p2 * x0) % 1.0
            ny = ((x1 - p0) / (1.0 - p0)) % 1.0
    x[0] = nx
    x[1] = ny
    return math.isfinite(nx) and math.isfinite(ny)


@njit(cache=True, nogil=True)
def _ifs_orbit(x, ratios, offsets, cumw, draws, out):
    d = x.shape[0]
    for c in range(d):
        out[0, c] = x[c]
    for t in range(draws.shape[0]):
        b = _pick_branch(draws[t], cumw)
        for c in range(d):
            x[c] = ratios[b] * x[c] + offsets[b, c]
            out[t + 1, c] = x[c]


@njit(cache=True, nogil=True)
def _map_orbit(code, p0, p1, p2, x, out):
    out[0, 0] = x[0]
    out[0, 1] = x[1]
    for t in range(1, out.shape[0]):
        if not _map_advance(code, p0, p1, p2, x):
            return t
        out[t, 0] = x[0]
        out[t, 1] = x[1]
    return -1


@njit(cache=True, nogil=True)
def _ifs_block_min(x, ratios, offsets, cumw, draws, center, m, out_min):
    """Block minima of dist(x_t, center) over len(out_min) blocks of m points.

    Consumes one draw per point; x is left at the first point after the scan.
    Returns the number of clamped distances.
    """
    d = x.shape[0]
    clamps = 0
    t = 0
    for j in range(out_min.shape[0]):
        best = np.inf
        for _ in range(m):
            dist = _distance(x, center)
            if dist < 1e-300:
                dist = 1e-300
                clamps += 1
            if dist < best:
                best = dist
            b = _pick_branch(draws[t], cumw)
            t += 1
            for c in range(d):
                x[c] = ratios[b] * x[c] + offsets[b, c]
        out_min[j] = best
    return clamps


@njit(cache=True, nogil=True)
def _map_block_min(code, p0, p1, p2, x, center, m, out_min, advance_first):
    """Deterministic-map analogue of _ifs_block_min.

    x is left at the last scanned point; a later call passes
    advance_first=True to step past it. Returns (clamps, fail) where fail is
    the local index of the first non-finite point, or -1.
    """
    clamps = 0
    t = 0
    for j in range(out_min.shape[0]):
        best = np.inf
        for _ in range(m):
            if (t > 0 or advance_first) and not _map_advance(code, p0, p1, p2, x):
                return clamps, t
            dist = _distance(x, center)
            if dist < 1e-300:
                dist = 1e-300
                clamps += 1
            if dist < best:
                best = dist
            t += 1
        out_min[j] = best
    return clamps, -1


# ---------------------------------------------------------------------------
# System helpers
# ---------------------------------------------------------------------------


def is_ifs(system) -> bool:
    return system.kind in IFS_KINDS


def ifs_arrays(system) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(ratios, offsets, cumulative weights) of an IFS system."""
    branches: List[IfsBranch] = system.branches()
    ratios = np.array([b.ratio for b in branches], dtype=np.float64)
    offsets = np.array([b.offset for b in branches], dtype=np.float64)
    cumw = np.cumsum([b.weight for b in branches])
    cumw[-1] = 1.0
    return ratios, offsets, cumw


def map_params(system) -> Tuple[int, float, float, float]:
    if isinstance(system, Henon):
        return MAP_HENON, system.a, system.b, 0.0
    if isinstance(system, Lozi):
        return MAP_LOZI, system.a, system.b, 0.0
    if isinstance(system, Baker):
        return MAP_BAKER, system.alpha, system.gamma_a, system.gamma_b
    raise TypeError(f"not a deterministic map: {system!r}")


def _check_point(system, p: Point) -> np.ndarray:
    if p.dim != system.ambient_dim:
        raise DomainError(
            f"{system.kind} lives in dimension {system.ambient_dim}, got a {p.dim}-D point"
        )
    return p.as_array().copy()


def _orbit_array(system, start: Point, length: int, rng: RngStream) -> np.ndarray:
    if length < 1:
        raise DomainError(f"orbit length must be >= 1, got {length}")
    x = _check_point(system, start)
    out = np.empty((length, system.ambient_dim), dtype=np.float64)
    if is_ifs(system):
        ratios, offsets, cumw = ifs_arrays(system)
        draws = rng.random(length - 1)
        _ifs_orbit(x, ratios, offsets, cumw, draws, out)
        return out
    code, p0, p1, p2 = map_params(system)
    fail = _map_orbit(code, p0, p1, p2, x, out)
    if fail >= 0:
        raise OrbitDivergenceError(fail, system.kind)
    return out


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def step(system, p: Point, rng: RngStream) -> Point:
    """Image of p under one step of the system; IFS variants consume one draw."""
    out = _orbit_array(system, p, 2, rng)
    return Point(coords=out[1].tolist())


def orbit(system, start: Point, length: int, rng: RngStream) -> List[Point]:
    """[start, f(start), ..., f^(length-1)(start)]."""
    out = _orbit_array(system, start, length, rng)
    return [Point(coords=row.tolist()) for row in out]


def orbit_array(system, start: Point, length: int, rng: RngStream) -> np.ndarray:
    """Same as orbit() but as a (length, d) array."""
    return _orbit_array(system, start, length, rng)


def basin_start(system, rng: RngStream, jitter: float = 0.0) -> Point:
    """Starting point for center selection.

    IFS systems start from their configured point (any point of the ambient
    space converges). Baker draws a uniform point of the unit square unless a
    start is configured. Henon and Lozi start from their basin point,
    perturbed by a uniform offset of half-width `jitter`.
    """
    if isinstance(system, Baker) and system.start is None:
        return Point(coords=rng.random(2).tolist())
    start = system.start if system.start is not None else [0.0] * system.ambient_dim
    coords = np.asarray(start, dtype=np.float64)
    if jitter > 0.0 and not is_ifs(system):
        coords = coords + rng.uniform(-jitter, jitter, coords.shape[0])
    return Point(coords=coords.tolist())


def select_center(system, rng: RngStream, burn_in: Optional[int] = None, jitter: float = 0.0) -> Point:
    """A point exponentially close to the invariant set.

    For IFS systems this is a deep preimage under the random IFS; for the
    maps it is the burn_in-th forward iterate of a basin point, distributed
    according to the SRB measure.
    """
    if burn_in is None:
        burn_in = default_burn_in(system)
    if burn_in < 1:
        raise DomainError(f"burn_in must be >= 1, got {burn_in}")
    start = basin_start(system, rng, jitter)
    x = _check_point(system, start)
    if is_ifs(system):
        ratios, offsets, cumw = ifs_arrays(system)
        draws = rng.random(burn_in)
        out = np.empty((burn_in + 1, system.ambient_dim), dtype=np.float64)
        _ifs_orbit(x, ratios, offsets, cumw, draws, out)
        return Point(coords=out[-1].tolist())
    code, p0, p1, p2 = map_params(system)
    out = np.empty((burn_in + 1, 2), dtype=np.float64)
    fail = _map_orbit(code, p0, p1, p2, x, out)
    if fail >= 0:
        raise OrbitDivergenceError(fail, system.kind)
    return Point(coords=out[-1].tolist())


def default_burn_in(system) -> int:
    return 1000 if is_ifs(system) else 10_000


def stream_block_minima(
    system,
    center: Point,
    start: Point,
    k: int,
    n: int,
    rng: RngStream,
) -> Tuple[np.ndarray, int]:
    """Block minima of dist(f^t(start), center) without storing the orbit.

    The series has k points split into n blocks of m = k // n; the trailing
    remainder is not simulated. Returns (minima, clamp_count).
    """
    m = k // n
    x = _check_point(system, start)
    c = _check_point(system, center)
    minima = np.empty(n, dtype=np.float64)
    blocks_per_chunk = max(1, STREAM_CHUNK // m)
    clamps = 0
    if is_ifs(system):
        ratios, offsets, cumw = ifs_arrays(system)
        for j0 in range(0, n, blocks_per_chunk):
            nb = min(blocks_per_chunk, n - j0)
            draws = rng.random(nb * m)
            clamps += _ifs_block_min(x, ratios, offsets, cumw, draws, c, m, minima[j0 : j0 + nb])
        return minima, int(clamps)
    code, p0, p1, p2 = map_params(system)
    for j0 in range(0, n, blocks_per_chunk):
        nb = min(blocks_per_chunk, n - j0)
        got, fail = _map_block_min(code, p0, p1, p2, x, c, m, minima[j0 : j0 + nb], j0 > 0)
        clamps += got
        if fail >= 0:
            raise OrbitDivergenceError(j0 * m + fail, system.kind)
    return minima, int(clamps)


# ---------------------------------------------------------------------------
# Theoretical dimensions
# ---------------------------------------------------------------------------


def ifs_dimension(ratios: Sequence[float], weights: Sequence[float]) -> float:
    """Entropy over Lyapunov exponent of the balanced measure."""
    w = np.asarray(weights, dtype=np.float64)
    lam = np.asarray(ratios, dtype=np.float64)
    return float(np.sum(w * np.log(w)) / np.sum(w * np.log(lam)))


def baker_dimension(alpha: float, gamma_a: float, gamma_b: float) -> float:
    """Kaplan-Yorke dimension 1 + h / |lambda_x| of the Baker attractor."""
    h = -(alpha * math.log(alpha) + (1.0 - alpha) * math.log(1.0 - alpha))
    lam_x = alpha * math.log(gamma_a) + (1.0 - alpha) * math.log(gamma_b)
    return 1.0 + h / abs(lam_x)


def theoretical_dimension(system) -> float:
    """Information dimension of the system's invariant measure."""
    if isinstance(system, (CantorIFS, Sierpinski, WeightedIFS)):
        branches = system.branches()
        return ifs_dimension([b.ratio for b in branches], [b.weight for b in branches])
    if isinstance(system, Baker):
        return baker_dimension(system.alpha, system.gamma_a, system.gamma_b)
    if isinstance(system, Henon):
        return HENON_DIMENSION
    if isinstance(system, Lozi):
        return LOZI_DIMENSION
    raise TypeError(f"unknown system {system!r}")


def classical_system(tag: str):
    """The system with the classical parameters for a record tag."""
    presets = {
        "cantor": CantorIFS,
        "sierpinski": Sierpinski,
        "baker": Baker,
        "henon": Henon,
        "lozi": Lozi,
    }
    if tag not in presets:
        return None
    return presets[tag]()
