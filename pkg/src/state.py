"""
state.py — Data contracts for the extremes pipeline.

Every stage reads and writes these typed schemas. Pydantic validators enforce
the invariants of each type at construction time; the TypedDict state used by
the LangGraph runner merges concurrent cell results through reducers.
"""

from __future__ import annotations

import math
import operator
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing_extensions import TypedDict

ObservableKind = Literal["g1", "g2", "g3"]
Family = Literal["GEV", "Gumbel", "Normal", "Exponential"]
DimensionMethod = Literal[
    "sigma_g1",
    "xi_g2",
    "xi_g3",
    "mu_g1_slope",
    "mu_g2_slope",
    "sigma_g2_slope",
    "sigma_g3_slope",
]

WEIGHT_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------


class Point(BaseModel):
    """A point of the ambient space (1-D or 2-D)."""

    coords: List[float] = Field(min_length=1, max_length=2)

    @field_validator("coords")
    @classmethod
    def _finite(cls, v: List[float]) -> List[float]:
        if not all(math.isfinite(c) for c in v):
            raise ValueError(f"point coordinates must be finite, got {v}")
        return v

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.float64)


class IfsBranch(BaseModel):
    """One affine contraction f(x) = offset + ratio * x, drawn with probability weight."""

    offset: List[float] = Field(min_length=1, max_length=2)
    ratio: float = Field(gt=0.0, lt=1.0)
    weight: float = Field(gt=0.0, le=1.0)


def _check_weights(branches: List[IfsBranch]) -> None:
    total = math.fsum(b.weight for b in branches)
    if abs(total - 1.0) > WEIGHT_TOLERANCE:
        raise ValueError(f"IFS weights must sum to 1, got {total!r}")
    dims = {len(b.offset) for b in branches}
    if len(dims) != 1:
        raise ValueError("all IFS branch offsets must share one dimension")


class CantorIFS(BaseModel):
    """Middle-third Cantor IFS: x/3 with weight w, (x+2)/3 with weight 1-w."""

    kind: Literal["cantor"] = "cantor"
    w: float = Field(default=0.5, gt=0.0, lt=1.0)
    start: List[float] = Field(default_factory=lambda: [0.0])

    @property
    def ambient_dim(self) -> int:
        return 1

    def branches(self) -> List[IfsBranch]:
        return [
            IfsBranch(offset=[0.0], ratio=1.0 / 3.0, weight=self.w),
            IfsBranch(offset=[2.0 / 3.0], ratio=1.0 / 3.0, weight=1.0 - self.w),
        ]


class Sierpinski(BaseModel):
    """Sierpinski triangle: (p + v)/2 with v drawn uniformly from three vertices."""

    kind: Literal["sierpinski"] = "sierpinski"
    start: List[float] = Field(default_factory=lambda: [0.0, 0.0])

    @property
    def ambient_dim(self) -> int:
        return 2

    def branches(self) -> List[IfsBranch]:
        vertices = ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0))
        return [
            IfsBranch(offset=[vx / 2.0, vy / 2.0], ratio=0.5, weight=1.0 / 3.0)
            for vx, vy in vertices
        ]


class WeightedIFS(BaseModel):
    """General IFS of affine contractions with arbitrary weights."""

    kind: Literal["weighted_ifs"] = "weighted_ifs"
    branch_list: List[IfsBranch] = Field(min_length=2, alias="branches")
    start: Optional[List[float]] = None

    model_config = ConfigDict(populate_by_name=True)

    @model_validator(mode="after")
    def _validate(self) -> "WeightedIFS":
        _check_weights(self.branch_list)
        if self.start is not None and len(self.start) != self.ambient_dim:
            raise ValueError("start point dimension does not match the branch offsets")
        return self

    @property
    def ambient_dim(self) -> int:
        return len(self.branch_list[0].offset)

    def branches(self) -> List[IfsBranch]:
        return list(self.branch_list)

    @classmethod
    def cantor(cls, w: float) -> "WeightedIFS":
        """The two-branch middle-third IFS with weight w on x/3."""
        return cls(
            branches=[
                IfsBranch(offset=[0.0], ratio=1.0 / 3.0, weight=w),
                IfsBranch(offset=[2.0 / 3.0], ratio=1.0 / 3.0, weight=1.0 - w),
            ]
        )


class Baker(BaseModel):
    """Generalised Baker map on the unit square."""

    kind: Literal["baker"] = "baker"
    alpha: float = Field(default=1.0 / 3.0, gt=0.0, lt=1.0)
    gamma_a: float = Field(default=0.2, gt=0.0, le=0.5)
    gamma_b: float = Field(default=0.25, gt=0.0, le=0.5)
    start: Optional[List[float]] = None

    @property
    def ambient_dim(self) -> int:
        return 2


class Henon(BaseModel):
    kind: Literal["henon"] = "henon"
    a: float = 1.4
    b: float = 0.3
    start: List[float] = Field(default_factory=lambda: [0.0, 0.0])

    @property
    def ambient_dim(self) -> int:
        return 2


class Lozi(BaseModel):
    kind: Literal["lozi"] = "lozi"
    a: float = 1.7
    b: float = 0.5
    start: List[float] = Field(default_factory=lambda: [0.1, 0.1])

    @property
    def ambient_dim(self) -> int:
        return 2


SystemSpec = Annotated[
    Union[CantorIFS, Sierpinski, WeightedIFS, Baker, Henon, Lozi],
    Field(discriminator="kind"),
]
IFS_KINDS = ("cantor", "sierpinski", "weighted_ifs")


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


class ObservableTemplate(BaseModel):
    """Observable choice without a center; instantiated per center by the runner."""

    kind: ObservableKind
    alpha: float = Field(default=4.0, gt=0.0)
    C: float = 10.0

    @field_validator("C")
    @classmethod
    def _finite_c(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("C must be finite")
        return v

    def at(self, center: Point) -> "ObservableSpec":
        return ObservableSpec(kind=self.kind, alpha=self.alpha, C=self.C, center=center)


class ObservableSpec(ObservableTemplate):
    center: Point


class ObservableSeries(BaseModel):
    """X_m = g(dist(f^m(x), zeta)) for m = 0..k-1."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    clamp_count: int = Field(ge=0)
    kind: Optional[ObservableKind] = None

    @property
    def k(self) -> int:
        return int(self.values.shape[0])


class MaximaSample(BaseModel):
    """Block maxima of a series: n blocks of m consecutive values."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    maxima: np.ndarray
    block_size: int = Field(ge=1)
    n: int = Field(ge=1)
    dropped: int = Field(default=0, ge=0, description="trailing values not covered by any block")
    clamp_count: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _shape(self) -> "MaximaSample":
        if self.maxima.shape != (self.n,):
            raise ValueError(f"expected {self.n} maxima, got shape {self.maxima.shape}")
        return self

    @property
    def source_length(self) -> int:
        return self.n * self.block_size + self.dropped


# ---------------------------------------------------------------------------
# gev
# ---------------------------------------------------------------------------


class GevParams(BaseModel):
    """GEV location mu, scale sigma, shape xi' (positive = Frechet type)."""

    mu: float
    sigma: float = Field(gt=0.0)
    xi: float

    @property
    def support_lower(self) -> float:
        return self.mu - self.sigma / self.xi if self.xi > 0 else -math.inf

    @property
    def support_upper(self) -> float:
        return self.mu - self.sigma / self.xi if self.xi < 0 else math.inf

    @property
    def within_lmoment_validity(self) -> bool:
        return abs(self.xi) <= 0.5


class TheoreticalPrediction(BaseModel):
    """Scaling laws of the GEV parameters versus the block count n at fixed k."""

    kind: ObservableKind
    xi_pred: float
    sigma_law: Literal["constant", "power_law"]
    sigma_value: Optional[float] = None
    sigma_exponent: Optional[float] = None
    mu_law: Literal["affine_ln_n", "power_law", "constant"]
    mu_slope: Optional[float] = None
    mu_exponent: Optional[float] = None
    mu_value: Optional[float] = None


# ---------------------------------------------------------------------------
# lmoments
# ---------------------------------------------------------------------------


class LMomentSet(BaseModel):
    l1: float
    l2: float = Field(ge=0.0)
    t3: float
    t4: float
    size: int = Field(ge=4)
    degenerate: bool = False

    @model_validator(mode="after")
    def _bounded_skew(self) -> "LMomentSet":
        if not self.degenerate and abs(self.t3) > 1.0 + 1e-12:
            raise ValueError(f"|t3| must not exceed 1, got {self.t3}")
        return self


class Interval(BaseModel):
    lo: float
    hi: float

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


class FitResult(BaseModel):
    """L-moment GEV fit with percentile bootstrap intervals."""

    params: Optional[GevParams] = None
    ci95: Dict[str, Interval] = Field(default_factory=dict)
    level: float = 0.95
    n_boot: int = Field(default=0, ge=0)
    n_failed: int = Field(default=0, ge=0)
    degenerate: bool = False
    out_of_validity: bool = False

    @model_validator(mode="after")
    def _intervals_cover_estimates(self) -> "FitResult":
        if self.params is None:
            return self
        for name, interval in self.ci95.items():
            value = getattr(self.params, name)
            if not interval.contains(value):
                raise ValueError(f"{name} interval {interval} does not contain {value}")
        return self


# ---------------------------------------------------------------------------
# gof
# ---------------------------------------------------------------------------


class KsReport(BaseModel):
    statistic: float = Field(ge=0.0, le=1.0)
    sample_size: int = Field(ge=1)
    model_name: str


# ---------------------------------------------------------------------------
# dimension
# ---------------------------------------------------------------------------


class EnsembleSummary(BaseModel):
    mean: float
    std: Optional[float] = None
    stderr: Optional[float] = None
    count: int = Field(ge=1)

    @property
    def std_defined(self) -> bool:
        return self.std is not None


class ParamRow(BaseModel):
    """Ensemble-averaged GEV parameters at one block count n."""

    n: int = Field(ge=1)
    m: int = Field(ge=1)
    mu: float
    sigma: float
    xi: float
    mu_std: float = 0.0
    sigma_std: float = 0.0
    xi_std: float = 0.0
    members: int = Field(default=1, ge=1)

    @classmethod
    def from_params(cls, n: int, m: int, params: List[GevParams]) -> "ParamRow":
        if not params:
            raise ValueError(f"no successful fits at n={n}")
        table = np.array([[p.mu, p.sigma, p.xi] for p in params])
        mean = table.mean(axis=0)
        std = table.std(axis=0, ddof=1) if len(params) > 1 else np.zeros(3)
        return cls(
            n=n,
            m=m,
            mu=mean[0],
            sigma=mean[1],
            xi=mean[2],
            mu_std=std[0],
            sigma_std=std[1],
            xi_std=std[2],
            members=len(params),
        )


class ParamSeries(BaseModel):
    kind: ObservableKind
    alpha: float = Field(default=4.0, gt=0.0)
    C: float = 10.0
    system: str = ""
    k: int = Field(ge=1)
    rows: List[ParamRow]

    @model_validator(mode="after")
    def _increasing(self) -> "ParamSeries":
        ns = [r.n for r in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError(f"n values must be strictly increasing, got {ns}")
        return self


class ScalingFit(BaseModel):
    slope: float
    intercept: float
    stderr_slope: float = Field(ge=0.0)
    stderr_intercept: float = Field(default=0.0, ge=0.0)
    abscissa: Literal["ln_n", "log10_n"] = "log10_n"

    def predict(self, x: Any) -> Any:
        return self.intercept + self.slope * np.asarray(x, dtype=np.float64)


class DimensionEstimate(BaseModel):
    delta: float = Field(gt=0.0)
    uncertainty: float = Field(ge=0.0)
    method: DimensionMethod
    n: Optional[int] = None
    excluded_n: List[int] = Field(default_factory=list)
    uncertainty_realizations: Optional[float] = None
    uncertainty_centers: Optional[float] = None

    @field_validator("delta")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("delta must be finite")
        return v


# ---------------------------------------------------------------------------
# harness
# ---------------------------------------------------------------------------


class ExperimentConfig(BaseModel):
    """A validated experiment; defaults are the desk-scale setup."""

    system: SystemSpec
    observables: List[ObservableTemplate] = Field(
        default_factory=lambda: [
            ObservableTemplate(kind="g1"),
            ObservableTemplate(kind="g2"),
            ObservableTemplate(kind="g3"),
        ],
        min_length=1,
    )
    k: int = Field(ge=2)
    n_grid: List[int] = Field(default_factory=lambda: [1000], min_length=1)
    ensemble: int = Field(default=30, ge=1)
    centers: int = Field(default=30, ge=1)
    seed: int = Field(default=20130401, ge=0, lt=2**64)
    burn_in: Optional[int] = Field(default=None, ge=1)
    bootstrap_B: int = Field(default=1000, ge=100)
    min_block: int = Field(default=1000, ge=1)
    start_jitter: float = Field(default=1e-6, ge=0.0)
    families: List[Family] = Field(
        default_factory=lambda: ["GEV", "Gumbel", "Normal", "Exponential"], min_length=1
    )
    output_dir: str = "results"

    @model_validator(mode="after")
    def _grid(self) -> "ExperimentConfig":
        if len(set(self.n_grid)) != len(self.n_grid):
            raise ValueError(f"n_grid entries must be distinct, got {self.n_grid}")
        for n in self.n_grid:
            if n < 1:
                raise ValueError(f"n_grid entries must be >= 1, got {n}")
            if self.k // n < 2:
                raise ValueError(f"n_grid entry {n} leaves m = k // n < 2 for k={self.k}")
        self.n_grid = sorted(self.n_grid)
        kinds = [o.kind for o in self.observables]
        if len(set(kinds)) != len(kinds):
            raise ValueError(f"observables must be distinct, got {kinds}")
        return self

    @property
    def system_tag(self) -> str:
        return self.system.kind

    @property
    def effective_burn_in(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return 1000 if self.system.kind in IFS_KINDS else 10_000


class CenterInfo(BaseModel):
    index: int = Field(ge=0)
    seed: int
    point: Optional[Point] = None
    error: Optional[str] = None


class ExperimentRecord(BaseModel):
    """One (center, realization, observable, n) cell."""

    system: str
    observable: ObservableKind
    alpha: float
    C: float
    center_idx: int
    realization_idx: int
    n: int
    m: int
    mu: Optional[float] = None
    sigma: Optional[float] = None
    xi: Optional[float] = None
    mu_lo: Optional[float] = None
    mu_hi: Optional[float] = None
    sigma_lo: Optional[float] = None
    sigma_hi: Optional[float] = None
    xi_lo: Optional[float] = None
    xi_hi: Optional[float] = None
    ks_winner: Optional[str] = None
    ks_D: Optional[float] = None
    clamp_count: int = 0
    cell_seed: int
    error: Optional[str] = None

    @property
    def key(self) -> Tuple[int, int, str, int]:
        return (self.center_idx, self.realization_idx, self.observable, self.n)

    @property
    def ok(self) -> bool:
        return self.error is None and self.sigma is not None


class ExperimentSummary(BaseModel):
    system: str
    k: int
    theoretical_delta: float
    estimates: List[DimensionEstimate] = Field(default_factory=list)
    rows: Dict[str, List[ParamRow]] = Field(default_factory=dict)
    failed_cells: int = 0
    total_cells: int = 0
    notes: List[str] = Field(default_factory=list)


class TableCell(BaseModel):
    """Delta +/- one standard deviation, or a blank with a reason code."""

    value: Optional[float] = None
    uncertainty: Optional[float] = None
    reason: Optional[str] = None

    @property
    def blank(self) -> bool:
        return self.value is None


class DimensionTable(BaseModel):
    table: Literal["t1", "t2"]
    systems: List[str]
    # row label -> system -> cell
    rows: Dict[str, Dict[str, TableCell]]


class CellTask(TypedDict):
    config: ExperimentConfig
    center: CenterInfo
    realization: int
    n: int


class ExperimentState(TypedDict):

    config: ExperimentConfig
    centers: List[CenterInfo]

    # Parallel-safe: each cell appends its records
    records: Annotated[List[ExperimentRecord], operator.add]

    summary: Optional[ExperimentSummary]

    # Set by any node that hits a batch-level failure
    error: Optional[str]
