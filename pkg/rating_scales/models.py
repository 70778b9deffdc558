"""Pydantic models for rating-scale definition."""

from __future__ import annotations

from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_serializer, model_validator

from rating_scales import config


class Label(str, Enum):
    TP = "TP"
    FP = "FP"
    TN = "TN"
    FN = "FN"


class LogicalVariant(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"


class MonotonicityVariant(str, Enum):
    APPROX = "approx"
    EXACT = "exact"
    OFF = "off"


# --------------- Data ---------------


class Dataset(BaseModel):
    """Score-ordered counterparts; ``defaults[i]`` is 1 when counterpart i+1 defaulted."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    defaults: Tuple[int, ...]
    scores: Optional[Tuple[float, ...]] = None

    @model_validator(mode="after")
    def _check(self) -> "Dataset":
        if len(self.defaults) != self.n:
            raise ValueError(f"defaults has length {len(self.defaults)}, expected n={self.n}")
        if any(v not in (0, 1) for v in self.defaults):
            raise ValueError("defaults must be 0/1")
        if self.scores is not None:
            if len(self.scores) != self.n:
                raise ValueError(f"scores has length {len(self.scores)}, expected n={self.n}")
            if any(b < a for a, b in zip(self.scores, self.scores[1:])):
                raise ValueError("scores must be non-decreasing (counterparts ordered by risk)")
        return self

    @property
    def d(self) -> int:
        return sum(self.defaults)

    @property
    def default_positions(self) -> List[int]:
        return [i + 1 for i, v in enumerate(self.defaults) if v]


class Partition(BaseModel):
    """Contiguous grades N_1..N_m over the score-ordered counterparts."""

    model_config = ConfigDict(frozen=True)

    cardinalities: Tuple[int, ...]

    @model_validator(mode="after")
    def _check(self) -> "Partition":
        if len(self.cardinalities) < 2:
            raise ValueError("a rating scale needs at least 2 grades")
        if any(c < 1 for c in self.cardinalities):
            raise ValueError(f"every grade must be nonempty, got {self.cardinalities}")
        return self

    @property
    def n(self) -> int:
        return sum(self.cardinalities)

    @property
    def m(self) -> int:
        return len(self.cardinalities)

    def bounds(self) -> List[Tuple[int, int]]:
        """1-based inclusive (first, last) counterpart index of each grade."""
        out, start = [], 1
        for c in self.cardinalities:
            out.append((start, start + c - 1))
            start += c
        return out

    def grade_of(self) -> List[int]:
        """1-based grade of every counterpart, in counterpart order."""
        return [j + 1 for j, c in enumerate(self.cardinalities) for _ in range(c)]


class GradeStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    cardinality: int = Field(ge=1)
    default_count: int = Field(ge=0)
    default_rate: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check(self) -> "GradeStats":
        if self.default_count > self.cardinality:
            raise ValueError("default_count exceeds cardinality")
        if self.default_rate != self.default_count / self.cardinality:
            raise ValueError("default_rate must equal default_count / cardinality")
        return self


# --------------- Validation ---------------


class TTestResult(BaseModel):
    grade: int
    t: float
    applicable: bool
    heterogeneous: bool


class ZTestResult(BaseModel):
    grade: int
    pass_fraction: float
    applicable: bool
    homogeneous: bool


class ValidationConfig(BaseModel):
    """Thresholds for the classical checks. ``None`` thresholds fall back to the 1%/15% rule."""

    concentration_threshold: float = Field(default=config.CONCENTRATION_THRESHOLD, gt=0.0, le=1.0)
    lambda1: Optional[int] = None
    lambda2: Optional[int] = None
    alpha: float = Field(default=config.HETEROGENEITY_ALPHA, gt=0.0, lt=1.0)
    homogeneity_alpha: float = Field(default=config.HOMOGENEITY_ALPHA, gt=0.0, lt=1.0)
    homogeneity_iterations: int = Field(default=config.HOMOGENEITY_ITERATIONS, ge=1)
    check_monotonicity: bool = True
    check_concentration: bool = True
    check_cardinality: bool = True
    check_heterogeneity: bool = True
    check_homogeneity: bool = True
    seed: int = 0


class ValidityReport(BaseModel):
    monotonicity: bool
    concentration: bool
    cardinality: bool
    heterogeneity: Optional[bool] = None
    homogeneity: Optional[bool] = None
    h_adj: float
    default_rates: List[float]
    cardinalities: List[int]
    lambda1: int
    lambda2: int
    concentration_threshold: float
    t_tests: List[TTestResult] = Field(default_factory=list)
    z_tests: List[ZTestResult] = Field(default_factory=list)

    @property
    def encoded_valid(self) -> bool:
        """Monotonicity, concentration and cardinality: the constraints with a QUBO encoding."""
        return self.monotonicity and self.concentration and self.cardinality


# --------------- QUBO ---------------


class LayoutOptions(BaseModel):
    include_thresholds: bool = True
    lambda1: Optional[int] = None
    lambda2: Optional[int] = None
    exact_monotonicity: bool = False
    defaults: Optional[Tuple[int, ...]] = None   # required for the exact y-block
    allow_large: bool = False


class VariableLayout(BaseModel):
    """Flat index map for the x, s1, s2, y and s_y blocks. Counterpart/grade indices are 1-based."""

    model_config = ConfigDict(frozen=True)

    n: int
    m: int
    include_thresholds: bool
    lambda1: int = 0
    lambda2: int = 0
    nbar1: int = 0
    nbar2: int = 0
    exact_monotonicity: bool = False
    d: int = 0
    n_y: int = 0
    defaults: Optional[Tuple[int, ...]] = None
    s1_offset: int
    s2_offset: int
    y_offset: int
    sy_offset: int
    total_variables: int

    @property
    def x_size(self) -> int:
        return self.n * self.m

    def x_index(self, i: int, j: int) -> int:
        return (i - 1) * self.m + (j - 1)

    def s1_index(self, level: int, j: int) -> int:
        return self.s1_offset + level * self.m + (j - 1)

    def s2_index(self, level: int, j: int) -> int:
        return self.s2_offset + level * self.m + (j - 1)

    def sy_index(self, level: int, j: int) -> int:
        return self.sy_offset + level * (self.m - 1) + (j - 1)


class PenaltyWeights(BaseModel):
    """Penalty multipliers. mu05..mu07 weight the local logical encoder and default to mu04."""

    model_config = ConfigDict(frozen=True)

    mu01: float = Field(default=0.0, ge=0.0)
    mu02: float = Field(default=0.0, ge=0.0)
    mu03: float = Field(default=0.0, ge=0.0)
    mu04: float = Field(default=0.0, ge=0.0)
    mu05: Optional[float] = Field(default=None, ge=0.0)
    mu06: Optional[float] = Field(default=None, ge=0.0)
    mu07: Optional[float] = Field(default=None, ge=0.0)
    mu1: float = Field(default=0.0, ge=0.0)
    mu3: float = Field(default=0.0, ge=0.0)
    mu41: float = Field(default=0.0, ge=0.0)
    mu42: float = Field(default=0.0, ge=0.0)
    lambda0: float = Field(default=0.0, ge=0.0)
    lambda_exact: float = Field(default=0.0, ge=0.0)

    def local(self, name: str) -> float:
        value = getattr(self, name)
        return self.mu04 if value is None else value

    def scaled(self, factor: float) -> "PenaltyWeights":
        data = {k: (None if v is None else v * factor) for k, v in self.model_dump().items()}
        return PenaltyWeights(**data)


class ComposeOptions(BaseModel):
    logical: LogicalVariant = LogicalVariant.GLOBAL
    monotonicity: MonotonicityVariant = MonotonicityVariant.APPROX
    concentration: bool = True
    thresholds: bool = True


# --------------- Solvers ---------------


class AnnealSchedule(BaseModel):
    """``None`` fields are derived from the model: t_start from sampled deltas, sweeps from dimension."""

    t_start: Optional[float] = Field(default=None, gt=0.0)
    t_end: Optional[float] = Field(default=None, gt=0.0)
    sweeps: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "AnnealSchedule":
        if self.t_start is not None and self.t_end is not None and self.t_start < self.t_end:
            raise ValueError("t_start must be >= t_end")
        return self


class SolverOptions(BaseModel):
    solver: Literal["auto", "exact", "anneal"] = "auto"
    exact_cap: int = config.EXACT_SOLVER_CAP
    schedule: AnnealSchedule = Field(default_factory=AnnealSchedule)
    restarts: int = Field(default=config.ANNEAL_RESTARTS, ge=1)
    refine: bool = True   # staircase boundary descent after annealing
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    lambda1: Optional[int] = None
    lambda2: Optional[int] = None
    compose: ComposeOptions = Field(default_factory=ComposeOptions)
    validation: ValidationConfig = Field(default_factory=ValidationConfig)


class SolveResult(BaseModel):
    solver: str
    dimension: int
    best_state: Tuple[int, ...]
    best_energy: float
    all_minimizers: Optional[List[Tuple[int, ...]]] = None
    minimizer_count: Optional[int] = None
    decoded: Optional[Partition] = None
    diagnosis: List[str] = Field(default_factory=list)
    validity: Optional[ValidityReport] = None
    wall_time: float = 0.0
    evaluations: int = 0

    @field_serializer("best_state")
    def _state_bits(self, state: Tuple[int, ...]) -> str:
        return "".join(str(b) for b in state)

    @field_serializer("all_minimizers")
    def _minimizer_bits(self, states: Optional[List[Tuple[int, ...]]]) -> Optional[List[str]]:
        if states is None:
            return None
        return ["".join(str(b) for b in s) for s in states]


# --------------- Baseline / experiments ---------------


class BenchmarkRow(BaseModel):
    n: int
    m: int
    configurations: int
    valid_count: int
    elapsed: float

    @model_validator(mode="after")
    def _check(self) -> "BenchmarkRow":
        if self.valid_count > self.configurations:
            raise ValueError("valid_count exceeds configurations")
        return self


class ConfusionMatrix(BaseModel):
    tp: int = Field(default=0, ge=0)
    fp: int = Field(default=0, ge=0)
    tn: int = Field(default=0, ge=0)
    fn: int = Field(default=0, ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def actual_positive(self) -> int:
        return self.tp + self.fn


class CostHistogramRow(BaseModel):
    energy: float
    label: Label
    partition: Partition


class GradeRow(BaseModel):
    grade: int
    cardinality: int
    defaults: int
    default_rate: float


class RunConfig(BaseModel):
    """One CLI invocation, replayable from its JSON dump."""

    command: str
    seed: int = 0
    workers: int = 1
    pretty: bool = False
    args: Dict[str, Any] = Field(default_factory=dict)
