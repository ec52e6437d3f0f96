from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    field_validator,
    model_validator,
)

from degenflow.config import settings
from degenflow.errors import ConfigValidationError


class StrictModel(BaseModel):
    """Config-facing base: unknown keys are rejected so typos cannot fake a pass"""
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------

class DomainKind(str, Enum):
    UNIT_CUBE = "unit_cube"
    UNIT_BALL = "unit_ball"
    INTERVAL_PRODUCT = "interval_product"


class Scheme(str, Enum):
    EXPLICIT = "explicit"
    IMEX_DIFFUSION = "imex_diffusion"


class BoundaryMode(str, Enum):
    DIRICHLET_ALL = "dirichlet_all"
    DIRICHLET_SIGMA_P = "dirichlet_sigma_p"
    NONE = "none"
    ZERO_FLUX = "zero_flux"


class InterfaceRule(str, Enum):
    STATE_AVERAGE = "state_average"
    ARITHMETIC = "arithmetic"
    KIRCHHOFF = "kirchhoff"


class ExperimentKind(str, Enum):
    SOLVE = "solve"
    CLASSIFY = "classify"
    ENTROPY_CHECK = "entropy_check"
    STABILITY_PAIR = "stability_pair"
    VISCOSITY_SWEEP = "viscosity_sweep"
    CROCCO_DEMO = "crocco_demo"


class ConditionId(str, Enum):
    C2_6 = "C2_6"
    C2_7 = "C2_7"
    C2_8 = "C2_8"
    C2_9 = "C2_9"
    C2_10 = "C2_10"


class Trigger(str, Enum):
    CONVECTION = "convection"
    DIFFUSION_GRADIENT = "diffusion_gradient"
    DIFFUSION_POSITIVE = "diffusion_positive"


class NodeStatus(str, Enum):
    CLASSIFIED = "classified"
    UNCLASSIFIABLE = "unclassifiable"


class JobStatus(str, Enum):
    QUEUED = "queued"
    PROCESSING = "processing"
    DONE = "done"
    ERROR = "error"


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

class DomainSpec(StrictModel):
    """Geometry of Omega: unit cube (0,1)^N, unit ball |x|<1, or a box"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: DomainKind
    dimension: PositiveInt
    bounds: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def check_bounds(self):
        if self.kind == DomainKind.INTERVAL_PRODUCT:
            if self.bounds is None or len(self.bounds) != self.dimension:
                raise ConfigValidationError(
                    "domain.bounds", f"interval_product needs {self.dimension} (lo, hi) pairs"
                )
            for axis, (lo, hi) in enumerate(self.bounds):
                if not lo < hi:
                    raise ConfigValidationError("domain.bounds", f"axis {axis}: lo must be < hi")
        elif self.bounds is not None:
            raise ConfigValidationError("domain.bounds", "bounds are only allowed for interval_product")
        return self

    def axis_bounds(self) -> List[Tuple[float, float]]:
        if self.kind == DomainKind.UNIT_CUBE:
            return [(0.0, 1.0)] * self.dimension
        if self.kind == DomainKind.UNIT_BALL:
            return [(-1.0, 1.0)] * self.dimension
        return [(float(lo), float(hi)) for lo, hi in self.bounds]


class FactorSpec(StrictModel):
    """Named coefficient family with its parameters"""
    family: str
    params: Dict[str, Any] = Field(default_factory=dict)


class DiffusionSpec(StrictModel):
    """a(s,x,t) = state(s) * space(x) * time(t)"""
    state: FactorSpec = Field(default_factory=lambda: FactorSpec(family="constant", params={"value": 1.0}))
    space: FactorSpec = Field(default_factory=lambda: FactorSpec(family="one"))
    time: FactorSpec = Field(default_factory=lambda: FactorSpec(family="one"))


class CoefficientSpec(StrictModel):
    diffusion: DiffusionSpec = Field(default_factory=DiffusionSpec)
    convection: FactorSpec = Field(default_factory=lambda: FactorSpec(family="zero"))
    reaction: FactorSpec = Field(default_factory=lambda: FactorSpec(family="constant", params={"value": 0.0}))
    source: FactorSpec = Field(default_factory=lambda: FactorSpec(family="constant", params={"value": 0.0}))
    delta1: PositiveFloat = 0.1
    delta2: PositiveFloat = 0.1
    u_range: Optional[Tuple[float, float]] = None

    @field_validator("u_range")
    @classmethod
    def ordered_range(cls, v):
        if v is not None and v[0] > v[1]:
            raise ValueError("u_range must be (u_min, u_max) with u_min <= u_max")
        return v


class InitialCondition(StrictModel):
    family: str = "sine_product"
    params: Dict[str, Any] = Field(default_factory=dict)


class SolverConfig(StrictModel):
    """Regularized-problem discretization knobs"""
    epsilon: NonNegativeFloat = 0.0
    dt: Optional[PositiveFloat] = None
    T: NonNegativeFloat = 0.1
    scheme: Scheme = Scheme.EXPLICIT
    cfl_safety: float = Field(default=settings.DEFAULT_CFL_SAFETY, gt=0, le=1)
    boundary_mode: BoundaryMode = BoundaryMode.DIRICHLET_ALL
    interface: InterfaceRule = InterfaceRule.STATE_AVERAGE
    smoothing_sweeps: int = Field(default=0, ge=0)
    snapshot_every: Optional[PositiveInt] = None


class VerificationSettings(StrictModel):
    k_values: Optional[List[float]] = None
    k_sweep_count: int = Field(default=9, ge=2)
    eta_values: List[PositiveFloat] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    lambda_values: Optional[List[PositiveFloat]] = None
    time_window: Optional[Tuple[float, float]] = None
    declared_c: NonNegativeFloat = 0.0
    gradient_threshold: PositiveFloat = 0.5
    tolerance_constant: PositiveFloat = settings.RESIDUAL_TOL_CONSTANT
    classifier_tol: PositiveFloat = settings.CLASSIFIER_TOL
    state_samples: int = Field(default=settings.STATE_SAMPLES, ge=2)
    time_samples: int = Field(default=5, ge=1)

    @field_validator("time_window")
    @classmethod
    def ordered_window(cls, v):
        if v is not None and not v[0] < v[1]:
            raise ValueError("time_window must satisfy start < end")
        return v


class CroccoSettings(StrictModel):
    profile: Literal["tanh", "exponential", "linear"] = "tanh"
    y_max: PositiveFloat = 3.0
    samples: int = Field(default=1000, ge=10)
    tolerance: PositiveFloat = 1e-3


class ExperimentConfig(StrictModel):
    """One experiment: what to solve, classify or certify, and where to write it"""
    kind: ExperimentKind
    domain: Optional[DomainSpec] = None
    counts: List[PositiveInt] = Field(default_factory=list)
    coefficients: CoefficientSpec = Field(default_factory=CoefficientSpec)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    epsilons: List[PositiveFloat] = Field(default_factory=list)
    initial: InitialCondition = Field(default_factory=InitialCondition)
    initial_v: Optional[InitialCondition] = None
    verification: VerificationSettings = Field(default_factory=VerificationSettings)
    crocco: CroccoSettings = Field(default_factory=CroccoSettings)
    output_dir: Optional[str] = None
    seed: int = 0

    @model_validator(mode="after")
    def kind_requirements(self):
        if self.kind == ExperimentKind.CROCCO_DEMO:
            return self
        if self.domain is None:
            raise ConfigValidationError("domain", f"required for {self.kind.value}")
        if len(self.counts) != self.domain.dimension:
            raise ConfigValidationError(
                "counts", f"expected {self.domain.dimension} entries, got {len(self.counts)}"
            )
        if self.kind == ExperimentKind.STABILITY_PAIR and self.initial_v is None:
            raise ConfigValidationError("initial_v", "required for stability_pair")
        if self.kind == ExperimentKind.VISCOSITY_SWEEP:
            if not self.epsilons:
                raise ConfigValidationError("epsilons", "required for viscosity_sweep")
            if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
                raise ConfigValidationError("epsilons", "must be strictly decreasing")
        return self


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

class ConditionReport(BaseModel):
    condition: ConditionId
    passed: bool
    worst_violation: float
    tolerance: float
    sample_count: int
    notes: str = ""


class ConditionSummary(BaseModel):
    conditions: List[ConditionReport]

    @property
    def all_passed(self) -> bool:
        return all(report.passed for report in self.conditions)


class BoundaryNodeRecord(BaseModel):
    index: List[int]
    coordinates: List[float]
    status: NodeStatus
    in_sigma_p: bool = False
    triggers: List[Trigger] = Field(default_factory=list)
    fichera_member: Optional[bool] = None
    normal: Optional[List[float]] = None
    f_dot_n: Optional[float] = None
    max_gradient_dot_n: Optional[float] = None
    max_a: Optional[float] = None


class BoundaryClassification(BaseModel):
    t: float
    tol: float
    nodes: List[BoundaryNodeRecord]
    counts: Dict[str, int]
    fichera_available: bool
    time_samples: List[float] = Field(default_factory=list)
    varied_over_time: bool = False
    union_indices: List[List[int]] = Field(default_factory=list)

    @property
    def sigma_p_indices(self) -> List[List[int]]:
        return [node.index for node in self.nodes if node.in_sigma_p]


class SupNormReport(BaseModel):
    times: List[float]
    sup_norms: List[float]
    generalized_bound: List[float]
    generalized_bound_holds: bool
    strict_bound_applicable: bool
    strict_bound_holds: Optional[bool] = None
    worst_excess: float
    slack: float


class EntropyEntry(BaseModel):
    k: float
    eta: Optional[float] = None
    lam: float
    residual: float
    dissipation: Optional[float] = None


class EntropyReport(BaseModel):
    k_values: List[float]
    eta_values: List[float]
    lambda_values: List[float]
    entries: List[EntropyEntry]
    min_residual: float
    tolerance: float
    passed: bool
    sign_collapse_gap: Optional[float] = None
    eta_convergence: List[float] = Field(default_factory=list)
    eta_convergence_monotone: Optional[bool] = None
    provenance: Dict[str, Any] = Field(default_factory=dict)


class StabilityReport(BaseModel):
    times: List[float]
    l1_distances: List[float]
    initial_distance: float
    final_distance: float
    ratio: Optional[float] = None
    c_declared: float
    c_fit: Optional[float] = None
    gronwall_holds: bool
    worst_gronwall_violation: float
    nonincreasing: bool
    passed: bool


class ComparisonEntry(BaseModel):
    lam: float
    total: float
    terms: Dict[str, float]


class ComparisonReport(BaseModel):
    entries: List[ComparisonEntry]
    boundary_decay: Dict[str, bool]


class SweepEntry(BaseModel):
    epsilon: float
    sup_norm: float
    tv_final: float
    tv_ratio: Optional[float] = None
    energy: float
    l1_to_next: Optional[float] = None


class SweepReport(BaseModel):
    entries: List[SweepEntry]
    cauchy_nonincreasing: bool
    energy_spread: Optional[float] = None
    tv_bounded: bool
    passed: bool


class JumpFlag(BaseModel):
    axis: int
    index: List[int]
    position: List[float]
    jump: float
    max_a: float


class JumpScanReport(BaseModel):
    t: float
    gradient_threshold: float
    flags: List[JumpFlag]


class CroccoReport(BaseModel):
    profile: str
    samples: int
    w_law_error: Optional[float] = None
    round_trip_error: float
    tolerance: float
    passed: bool


class RunManifest(BaseModel):
    run_id: str
    kind: Optional[str] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    versions: Dict[str, str] = Field(default_factory=dict)
    timings: Dict[str, float] = Field(default_factory=dict)
    files: List[str] = Field(default_factory=list)
    verdicts: Dict[str, bool] = Field(default_factory=dict)
    passed: bool = True
    exit_status: int = 0


# ---------------------------------------------------------------------------
# Job service
# ---------------------------------------------------------------------------

class JobResponse(BaseModel):
    """Response for job creation"""
    job_id: str
    message: str = "Job created successfully"


class JobStatusResponse(BaseModel):
    """Response for job status query"""
    job_id: str
    status: JobStatus
    progress: int = Field(ge=0, le=100)
    message: str = ""
    kind: Optional[str] = None
    passed: Optional[bool] = None
    exit_status: Optional[int] = None
    created_at: Optional[str] = None
    completed_at: Optional[str] = None


class ErrorResponse(BaseModel):
    """Standard error response"""
    detail: str
    error_code: Optional[str] = None
    context: Dict[str, Any] = Field(default_factory=dict)
