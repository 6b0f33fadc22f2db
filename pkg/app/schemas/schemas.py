from pydantic import BaseModel, Field, computed_field, field_validator, model_validator
from typing import Optional, Literal
from app.core.config import settings

# Relative slack on the admissibility window so that exact fractions such as
# b = 1/3, alpha = 0 (window value 1/9) survive binary rounding.
WINDOW_RTOL = 1e-12

CLAIM_IDS = (
    "a2-1d",
    "a2-2d",
    "energy-1d",
    "energy-2d",
    "testing-divergence",
    "lemma-c",
    "offtest-frac",
    "offtest-riesz",
)


def window_value(alpha: float, b: float) -> float:
    """((1-b)/2)^(2-alpha), the quantity the admissibility window constrains"""
    return ((1.0 - b) / 2.0) ** (2.0 - alpha)


def window_holds(alpha: float, b: float) -> bool:
    """Check 1/9 <= ((1-b)/2)^(2-alpha) <= 1/3 up to rounding slack"""
    value = window_value(alpha, b)
    return (1.0 / 9.0) * (1.0 - WINDOW_RTOL) <= value <= (1.0 / 3.0) * (1.0 + WINDOW_RTOL)


class ConstructionParams(BaseModel):
    """Global dial of the construction"""
    alpha: float = Field(0.0, ge=0.0, lt=2.0)
    b: float = Field(1.0 / 3.0, lt=1.0)
    depth_omega: int = Field(settings.DEFAULT_DEPTH_OMEGA, ge=1)
    depth_sigma: int = Field(settings.DEFAULT_DEPTH_SIGMA, ge=1)
    riesz_c: Optional[float] = Field(None, gt=0.0, lt=1.0)

    class Config:
        frozen = True

    @field_validator("b")
    @classmethod
    def check_b_floor(cls, value: float) -> float:
        if value < (1.0 / 3.0) * (1.0 - WINDOW_RTOL):
            raise ValueError("b must be at least 1/3")
        return value

    @model_validator(mode="after")
    def check_window(self):
        if not window_holds(self.alpha, self.b):
            raise ValueError(
                f"((1-b)/2)^(2-alpha) = {window_value(self.alpha, self.b):.6g} "
                f"is outside [1/9, 1/3] for alpha={self.alpha}, b={self.b}"
            )
        return self

    @computed_field
    @property
    def s0(self) -> float:
        return ((1.0 - self.b) / 2.0) ** (self.alpha - 2.0)

    @property
    def ratio(self) -> float:
        """Length ratio (1-b)/2 between consecutive generations"""
        return (1.0 - self.b) / 2.0

    @property
    def sigma_ratio(self) -> float:
        """Mass ratio 2/s0^2 between consecutive sigma generations"""
        return 2.0 / self.s0 ** 2

    def with_riesz_c(self, c: float) -> "ConstructionParams":
        """Copy with the Riesz placement constant filled in"""
        return self.model_copy(update={"riesz_c": c})


class WitnessSchema(BaseModel):
    """Interval or cube attaining a sampled supremum"""
    kind: Literal["interval", "cube"]
    center: list[float]
    size: float
    family_class: str
    pieces: Optional[int] = None


class SupSearchResult(BaseModel):
    """Outcome of a sampled supremum search"""
    value: float
    witness: WitnessSchema
    candidates: int
    family: str
    depth_sigma: int
    depth_omega: int
    tail_bound: float
    notes: dict[str, float] = {}


class CurvePoint(BaseModel):
    """One point of a divergence curve"""
    depth: float
    value: float


class DivergenceCurve(BaseModel):
    """Partial sums with a least-squares line"""
    kind: str
    points: list[CurvePoint]
    increments: list[float]
    slope: float
    intercept: float
    max_residual: float
    lower_bound_per_generation: float
    k0_term: float = 0.0


class EnergyTerm(BaseModel):
    """One piece of an energy decomposition"""
    center: list[float]
    size: float
    mass: float
    e_squared: float = Field(..., ge=0.0)
    poisson: float
    value: float = Field(..., ge=0.0)


class LemmaRow(BaseModel):
    """Normalized Riesz values for one c on the grid"""
    c: float
    c1: float
    c2: float
    admissible: bool


class LemmaResult(BaseModel):
    """Placement constant for the Riesz construction"""
    c: float
    c1: float
    c2: float
    k_max: int
    extremes_ordered: bool
    interior_fraction_ordered: float
    grid: list[LemmaRow]


class GammaSearchResult(BaseModel):
    """Height found for one off-testing target"""
    target: float
    kind: str = "frac"
    gamma: float
    value: float
    relative_error: float
    iterations: int
    bracket: list[float]


class ClaimResult(BaseModel):
    """One certified claim with its acceptance rule"""
    claim_id: str
    passed: bool
    rule: str
    values: dict[str, float] = {}
    bounds: dict[str, float] = {}
    curves: list[DivergenceCurve] = []
    witnesses: list[SupSearchResult] = []
    gammas: list[GammaSearchResult] = []
    lemma: Optional[LemmaResult] = None
    truncation: dict[str, float] = {}
    error: Optional[str] = None


class RunConfig(BaseModel):
    """Per-run configuration assembled from command line flags"""
    alpha: float = 0.0
    b: Optional[float] = None
    depth_omega: int = Field(settings.DEFAULT_DEPTH_OMEGA, ge=1)
    depth_sigma: int = Field(settings.DEFAULT_DEPTH_SIGMA, ge=3)
    k_max: Optional[int] = Field(None, ge=1)
    c_grid: list[float] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45]
    n_targets: list[float] = [1.0, 2.0, 4.0, 8.0]
    testing_k: Optional[int] = Field(None, ge=1)
    interval_samples: int = Field(128, ge=1)
    cube_samples: int = Field(12, ge=1)
    energy_samples: int = Field(8, ge=1)
    seed: int = settings.DEFAULT_SEED
    quadrature_tol: float = Field(settings.QUADRATURE_TOL, gt=0.0, lt=1.0)
    claims: list[str] = list(CLAIM_IDS)
    out: Optional[str] = None
    format: Literal["json", "csv"] = "json"
    threads: Optional[int] = None
    timings: bool = False

    @field_validator("claims")
    @classmethod
    def check_claims(cls, value: list[str]) -> list[str]:
        if not value:
            raise ValueError("at least one claim must be selected")
        unknown = [c for c in value if c not in CLAIM_IDS]
        if unknown:
            raise ValueError(f"unknown claims: {', '.join(unknown)}")
        return sorted(set(value), key=CLAIM_IDS.index)

    @field_validator("n_targets")
    @classmethod
    def check_targets(cls, value: list[float]) -> list[float]:
        if not value or any(n <= 0 for n in value):
            raise ValueError("n_targets must be a nonempty list of positive numbers")
        return sorted(value)

    @field_validator("c_grid")
    @classmethod
    def check_grid(cls, value: list[float]) -> list[float]:
        if not value or any(not 0.0 < c < 1.0 for c in value):
            raise ValueError("c grid values must lie in (0, 1)")
        return value

    @model_validator(mode="after")
    def check_depths(self):
        # unset generation counts default to 10, capped by what the depths resolve
        if self.k_max is None:
            self.k_max = max(1, min(10, self.depth_omega - 4))
        if self.testing_k is None:
            self.testing_k = min(10, self.depth_sigma)
        if self.k_max > self.depth_omega - 4:
            raise ValueError("k_max must not exceed depth_omega - 4")
        if self.testing_k > self.depth_sigma:
            raise ValueError("testing depth must not exceed depth_sigma")
        return self


class Report(BaseModel):
    """Machine-readable record of one verification run"""
    schema_version: int = settings.SCHEMA_VERSION
    app_version: str = settings.APP_VERSION
    config: RunConfig
    params: ConstructionParams
    claims: list[ClaimResult]
    passed: bool
    timings: Optional[dict[str, float]] = None


class SweepEntry(BaseModel):
    """One row of a sweep summary table"""
    parameter: str
    value: float
    alpha: float
    b: Optional[float] = None
    s0: Optional[float] = None
    passed: bool
    error: Optional[str] = None
    constants: dict[str, float] = {}


class SweepReport(BaseModel):
    """Collection of reports over one swept parameter"""
    schema_version: int = settings.SCHEMA_VERSION
    parameter: str
    entries: list[SweepEntry]
    reports: list[Report]
    passed: bool


class SnapshotAtom(BaseModel):
    """Atom of a serialized one-dimensional measure"""
    x: float
    mass: float


class SnapshotRow(BaseModel):
    """Row layout of a serialized planar measure"""
    a_n: float
    height: float


class GenerationSummary(BaseModel):
    """Per-generation tree summary"""
    k: int
    count: int
    length: float
    first_center: float


class MeasureSnapshot(BaseModel):
    """Reproducibility snapshot written by the construct command"""
    schema_version: int = settings.SCHEMA_VERSION
    params: ConstructionParams
    placement: str
    depth: int = Field(..., ge=0)
    generations: list[GenerationSummary]
    atoms: list[SnapshotAtom]
    rows: list[SnapshotRow]
    tail_bound: float
