"""
Report Schemas

Result records produced by model validation, scaling diagnostics and
experiments. Reports serialise through model_dump(mode='json') and parse
back with model_validate, field for field.
"""

from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from .model import ScalingTriple


# =====================================================================
# ENUMS
# =====================================================================

class ExperimentKind(str, Enum):
    """Experiment families run by the harness"""
    IBM_CEAD = "ibm-cead"
    TSS_CEAD = "tss-cead"
    INVASION_MC = "invasion-mc"
    ORACLE_SUITE = "oracle-suite"


class CoexistenceVerdict(str, Enum):
    """Outcome of the two-trait coexistence test"""
    COEXIST = "coexist"
    Y_EXCLUDES_X = "y-excludes-x"
    X_EXCLUDES_Y = "x-excludes-y"
    DEGENERATE = "degenerate"


# =====================================================================
# MODEL VALIDATION
# =====================================================================

class CheckResult(BaseModel):
    """Outcome of one named model check"""

    name: str = Field(..., description="Check identifier, e.g. 'b-d>0'")
    passed: bool
    advisory: bool = Field(
        default=False,
        description="Advisory checks are reported but do not fail the model"
    )
    witness_x: Optional[float] = Field(None, description="Grid point where the check failed")
    witness_y: Optional[float] = Field(None, description="Second coordinate for two-trait checks")
    value: Optional[float] = Field(None, description="Offending or extreme value")
    message: str = ""


class Bounds(BaseModel):
    """Empirical rate bounds over the validation grid"""

    b_max: float
    b_min: float
    d_max: float
    c_max: float
    c_min: float = Field(..., description="Minimum of c(x, x) on the grid")
    m_max: float
    zbar_max: float
    zbar_min: float


class ValidationReport(BaseModel):
    """Per-assumption pass/fail list for a model on a grid"""

    grid_points: int
    checks: List[CheckResult] = Field(default_factory=list)
    bounds: Optional[Bounds] = None
    min_abs_d1f: Optional[float] = Field(None, description="min over grid of |d1f(x, x)|")
    d1f_sign: int = Field(0, description="Uniform sign of d1f(x, x), 0 if mixed or unknown")

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if not check.advisory)

    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed and not check.advisory]

    def check(self, name: str) -> CheckResult:
        for item in self.checks:
            if item.name == name:
                return item
        raise KeyError(name)


class ScalingReport(BaseModel):
    """Scaling-regime ratios of a triple and the consistency flag"""

    triple: ScalingTriple
    r1: float = Field(..., description="K^(-1/2+alpha) / sigma")
    r2: float = Field(..., description="sigma / 1")
    r3: float = Field(..., description="exp(-K^alpha) / u")
    r4: float = Field(..., description="u K ln K / sigma^(1+alpha)")
    margins: Tuple[float, float]
    regime_consistent: bool
    violations: List[str] = Field(default_factory=list)


# =====================================================================
# EXPERIMENT ROWS
# =====================================================================

class _ScheduleColumns(BaseModel):
    """Scaling columns shared by rows tied to a schedule point"""
    model_config = ConfigDict(extra='forbid')

    index: int
    K: int
    u: float
    sigma: float
    alpha: float
    r1: float
    r2: float
    r3: float
    r4: float
    regime_consistent: bool


class IbmCeadRow(_ScheduleColumns):
    kind: Literal["ibm-cead"] = "ibm-cead"
    replicates: int
    completed: int
    aborted: int
    mean_distance: Optional[float]
    sd_distance: Optional[float]
    se_distance: Optional[float]
    mean_trait_end: Optional[float]
    se_trait_end: Optional[float]
    cead_trait_end: float
    mean_invasions: Optional[float]
    mean_mutations: Optional[float]
    mean_events: Optional[float]


class TssCeadRow(BaseModel):
    model_config = ConfigDict(extra='forbid')

    kind: Literal["tss-cead"] = "tss-cead"
    index: int
    sigma: float
    replicates: int
    mean_distance: float
    sd_distance: float
    se_distance: float
    mean_endpoint: float
    sd_endpoint: float
    cead_endpoint: float
    mean_jumps: float


class InvasionRow(_ScheduleColumns):
    kind: Literal["invasion-mc"] = "invasion-mc"
    h: int
    mutant_trait: float
    threshold: int
    trials: int
    successes: int
    success_rate: float
    se_rate: float
    oracle: float = Field(..., description="Branching hitting probability with the mutant's death rate")
    band_lo: float
    band_hi: float
    first_order: float = Field(..., description="First-order invasion probability times sigma")
    z_score: Optional[float]
    within_3se: bool


class OracleRow(BaseModel):
    model_config = ConfigDict(extra='forbid')

    kind: Literal["oracle-suite"] = "oracle-suite"
    index: int
    oracle: str
    parameters: str
    closed_form: float
    empirical: float
    se: float
    trials: int
    z_score: Optional[float]
    within_3se: bool


ExperimentRow = Annotated[
    Union[IbmCeadRow, TssCeadRow, InvasionRow, OracleRow],
    Field(discriminator='kind'),
]


class PathPoint(BaseModel):
    """Replicate average of a trait path at one output time, next to the reference path"""
    model_config = ConfigDict(extra='forbid')

    t: float
    reference: float = Field(..., description="Deterministic trait x_t")
    mean: Optional[float] = Field(None, description="Mean simulated trait over completed replicates")
    sd: Optional[float] = None
    mean_distance: Optional[float] = Field(None, description="Mean distance to the reference at t")


class TrendVerdict(BaseModel):
    """Monotonicity check of a statistic across the schedule"""

    statistic: str
    values: List[Optional[float]]
    strictly_decreasing: bool


class ExperimentReport(BaseModel):
    """Aggregated results of an experiment plan"""

    name: str
    kind: ExperimentKind
    master_seed: int
    replicates: int
    rows: List[ExperimentRow] = Field(default_factory=list)
    trend: Optional[TrendVerdict] = None
    paths: Dict[int, List[PathPoint]] = Field(
        default_factory=dict,
        description="Per schedule index, averaged trait paths on the output grid"
    )
    notes: List[str] = Field(default_factory=list)
    timings: Dict[int, float] = Field(
        default_factory=dict,
        exclude=True,
        description="Wall time per schedule point in seconds, kept out of serialised reports"
    )


def report_to_dict(report: ExperimentReport) -> Dict[str, Any]:
    """Convert a report to plain JSON-ready data"""
    return report.model_dump(mode='json')


def dict_to_report(data: Dict[str, Any]) -> ExperimentReport:
    """Rebuild a report from data produced by report_to_dict"""
    return ExperimentReport.model_validate(data)
