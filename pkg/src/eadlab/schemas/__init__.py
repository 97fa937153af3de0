"""
Schemas module for eadlab model specifications, plans and reports.
"""

from .model import (
    ModelSpec,
    MutationKernel,
    RateFunctions,
    ScalingTriple,
    TraitSpace,
    default_schedule,
)
from .plan import Config, ExperimentPlan, ExperimentSettings
from .reports import (
    Bounds,
    CheckResult,
    CoexistenceVerdict,
    ExperimentKind,
    ExperimentReport,
    ExperimentRow,
    IbmCeadRow,
    InvasionRow,
    OracleRow,
    PathPoint,
    ScalingReport,
    TrendVerdict,
    TssCeadRow,
    ValidationReport,
    dict_to_report,
    report_to_dict,
)

__all__ = [
    "ModelSpec",
    "MutationKernel",
    "RateFunctions",
    "ScalingTriple",
    "TraitSpace",
    "default_schedule",
    "Config",
    "ExperimentPlan",
    "ExperimentSettings",
    "Bounds",
    "CheckResult",
    "CoexistenceVerdict",
    "ExperimentKind",
    "ExperimentReport",
    "ExperimentRow",
    "IbmCeadRow",
    "InvasionRow",
    "OracleRow",
    "PathPoint",
    "ScalingReport",
    "TrendVerdict",
    "TssCeadRow",
    "ValidationReport",
    "dict_to_report",
    "report_to_dict",
]
