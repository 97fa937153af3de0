"""
Configuration and Experiment Plan Schema

The JSON configuration document is strict: unknown keys and non-finite
numbers are rejected. Its top-level keys are the model keys of ModelSpec
plus an optional "experiment" section and a "seed".
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .model import ModelSpec, ScalingTriple, default_schedule
from .reports import ExperimentKind

DEFAULT_TSS_SIGMAS = [0.04, 0.02, 0.01]


class ExperimentSettings(BaseModel):
    """Kind-specific experiment keys of the configuration document"""
    model_config = ConfigDict(extra='forbid', allow_inf_nan=False, frozen=True)

    kind: ExperimentKind
    name: str = Field(default="experiment", pattern=r'^[A-Za-z0-9_.-]+$')

    # Schedules
    schedule: Optional[List[ScalingTriple]] = Field(
        None,
        description="Explicit scaling triples (ibm-cead, invasion-mc)"
    )
    K_values: Optional[List[int]] = Field(
        None,
        description="Generate the schedule from K values with the default scaling laws"
    )
    sigma_exponent: float = Field(0.3, gt=0, description="sigma_K = K^-sigma_exponent")
    u_prefactor: float = Field(0.1, gt=0, description="u_K = u_prefactor * sigma_K^u_sigma_power / (K ln K)")
    u_sigma_power: float = Field(1.2, gt=0)
    sigmas: Optional[List[float]] = Field(None, description="Mutation scales for tss-cead")

    # Replication and output
    replicates: int = Field(20, ge=1)
    horizon: float = Field(1.0, gt=0, description="Horizon in rescaled time")
    grid_points: int = Field(101, ge=2, description="Output grid size on [0, horizon]")
    dt: float = Field(1e-3, gt=0, description="CEAD integration step")

    # Invasion parameters
    epsilon: float = Field(1.0, gt=0, description="Invasion threshold is ceil(epsilon*sigma*K)")
    slack: float = Field(1.0, ge=0, description="Resident-mass slack M of the invasion band")
    h: int = Field(1, description="Mutant jump for invasion-mc")
    trials: int = Field(10_000, ge=1, description="Trials per point (invasion-mc, oracle-suite)")
    chunks: int = Field(16, ge=1, description="Fixed trial chunks so results do not depend on worker count")
    frozen_resident: bool = Field(False, description="Freeze the resident field in invasion-mc")

    @model_validator(mode='after')
    def check_schedule_source(self):
        if self.schedule is not None and self.K_values is not None:
            raise ValueError("give either 'schedule' or 'K_values', not both")
        if self.kind == ExperimentKind.TSS_CEAD and self.sigmas is not None:
            if not self.sigmas or any(not 0 < s <= 1 for s in self.sigmas):
                raise ValueError("sigmas must be a non-empty list in (0, 1]")
        if self.kind == ExperimentKind.IBM_CEAD and self.schedule is None and self.K_values is None:
            raise ValueError("ibm-cead needs 'schedule' or 'K_values'")
        return self


class Config(ModelSpec):
    """Top-level configuration document"""

    experiment: Optional[ExperimentSettings] = None
    seed: int = Field(0, ge=0, lt=2 ** 64, description="Master seed (unsigned 64-bit)")

    def model_spec(self) -> ModelSpec:
        """The model part of the document"""
        return ModelSpec(
            space=self.space,
            rates=self.rates,
            kernel=self.kernel,
            x0=self.x0,
            scaling=self.scaling,
        )


class ExperimentPlan(BaseModel):
    """
    Fully resolved experiment: settings, model and concrete schedule.
    """
    model_config = ConfigDict(frozen=True)

    settings: ExperimentSettings
    spec: ModelSpec
    master_seed: int = Field(..., ge=0, lt=2 ** 64)
    schedule: List[ScalingTriple] = Field(default_factory=list)
    sigmas: List[float] = Field(default_factory=list)

    @property
    def kind(self) -> ExperimentKind:
        return self.settings.kind

    @property
    def name(self) -> str:
        return self.settings.name

    @property
    def replicates(self) -> int:
        return self.settings.replicates

    @classmethod
    def from_config(cls, config: Config) -> "ExperimentPlan":
        """Resolve the experiment section of a configuration"""
        if config.experiment is None:
            raise ValueError("configuration has no 'experiment' section")
        settings = config.experiment
        if settings.schedule is not None:
            schedule = list(settings.schedule)
        elif settings.K_values is not None:
            schedule = default_schedule(
                settings.K_values,
                alpha=config.scaling.alpha,
                sigma_exponent=settings.sigma_exponent,
                u_prefactor=settings.u_prefactor,
                u_sigma_power=settings.u_sigma_power,
            )
        else:
            schedule = [config.scaling]
        sigmas = list(settings.sigmas) if settings.sigmas is not None else list(DEFAULT_TSS_SIGMAS)
        return cls(
            settings=settings,
            spec=config.model_spec(),
            master_seed=config.seed,
            schedule=schedule,
            sigmas=sigmas,
        )
