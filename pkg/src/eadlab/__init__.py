"""
EADLab: individual-based adaptive dynamics simulator and verifier

Simulates the birth-death-mutation-competition process of an evolving
population, integrates its deterministic limits (Lotka-Volterra systems
and the canonical equation of adaptive dynamics) and measures their
distance, backed by closed-form branching-process oracles.
"""

__version__ = "1.0.0"

from .errors import EadlabError, PreconditionError
from .schemas import ExperimentPlan, ExperimentReport, ModelSpec, ScalingTriple
from .config import ConfigError, RuntimeSettings, load_config
from .model import validate_model, validate_scaling
from .analytic import cead_rhs, equilibrium_mass, fitness_gradient, invasion_fitness
from .ode import integrate_cead, integrate_lv
from .tss import simulate_tss
from .metrics import SignedAtomicMeasure, kr_distance, kr_norm
from .harness import emit, run_plan

__all__ = [
    '__version__',
    'EadlabError',
    'PreconditionError',
    'ExperimentPlan',
    'ExperimentReport',
    'ModelSpec',
    'ScalingTriple',
    'ConfigError',
    'RuntimeSettings',
    'load_config',
    'validate_model',
    'validate_scaling',
    'cead_rhs',
    'equilibrium_mass',
    'fitness_gradient',
    'invasion_fitness',
    'integrate_cead',
    'integrate_lv',
    'simulate_tss',
    'SignedAtomicMeasure',
    'kr_distance',
    'kr_norm',
    'emit',
    'run_plan',
]
