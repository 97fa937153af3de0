"""
Exact stochastic simulation of the individual-based model.
"""

from .base import (
    CacheCoherenceError,
    EventKind,
    EventRecord,
    MassBlowup,
    NegativeRateError,
    PopulationExtinct,
    SimulationAbort,
)
from .kernel import HAVE_NUMBA
from .simulate import (
    EventRates,
    StopRules,
    Trajectory,
    event_rates,
    init_monomorphic,
    inject_mutant,
    invasion_threshold,
    invasion_trial,
    make_state,
    mass_bound,
    run,
    step,
)
from .state import PopulationState

__all__ = [
    "CacheCoherenceError",
    "EventKind",
    "EventRecord",
    "MassBlowup",
    "NegativeRateError",
    "PopulationExtinct",
    "SimulationAbort",
    "HAVE_NUMBA",
    "EventRates",
    "StopRules",
    "Trajectory",
    "event_rates",
    "init_monomorphic",
    "inject_mutant",
    "invasion_threshold",
    "invasion_trial",
    "make_state",
    "mass_bound",
    "run",
    "step",
    "PopulationState",
]
