"""
Shared types and errors for the individual-based simulator.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from ..errors import EadlabError


class SimulationAbort(EadlabError):
    """
    Raised when a run stops before its horizon.

    The partially recorded trajectory is attached as .trajectory.
    """

    def __init__(self, message: str, trajectory: Any = None, time: Optional[float] = None):
        self.trajectory = trajectory
        self.time = time
        super().__init__(message)


class PopulationExtinct(SimulationAbort):
    """Raised when every individual has died"""
    pass


class MassBlowup(SimulationAbort):
    """Raised when the total mass exceeds the a priori bound 4*b_max/c_min"""
    pass


class CacheCoherenceError(EadlabError):
    """Raised when incrementally updated competition sums drift from a full recomputation"""
    pass


class NegativeRateError(EadlabError):
    """Raised when a computed event rate is negative"""

    def __init__(self, message: str, trait: Optional[float] = None):
        self.trait = trait
        super().__init__(message)


class EventKind(str, Enum):
    """Elementary events of the birth-death-mutation process"""
    CLONAL_BIRTH = "clonal-birth"
    MUTANT_BIRTH = "mutant-birth"
    DEATH = "death"


@dataclass(frozen=True)
class EventRecord:
    """One executed event; model (unrescaled) time"""
    time: float
    kind: EventKind
    parent_label: int
    parent_trait: float
    h: Optional[int] = None
    new_label: Optional[int] = None
    new_trait: Optional[float] = None
