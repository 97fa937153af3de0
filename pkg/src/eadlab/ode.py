"""
Deterministic integrators: Lotka-Volterra systems LV(n), the two-trait
interior equilibrium and the canonical equation with boundary stopping.

All integration is classical fixed-step fourth-order Runge-Kutta.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .analytic import cead_rhs
from .errors import PreconditionError
from .schemas import ModelSpec

logger = logging.getLogger(__name__)

NEGATIVE_CLAMP_TOL = 1e-12
SINGULAR_DET_TOL = 1e-14


class TerminalReason(str, Enum):
    """Why an integration stopped"""
    HORIZON = "horizon"
    BOUNDARY = "boundary"
    BLOWUP = "blowup"


@dataclass
class OdeSolution:
    """Sampled solution; states has shape (len(times), dimension)"""
    times: np.ndarray
    states: np.ndarray
    terminal_reason: TerminalReason = TerminalReason.HORIZON
    labels: List[str] = field(default_factory=list)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def value_at(self, t: float) -> np.ndarray:
        """Linear interpolation between samples (held constant outside the range)"""
        return np.array([
            np.interp(t, self.times, self.states[:, i]) for i in range(self.states.shape[1])
        ])

    def to_frame(self) -> pd.DataFrame:
        columns = self.labels or [f"z{i}" for i in range(self.states.shape[1])]
        frame = pd.DataFrame(self.states, columns=columns)
        frame.insert(0, "t", self.times)
        return frame


class EquilibriumStatus(str, Enum):
    INTERIOR = "interior"
    NO_INTERIOR = "no-interior"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class Lv2Equilibrium:
    """Interior equilibrium of LV(2, (x, y)) with its stability"""
    status: EquilibriumStatus
    z: Optional[Tuple[float, float]] = None
    stable: bool = False
    eigenvalues: Optional[Tuple[complex, complex]] = None


def _time_grid(T: float, dt: float) -> np.ndarray:
    """0, dt, 2dt, ... ending exactly at T (last step shortened if needed)"""
    if dt <= 0:
        raise PreconditionError("dt must be positive")
    if T < 0:
        raise PreconditionError("T must be nonnegative")
    steps = T / dt
    n = int(round(steps)) if abs(steps - round(steps)) < 1e-9 else int(math.ceil(steps))
    times = np.arange(n + 1, dtype=np.float64) * dt
    if n:
        times[-1] = T
    return times


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of an autonomous system"""
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lv_coefficients(spec: ModelSpec, traits: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Growth rates r_i = b - d and competition matrix C_ij = c(x_i, x_j)"""
    rates = spec.rates
    r = np.array([rates.birth(x) - rates.death(x) for x in traits])
    C = np.array([[rates.competition(x, y) for y in traits] for x in traits])
    return r, C


def integrate_lv(
    spec: ModelSpec, traits: Sequence[float], z0: Sequence[float], T: float, dt: float
) -> OdeSolution:
    """
    Integrate z_i' = z_i (b(x_i) - d(x_i) - sum_j c(x_i, x_j) z_j).

    A component pushed below zero by a step is clamped to 0 when its
    magnitude is under 1e-12; anything larger (or a non-finite state)
    ends the run with terminal_reason BLOWUP.
    """
    traits = [float(x) for x in traits]
    z = np.asarray(z0, dtype=np.float64)
    if not traits or z.shape != (len(traits),):
        raise PreconditionError("need one initial density per trait")
    if np.any(z < 0):
        raise PreconditionError("initial densities must be nonnegative")
    r, C = lv_coefficients(spec, traits)
    times = _time_grid(T, dt)

    def rhs(state: np.ndarray) -> np.ndarray:
        return state * (r - C @ state)

    states = np.empty((times.size, z.size))
    states[0] = z
    reason = TerminalReason.HORIZON
    last = 0
    for i in range(1, times.size):
        with np.errstate(all='ignore'):
            z = rk4_step(rhs, z, times[i] - times[i - 1])
        if not np.all(np.isfinite(z)) or np.any(z < -NEGATIVE_CLAMP_TOL):
            reason = TerminalReason.BLOWUP
            logger.warning(f"LV integration blew up at t={times[i]}")
            break
        z = np.maximum(z, 0.0)
        states[i] = z
        last = i
    labels = [f"z{i}" for i in range(len(traits))]
    return OdeSolution(times[:last + 1], states[:last + 1], reason, labels)


def lv2_equilibrium(spec: ModelSpec, x: float, y: float) -> Lv2Equilibrium:
    """
    Interior equilibrium of the two-trait system and its stability.

    Solves C z = r; the equilibrium is interior iff both components are
    positive and stable iff the Jacobian J_ij = -z_i C_ij has eigenvalues
    with negative real parts.
    """
    if x == y:
        raise PreconditionError("lv2_equilibrium needs distinct traits")
    r, C = lv_coefficients(spec, [x, y])
    if abs(np.linalg.det(C)) < SINGULAR_DET_TOL:
        return Lv2Equilibrium(EquilibriumStatus.DEGENERATE)
    z = np.linalg.solve(C, r)
    if np.any(z <= 0.0):
        return Lv2Equilibrium(EquilibriumStatus.NO_INTERIOR)
    jacobian = -z[:, None] * C
    eigenvalues = np.linalg.eigvals(jacobian)
    return Lv2Equilibrium(
        status=EquilibriumStatus.INTERIOR,
        z=(float(z[0]), float(z[1])),
        stable=bool(np.all(eigenvalues.real < 0.0)),
        eigenvalues=(complex(eigenvalues[0]), complex(eigenvalues[1])),
    )


def integrate_cead(spec: ModelSpec, x0: float, T: float, dt: float) -> OdeSolution:
    """
    Integrate x' = cead_rhs(x) with clamp-and-hold at the trait-space boundary.

    Stage evaluations are clamped into the trait space; once a step leaves
    [lo, hi] the state is set to the boundary and held to the horizon.
    """
    lo, hi = spec.space.lo, spec.space.hi
    if not lo <= x0 <= hi:
        raise PreconditionError(f"x0={x0} outside the trait space")
    times = _time_grid(T, dt)

    def rhs(state: np.ndarray) -> np.ndarray:
        return np.array([cead_rhs(spec, float(np.clip(state[0], lo, hi)))])

    states = np.empty((times.size, 1))
    states[0, 0] = x0
    x = np.array([float(x0)])
    reason = TerminalReason.HORIZON
    for i in range(1, times.size):
        if reason is TerminalReason.BOUNDARY:
            states[i] = x
            continue
        x = rk4_step(rhs, x, times[i] - times[i - 1])
        if x[0] < lo or x[0] > hi:
            x = np.array([lo if x[0] < lo else hi])
            reason = TerminalReason.BOUNDARY
            logger.debug(f"CEAD reached the boundary {x[0]} at t={times[i]}")
        states[i] = x
    return OdeSolution(times, states, reason, ["x"])
