"""
Kantorovich-Rubinstein norm of finite signed atomic measures on the line,
and sup-over-time distances between a simulated trajectory and the
deterministic reference path.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.ndimage import maximum_filter1d
from scipy.optimize import linprog

from .analytic import equilibrium_mass
from .errors import PreconditionError
from .ode import OdeSolution
from .schemas import ModelSpec

logger = logging.getLogger(__name__)

MERGE_TOL = 1e-12
BRUTEFORCE_STEP = 1e-3
BRUTEFORCE_MAX_ATOMS = 6


@dataclass(frozen=True)
class SignedAtomicMeasure:
    """Atoms with strictly increasing positions and nonzero weights"""
    positions: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_atoms(cls, atoms: Iterable[Tuple[float, float]]) -> "SignedAtomicMeasure":
        """Sort, merge coincident positions and drop zero weights"""
        pairs = sorted((float(x), float(w)) for x, w in atoms)
        positions, weights = [], []
        for x, w in pairs:
            if positions and x - positions[-1] <= MERGE_TOL:
                weights[-1] += w
            else:
                positions.append(x)
                weights.append(w)
        keep = [i for i, w in enumerate(weights) if w != 0.0]
        return cls(
            np.array([positions[i] for i in keep], dtype=np.float64),
            np.array([weights[i] for i in keep], dtype=np.float64),
        )

    @classmethod
    def point_mass(cls, x: float, weight: float) -> "SignedAtomicMeasure":
        return cls.from_atoms([(x, weight)])

    @classmethod
    def empty(cls) -> "SignedAtomicMeasure":
        return cls(np.zeros(0), np.zeros(0))

    def __len__(self) -> int:
        return int(self.positions.size)

    def __neg__(self) -> "SignedAtomicMeasure":
        return SignedAtomicMeasure(self.positions, -self.weights)

    def __sub__(self, other: "SignedAtomicMeasure") -> "SignedAtomicMeasure":
        return SignedAtomicMeasure.from_atoms(
            list(zip(self.positions, self.weights)) + list(zip(other.positions, -other.weights))
        )

    def scaled(self, factor: float) -> "SignedAtomicMeasure":
        return SignedAtomicMeasure.from_atoms(zip(self.positions, factor * self.weights))

    @property
    def atoms(self):
        return list(zip(self.positions.tolist(), self.weights.tolist()))

    @property
    def total_variation(self) -> float:
        return float(np.abs(self.weights).sum())


def kr_norm(mu: SignedAtomicMeasure) -> float:
    """
    sup { sum_i f(x_i) w_i : |f| <= 1, f 1-Lipschitz }.

    On the line it suffices to constrain adjacent atoms:
    |f_{i+1} - f_i| <= x_{i+1} - x_i. Solved with the HiGHS dual simplex.
    """
    n = len(mu)
    if n == 0:
        return 0.0
    w = mu.weights
    if n == 1:
        return float(abs(w[0]))
    gaps = np.diff(mu.positions)
    steps = np.zeros((n - 1, n))
    steps[np.arange(n - 1), np.arange(1, n)] = 1.0
    steps[np.arange(n - 1), np.arange(n - 1)] = -1.0
    A_ub = np.vstack([steps, -steps])
    b_ub = np.concatenate([gaps, gaps])
    result = linprog(-w, A_ub=A_ub, b_ub=b_ub, bounds=[(-1.0, 1.0)] * n, method='highs-ds')
    if not result.success:
        raise ArithmeticError(f"KR linear program failed: {result.message}")
    return max(-float(result.fun), 0.0)


def kr_distance(mu: SignedAtomicMeasure, nu: SignedAtomicMeasure) -> float:
    return kr_norm(mu - nu)


def kr_bruteforce(mu: SignedAtomicMeasure, step: float = BRUTEFORCE_STEP) -> float:
    """
    Exact maximum over test functions with values on the grid {-1, -1+step, ..., 1}.

    Dynamic programming along the atoms; a lower bound of kr_norm within
    about len(mu) * step.
    """
    n = len(mu)
    if n > BRUTEFORCE_MAX_ATOMS:
        raise PreconditionError(f"kr_bruteforce supports at most {BRUTEFORCE_MAX_ATOMS} atoms, got {n}")
    if n == 0:
        return 0.0
    levels = int(round(2.0 / step))
    grid = np.linspace(-1.0, 1.0, levels + 1)
    value = mu.weights[0] * grid
    for gap, weight in zip(np.diff(mu.positions), mu.weights[1:]):
        radius = min(int(np.floor(gap / step + 1e-9)), levels)
        best = maximum_filter1d(value, size=2 * radius + 1, mode='constant', cval=-np.inf)
        value = best + weight * grid
    return float(value.max())


# =====================================================================
# TRAJECTORY DISTANCES
# =====================================================================

def reference_measure(spec: ModelSpec, x_t: float) -> SignedAtomicMeasure:
    """zbar(x_t) delta_{x_t}"""
    return SignedAtomicMeasure.point_mass(x_t, equilibrium_mass(spec, x_t))


def distance_series(
    atoms: pd.DataFrame, K: int, cead: OdeSolution, spec: ModelSpec,
    times: Optional[np.ndarray] = None,
) -> pd.DataFrame:
    """
    KR distance between count/K-weighted atoms and zbar(x_t) delta_{x_t} at each sample time.

    Args:
        atoms: Frame with columns t, trait, count
        K: Carrying-capacity scale
        cead: Reference path; interpolated linearly at the sample times
        spec: Model used for zbar
        times: Sample times (default: the distinct times in atoms); times
            absent from atoms are compared against the zero measure

    Returns:
        DataFrame with columns t, x, distance
    """
    if times is None:
        times = np.unique(atoms["t"].to_numpy())
    groups = {t: frame for t, frame in atoms.groupby("t", sort=True)}
    records = []
    for t in times:
        frame = groups.get(t)
        if frame is None:
            measure = SignedAtomicMeasure.empty()
        else:
            measure = SignedAtomicMeasure.from_atoms(
                zip(frame["trait"].to_numpy(), frame["count"].to_numpy() / K)
            )
        x_t = float(cead.value_at(t)[0])
        records.append((float(t), x_t, kr_distance(measure, reference_measure(spec, x_t))))
    return pd.DataFrame(records, columns=["t", "x", "distance"])


def traj_sup_distance(traj, cead: OdeSolution, spec: ModelSpec) -> float:
    """max over the trajectory's sample times of the KR distance to zbar(x_t) delta_{x_t}"""
    series = distance_series(traj.atoms, traj.K, cead, spec, times=traj.times)
    if series.empty:
        return 0.0
    return float(series["distance"].max())
