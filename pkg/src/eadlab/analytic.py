"""
Closed-form quantities of the deterministic limit: monomorphic equilibrium,
invasion fitness, fitness gradient, coexistence test, the canonical-equation
drift and first-order invasion probabilities.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .exprdsl import ExprDomainError, eval_d, eval_grid
from .schemas import CoexistenceVerdict, ModelSpec

logger = logging.getLogger(__name__)

COEXISTENCE_TOL = 1e-10


@dataclass(frozen=True)
class FitnessProfile:
    """Equilibrium mass and fitness gradient of a monomorphic resident"""
    x: float
    zbar: float
    d1f: float


def equilibrium_mass(spec: ModelSpec, x: float) -> float:
    """zbar(x) = (b(x) - d(x)) / c(x, x)"""
    rates = spec.rates
    self_competition = rates.competition(x, x)
    if self_competition <= 0.0:
        raise ExprDomainError(f"c({x!r}, {x!r}) = {self_competition!r} is not positive")
    return (rates.birth(x) - rates.death(x)) / self_competition


def equilibrium_mass_grid(spec: ModelSpec, xs: np.ndarray) -> np.ndarray:
    """Vectorised zbar on a grid (no positivity check)"""
    rates = spec.rates
    growth = eval_grid(rates.ast('b'), xs) - eval_grid(rates.ast('d'), xs)
    return growth / eval_grid(rates.ast('c'), xs, xs)


def invasion_fitness(spec: ModelSpec, y: float, x: float) -> float:
    """f(y, x) = b(y) - d(y) - c(y, x) zbar(x)"""
    rates = spec.rates
    return rates.birth(y) - rates.death(y) - rates.competition(y, x) * equilibrium_mass(spec, x)


def fitness_gradient(spec: ModelSpec, x: float) -> float:
    """d1f(x, x) = b'(x) - d'(x) - d1c(x, x) zbar(x), by forward-mode differentiation"""
    rates = spec.rates
    _, db = eval_d(rates.ast('b'), x)
    _, dd = eval_d(rates.ast('d'), x)
    _, dc = eval_d(rates.ast('c'), x, x, seed='x')
    return db - dd - dc * equilibrium_mass(spec, x)


def fitness_profile(spec: ModelSpec, x: float) -> FitnessProfile:
    return FitnessProfile(x=x, zbar=equilibrium_mass(spec, x), d1f=fitness_gradient(spec, x))


def coexistence_check(
    spec: ModelSpec, x: float, y: float, tol: float = COEXISTENCE_TOL
) -> CoexistenceVerdict:
    """
    Classify the two-trait competition by the signs of the invasion fitnesses.

    Either fitness within +/- tol of zero is degenerate. Mutual
    non-invasion (both fitnesses negative) is also reported as degenerate
    since neither trait displaces the other from every initial state.
    """
    if x == y:
        raise PreconditionError("coexistence_check needs distinct traits")
    f_yx = invasion_fitness(spec, y, x)
    f_xy = invasion_fitness(spec, x, y)
    if abs(f_yx) <= tol or abs(f_xy) <= tol:
        return CoexistenceVerdict.DEGENERATE
    if f_yx > tol and f_xy > tol:
        return CoexistenceVerdict.COEXIST
    if f_yx > tol and f_xy < -tol:
        return CoexistenceVerdict.Y_EXCLUDES_X
    if f_xy > tol and f_yx < -tol:
        return CoexistenceVerdict.X_EXCLUDES_Y
    logger.debug(f"Mutual non-invasion for x={x}, y={y}")
    return CoexistenceVerdict.DEGENERATE


def _drift_terms(spec: ModelSpec, x: float):
    profile = fitness_profile(spec, x)
    slope = spec.rates.mutation(x) * profile.zbar * profile.d1f
    offsets = spec.kernel.offsets.astype(np.float64)
    return slope, offsets, spec.kernel.weights_at(x)


def cead_rhs(spec: ModelSpec, x: float) -> float:
    """
    Canonical-equation drift sum_h h [h m(x) zbar(x) d1f(x, x)]_+ M(x, h).
    """
    slope, offsets, weights = _drift_terms(spec, x)
    return float(np.sum(offsets * np.maximum(offsets * slope, 0.0) * weights))


def classical_cead_rhs(spec: ModelSpec, x: float) -> float:
    """Half-variance drift (1/2) sum_h h^2 m zbar d1f M(x, h), equal to cead_rhs for symmetric kernels"""
    slope, offsets, weights = _drift_terms(spec, x)
    return float(0.5 * np.sum(offsets ** 2 * weights) * slope)


def invasion_prob_first_order(spec: ModelSpec, x: float, h: int) -> float:
    """
    First-order invasion probability per unit sigma: max(0, h d1f(x, x) / b(x)).
    """
    return max(0.0, h * fitness_gradient(spec, x) / spec.rates.birth(x))
