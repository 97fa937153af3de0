"""
Model validation.

Checks a ModelSpec against the regularity and positivity assumptions of
the individual-based model on a uniform grid, computes empirical rate
bounds, restricts the mutation kernel to jumps that stay in the trait
space and diagnoses scaling triples.
"""

import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from .analytic import equilibrium_mass_grid, fitness_gradient
from .errors import EadlabError, PreconditionError
from .exprdsl import ExprError, eval_d, eval_grid
from .schemas import (
    Bounds,
    CheckResult,
    ModelSpec,
    ScalingReport,
    ScalingTriple,
    ValidationReport,
)
from .schemas.model import CONSTANT_KERNEL_TOL, EXPRESSION_KERNEL_TOL

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 1001
DEFAULT_MARGINS = (0.5, 0.5)
BOUNDARY_TOL = 1e-12
PAIR_GRID_POINTS = 51
DERIVATIVE_PAIR_POINTS = 101


class ModelViolationError(EadlabError):
    """Raised when a trait visited during simulation violates the model assumptions"""

    def __init__(self, message: str, trait: Optional[float] = None):
        self.trait = trait
        super().__init__(message)


def _failure(name: str, message: str, x: Optional[float] = None,
             y: Optional[float] = None, value: Optional[float] = None,
             advisory: bool = False) -> CheckResult:
    return CheckResult(name=name, passed=False, advisory=advisory, witness_x=x,
                       witness_y=y, value=value, message=message)


def _guarded(name: str, check: Callable[[], CheckResult], advisory: bool = False) -> CheckResult:
    """Run a check, turning expression errors into a failed result"""
    try:
        return check()
    except ExprError as e:
        return _failure(name, f"expression error: {e}", advisory=advisory)


def empirical_bounds(spec: ModelSpec, grid_points: int = DEFAULT_GRID_POINTS) -> Bounds:
    """
    Rate bounds over the uniform grid (product grid for c).

    Raises:
        ExprDomainError: If any rate is undefined on the grid
    """
    if grid_points < 2:
        raise PreconditionError("grid_points must be at least 2")
    rates = spec.rates
    xs = spec.space.grid(grid_points)
    b = eval_grid(rates.ast('b'), xs)
    d = eval_grid(rates.ast('d'), xs)
    m = eval_grid(rates.ast('m'), xs)
    c = eval_grid(rates.ast('c'), xs[:, None], xs[None, :])
    zbar = (b - d) / np.diag(c)
    return Bounds(
        b_max=float(b.max()),
        b_min=float(b.min()),
        d_max=float(d.max()),
        c_max=float(c.max()),
        c_min=float(np.diag(c).min()),
        m_max=float(m.max()),
        zbar_max=float(zbar.max()),
        zbar_min=float(zbar.min()),
    )


def _check_bounds(spec: ModelSpec, xs: np.ndarray) -> CheckResult:
    rates = spec.rates
    for name in ('b', 'd'):
        values = eval_grid(rates.ast(name), xs)
        if values.min() < 0.0:
            i = int(values.argmin())
            return _failure("bounds", f"{name}(x) < 0", x=float(xs[i]), value=float(values[i]))
    c = eval_grid(rates.ast('c'), xs[:, None], xs[None, :])
    if c.min() < 0.0:
        i, j = np.unravel_index(int(c.argmin()), c.shape)
        return _failure("bounds", "c(x, y) < 0", x=float(xs[i]), y=float(xs[j]), value=float(c[i, j]))
    return CheckResult(name="bounds", passed=True, value=float(c.max()))


def _check_growth(spec: ModelSpec, xs: np.ndarray) -> CheckResult:
    rates = spec.rates
    growth = eval_grid(rates.ast('b'), xs) - eval_grid(rates.ast('d'), xs)
    i = int(growth.argmin())
    if growth[i] <= 0.0:
        return _failure("b-d>0", "b(x) - d(x) <= 0", x=float(xs[i]), value=float(growth[i]))
    return CheckResult(name="b-d>0", passed=True, witness_x=float(xs[i]), value=float(growth[i]))


def _check_self_competition(spec: ModelSpec, xs: np.ndarray) -> CheckResult:
    diagonal = eval_grid(spec.rates.ast('c'), xs, xs)
    i = int(diagonal.argmin())
    if diagonal[i] <= 0.0:
        return _failure("c(x,x)>=c_min>0", "c(x, x) <= 0", x=float(xs[i]), value=float(diagonal[i]))
    return CheckResult(name="c(x,x)>=c_min>0", passed=True, witness_x=float(xs[i]),
                       value=float(diagonal[i]))


def _check_mutation_probability(spec: ModelSpec, xs: np.ndarray) -> CheckResult:
    m = eval_grid(spec.rates.ast('m'), xs)
    bad = np.flatnonzero((m < 0.0) | (m > 1.0))
    if bad.size:
        i = int(bad[0])
        return _failure("0<=m<=1", "m(x) outside [0, 1]", x=float(xs[i]), value=float(m[i]))
    return CheckResult(name="0<=m<=1", passed=True)


def _check_kernel(spec: ModelSpec, xs: np.ndarray) -> CheckResult:
    kernel = spec.kernel
    weights = kernel.weights_grid(xs)
    if weights.min() < 0.0:
        i = int(np.unravel_index(int(weights.argmin()), weights.shape)[0])
        return _failure("kernel", "negative kernel weight", x=float(xs[i]), value=float(weights.min()))
    tol = CONSTANT_KERNEL_TOL if kernel.is_constant else EXPRESSION_KERNEL_TOL
    error = np.abs(weights.sum(axis=1) - 1.0)
    i = int(error.argmax())
    if error[i] > tol:
        return _failure("kernel", "kernel weights do not sum to 1", x=float(xs[i]),
                        value=float(weights[i].sum()))
    return CheckResult(name="kernel", passed=True)


def _gradient_grid(spec: ModelSpec, xs: np.ndarray) -> np.ndarray:
    return np.array([fitness_gradient(spec, float(x)) for x in xs])


def _check_gradient(spec: ModelSpec, gradient: np.ndarray, xs: np.ndarray) -> CheckResult:
    i = int(np.abs(gradient).argmin())
    if gradient[i] == 0.0:
        return _failure("d1f(x,x)!=0", "evolutionary singularity", x=float(xs[i]), value=0.0)
    if not (np.all(gradient > 0.0) or np.all(gradient < 0.0)):
        flip = int(np.flatnonzero(np.sign(gradient) != np.sign(gradient[0]))[0])
        return _failure("d1f(x,x)!=0", "fitness gradient changes sign", x=float(xs[flip]),
                        value=float(gradient[flip]))
    return CheckResult(name="d1f(x,x)!=0", passed=True, witness_x=float(xs[i]),
                       value=float(abs(gradient[i])))


def _check_derivatives(spec: ModelSpec, xs: np.ndarray) -> CheckResult:
    """First derivatives finite on the grid (b, d, m on the grid, c on a coarser product grid)"""
    rates = spec.rates
    for name in ('b', 'd', 'm'):
        ast = rates.ast(name)
        for x in xs:
            eval_d(ast, float(x))
    coarse = spec.space.grid(min(len(xs), DERIVATIVE_PAIR_POINTS))
    ast = rates.ast('c')
    for x in coarse:
        for y in coarse:
            eval_d(ast, float(x), float(y), seed='x')
            eval_d(ast, float(x), float(y), seed='y')
    return CheckResult(name="derivatives-bounded", passed=True)


def _check_invasion_implies_fixation(spec: ModelSpec) -> CheckResult:
    """Advisory: no pair (x, y) may be mutually invasible"""
    name = "invasion-implies-fixation"
    rates = spec.rates
    xs = spec.space.grid(PAIR_GRID_POINTS)
    growth = eval_grid(rates.ast('b'), xs) - eval_grid(rates.ast('d'), xs)
    zbar = equilibrium_mass_grid(spec, xs)
    # fitness[i, j] = f(x_i, x_j)
    fitness = growth[:, None] - eval_grid(rates.ast('c'), xs[:, None], xs[None, :]) * zbar[None, :]
    mutual = (fitness > 0.0) & (fitness.T > 0.0)
    np.fill_diagonal(mutual, False)
    if mutual.any():
        i, j = np.argwhere(mutual)[0]
        return _failure(name, "mutually invasible pair", x=float(xs[j]), y=float(xs[i]),
                        value=float(fitness[i, j]), advisory=True)
    return CheckResult(name=name, passed=True, advisory=True)


def _check_initial_gradient(spec: ModelSpec) -> CheckResult:
    """Advisory: nonzero fitness gradient at the initial trait"""
    name = "d1f(x0,x0)!=0"
    gradient = fitness_gradient(spec, spec.x0)
    if gradient == 0.0:
        return _failure(name, "initial trait is an evolutionary singularity", x=spec.x0,
                        value=0.0, advisory=True)
    return CheckResult(name=name, passed=True, advisory=True, witness_x=spec.x0, value=gradient)


def validate_model(spec: ModelSpec, grid_points: int = DEFAULT_GRID_POINTS) -> ValidationReport:
    """
    Check positivity, boundedness, kernel normalisation and the fitness
    gradient on a uniform grid.

    Expression errors surface as failed checks. The report is a
    deterministic function of (spec, grid_points).

    Args:
        spec: Model specification
        grid_points: Number of uniform grid points on the trait space

    Returns:
        ValidationReport listing every check with its witness grid point
    """
    if grid_points < 2:
        raise PreconditionError("grid_points must be at least 2")
    xs = spec.space.grid(grid_points)
    report = ValidationReport(grid_points=grid_points)

    checks = [
        _guarded("bounds", lambda: _check_bounds(spec, xs)),
        _guarded("b-d>0", lambda: _check_growth(spec, xs)),
        _guarded("c(x,x)>=c_min>0", lambda: _check_self_competition(spec, xs)),
        _guarded("0<=m<=1", lambda: _check_mutation_probability(spec, xs)),
        _guarded("kernel", lambda: _check_kernel(spec, xs)),
    ]
    report.checks.extend(checks)

    basic_ok = all(check.passed for check in checks[:3])
    if basic_ok:
        try:
            gradient = _gradient_grid(spec, xs)
        except ExprError as e:
            report.checks.append(_failure("d1f(x,x)!=0", f"expression error: {e}"))
        else:
            report.checks.append(_check_gradient(spec, gradient, xs))
            report.min_abs_d1f = float(np.abs(gradient).min())
            if np.all(gradient > 0.0):
                report.d1f_sign = 1
            elif np.all(gradient < 0.0):
                report.d1f_sign = -1
        report.checks.append(_guarded("derivatives-bounded", lambda: _check_derivatives(spec, xs)))
        report.checks.append(_guarded("invasion-implies-fixation",
                                      lambda: _check_invasion_implies_fixation(spec), advisory=True))
        report.checks.append(_guarded("d1f(x0,x0)!=0", lambda: _check_initial_gradient(spec),
                                      advisory=True))
        try:
            report.bounds = empirical_bounds(spec, grid_points)
        except ExprError as e:
            logger.debug(f"No empirical bounds: {e}")
    else:
        for name in ("d1f(x,x)!=0", "derivatives-bounded"):
            report.checks.append(_failure(name, "skipped: rates fail basic checks"))

    for check in report.checks:
        if not check.passed:
            log = logger.warning if check.advisory else logger.info
            log(f"Check {check.name} failed: {check.message} (x={check.witness_x}, y={check.witness_y})")
    logger.info(f"Model validation {'passed' if report.passed else 'failed'} on {grid_points} points")
    return report


def check_trait(spec: ModelSpec, y: float) -> None:
    """
    Re-check the rate assumptions at a trait reached during simulation.

    Raises:
        ModelViolationError: If b, d, m or c(y, y) violate the assumptions at y
    """
    rates = spec.rates
    try:
        b, d, m, c = rates.birth(y), rates.death(y), rates.mutation(y), rates.competition(y, y)
    except ExprError as e:
        raise ModelViolationError(f"rates undefined at trait {y!r}: {e}", y) from e
    if b < 0.0 or d < 0.0:
        raise ModelViolationError(f"negative birth or death rate at trait {y!r}", y)
    if b - d <= 0.0:
        raise ModelViolationError(f"b - d <= 0 at trait {y!r}", y)
    if c <= 0.0:
        raise ModelViolationError(f"c(y, y) <= 0 at trait {y!r}", y)
    if not 0.0 <= m <= 1.0:
        raise ModelViolationError(f"m outside [0, 1] at trait {y!r}", y)


def admissible_kernel_at(
    spec: ModelSpec,
    x: float,
    sigma: Optional[float] = None,
    renormalize: bool = True,
) -> List[Tuple[int, float]]:
    """
    Kernel jumps h with x + sigma*h inside the trait space.

    Zero weights are dropped. With renormalize the remaining weights sum
    to 1; if every jump leaves the space the result is empty.

    Args:
        spec: Model specification
        x: Parent trait
        sigma: Mutation step, defaults to spec.scaling.sigma
        renormalize: Rescale the admissible weights to sum 1
    """
    if not spec.space.contains(x, BOUNDARY_TOL):
        raise PreconditionError(f"trait {x!r} outside the trait space")
    step = spec.scaling.sigma if sigma is None else sigma
    weights = spec.kernel.weights_at(x)
    if weights.min() < 0.0:
        raise ModelViolationError(f"negative kernel weight at trait {x!r}", x)
    lo, hi = spec.space.lo, spec.space.hi
    admissible = [
        (int(h), float(w))
        for h, w in zip(spec.kernel.offsets, weights)
        if w > 0.0 and lo - BOUNDARY_TOL <= x + step * h <= hi + BOUNDARY_TOL
    ]
    if not renormalize or not admissible:
        return admissible
    total = math.fsum(w for _, w in admissible)
    return [(h, w / total) for h, w in admissible]


def validate_scaling(
    t: ScalingTriple, margins: Tuple[float, float] = DEFAULT_MARGINS
) -> ScalingReport:
    """
    Finite-K diagnostics of the scaling regime.

    r1 = K^(-1/2+alpha)/sigma, r2 = sigma, r3 = exp(-K^alpha)/u and
    r4 = u K ln K / sigma^(1+alpha). The triple is regime-consistent iff
    r1 <= margins[0], r3 <= margins[0] and r4 <= margins[1].
    """
    if not isinstance(t, ScalingTriple):
        t = ScalingTriple.model_validate(t)
    if len(margins) != 2 or min(margins) <= 0:
        raise PreconditionError("margins must be two positive numbers")
    m1, m2 = float(margins[0]), float(margins[1])
    K, u, sigma, alpha = t.K, t.u, t.sigma, t.alpha
    r1 = K ** (-0.5 + alpha) / sigma
    r2 = sigma
    r3 = math.exp(-(K ** alpha)) / u
    r4 = u * K * math.log(K) / sigma ** (1.0 + alpha)
    violations = []
    if r1 > m1:
        violations.append("r1")
    if r3 > m1:
        violations.append("r3")
    if r4 > m2:
        violations.append("r4")
    report = ScalingReport(
        triple=t, r1=r1, r2=r2, r3=r3, r4=r4, margins=(m1, m2),
        regime_consistent=not violations, violations=violations,
    )
    if violations:
        logger.warning(f"Scaling triple K={K}, u={u}, sigma={sigma} violates {', '.join(violations)}")
    return report
