"""
Model Specification Schema

Pydantic models for the trait space, rate functions, mutation kernel and
scaling parameters of an individual-based adaptive-dynamics model.

Rate expressions are stored as source strings and compiled once at
validation time; a malformed expression fails validation with a location
such as ('rates', 'b') so callers can report a JSON pointer.
"""

from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from ..exprdsl import ExprAst, ExprError, eval_grid, evaluate, parse, variables

CONSTANT_KERNEL_TOL = 1e-12
EXPRESSION_KERNEL_TOL = 1e-9

STRICT = ConfigDict(extra='forbid', allow_inf_nan=False, frozen=True)


def _compile(source: str, allowed: frozenset) -> ExprAst:
    """Parse an expression and restrict its free variables (raises ValueError for pydantic)"""
    try:
        ast = parse(source)
    except ExprError as e:
        raise ValueError(str(e)) from e
    extra = variables(ast) - allowed
    if extra:
        raise ValueError(f"expression may only use {sorted(allowed)}, found {sorted(extra)}")
    return ast


_X_ONLY = frozenset({"x"})
_X_AND_Y = frozenset({"x", "y"})


# =====================================================================
# TRAIT SPACE
# =====================================================================

class TraitSpace(BaseModel):
    """Compact trait interval [lo, hi]"""
    model_config = STRICT

    lo: float = Field(..., description="Lower end of the trait interval")
    hi: float = Field(..., description="Upper end of the trait interval")

    @model_validator(mode='after')
    def check_order(self):
        if not self.lo < self.hi:
            raise ValueError(f"trait space needs lo < hi, got [{self.lo}, {self.hi}]")
        return self

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def grid(self, points: int) -> np.ndarray:
        """Uniform validation grid including both ends"""
        return np.linspace(self.lo, self.hi, points)


# =====================================================================
# RATE FUNCTIONS
# =====================================================================

class RateFunctions(BaseModel):
    """
    Birth b(x), death d(x), competition c(x, y) and mutation probability m(x).
    """
    model_config = STRICT

    b: str = Field(..., description="Per-capita birth rate, expression in x")
    d: str = Field(..., description="Per-capita natural death rate, expression in x")
    c: str = Field(..., description="Competition kernel, expression in x and y")
    m: str = Field(..., description="Mutation probability per birth, expression in x")

    _asts: Dict[str, ExprAst] = PrivateAttr(default_factory=dict)

    @field_validator('b', 'd', 'm')
    @classmethod
    def check_single_variable(cls, v: str) -> str:
        _compile(v, _X_ONLY)
        return v

    @field_validator('c')
    @classmethod
    def check_competition(cls, v: str) -> str:
        _compile(v, _X_AND_Y)
        return v

    def model_post_init(self, __context) -> None:
        self._asts = {
            'b': _compile(self.b, _X_ONLY),
            'd': _compile(self.d, _X_ONLY),
            'c': _compile(self.c, _X_AND_Y),
            'm': _compile(self.m, _X_ONLY),
        }

    def ast(self, name: str) -> ExprAst:
        return self._asts[name]

    def birth(self, x: float) -> float:
        return evaluate(self._asts['b'], x)

    def death(self, x: float) -> float:
        return evaluate(self._asts['d'], x)

    def competition(self, x: float, y: float) -> float:
        return evaluate(self._asts['c'], x, y)

    def mutation(self, x: float) -> float:
        return evaluate(self._asts['m'], x)


# =====================================================================
# MUTATION KERNEL
# =====================================================================

class MutationKernel(BaseModel):
    """
    Integer jump distribution on {-A, ..., A}.

    weights[i] is the probability of jump h = i - A. Entries are either
    numbers (a constant kernel) or expressions in x.
    """
    model_config = STRICT

    A: int = Field(..., ge=1, description="Maximum jump modulus")
    weights: List[Union[float, str]] = Field(
        ...,
        description="2A+1 weights for h = -A..A, numbers or expressions in x"
    )

    _asts: List[Optional[ExprAst]] = PrivateAttr(default_factory=list)

    @field_validator('weights')
    @classmethod
    def check_entries(cls, v):
        for entry in v:
            if isinstance(entry, str):
                _compile(entry, _X_ONLY)
            elif entry < 0:
                raise ValueError(f"kernel weights must be nonnegative, got {entry}")
        return v

    @model_validator(mode='after')
    def check_shape(self):
        if len(self.weights) != 2 * self.A + 1:
            raise ValueError(
                f"kernel with A={self.A} needs {2 * self.A + 1} weights, got {len(self.weights)}"
            )
        if self.is_constant:
            total = float(sum(self.weights))
            if abs(total - 1.0) > CONSTANT_KERNEL_TOL:
                raise ValueError(f"constant kernel weights sum to {total!r}, not 1")
        return self

    def model_post_init(self, __context) -> None:
        self._asts = [
            _compile(entry, _X_ONLY) if isinstance(entry, str) else None
            for entry in self.weights
        ]

    @property
    def is_constant(self) -> bool:
        return all(not isinstance(entry, str) for entry in self.weights)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.A, self.A + 1)

    def weights_at(self, x: float) -> np.ndarray:
        """Kernel weights M(x, h) for h = -A..A"""
        return np.array([
            entry if ast is None else evaluate(ast, x)
            for entry, ast in zip(self.weights, self._asts)
        ], dtype=np.float64)

    def weights_grid(self, xs: np.ndarray) -> np.ndarray:
        """Weights on a grid, shape (len(xs), 2A+1)"""
        xs = np.asarray(xs, dtype=np.float64)
        columns = [
            np.full(xs.shape, float(entry)) if ast is None else eval_grid(ast, xs)
            for entry, ast in zip(self.weights, self._asts)
        ]
        return np.stack(columns, axis=-1)


# =====================================================================
# SCALING
# =====================================================================

class ScalingTriple(BaseModel):
    """Population scale K, mutation probability scale u, mutation step sigma and exponent alpha"""
    model_config = STRICT

    K: int = Field(..., ge=1, description="Carrying-capacity scale")
    u: float = Field(..., gt=0, le=1, description="Mutation probability scale u_K")
    sigma: float = Field(..., gt=0, le=1, description="Mutation step scale sigma_K")
    alpha: float = Field(..., gt=0, lt=0.5, description="Regime exponent alpha")

    @property
    def time_scale(self) -> float:
        """Factor K*u*sigma^2 converting model time to rescaled time"""
        return self.K * self.u * self.sigma ** 2


def default_schedule(
    K_values: List[int],
    alpha: float,
    sigma_exponent: float = 0.3,
    u_prefactor: float = 0.1,
    u_sigma_power: float = 1.2,
) -> List[ScalingTriple]:
    """
    Scaling schedule sigma_K = K^-sigma_exponent, u_K = u_prefactor * sigma_K^u_sigma_power / (K ln K).
    """
    schedule = []
    for K in K_values:
        if K < 2:
            raise ValueError("default schedule needs K >= 2 (ln K > 0)")
        sigma = K ** (-sigma_exponent)
        u = u_prefactor * sigma ** u_sigma_power / (K * np.log(K))
        schedule.append(ScalingTriple(K=K, u=float(u), sigma=float(sigma), alpha=alpha))
    return schedule


# =====================================================================
# FULL MODEL
# =====================================================================

class ModelSpec(BaseModel):
    """
    Complete model: trait space, rates, mutation kernel, initial trait and scaling.

    Immutable once validated and safe to share with worker processes.
    """
    model_config = STRICT

    space: TraitSpace
    rates: RateFunctions
    kernel: MutationKernel
    x0: float = Field(..., description="Initial monomorphic trait")
    scaling: ScalingTriple

    @model_validator(mode='after')
    def check_initial_trait(self):
        if not self.space.contains(self.x0):
            raise ValueError(f"x0={self.x0} lies outside [{self.space.lo}, {self.space.hi}]")
        return self

    def with_scaling(self, scaling: ScalingTriple) -> "ModelSpec":
        """Copy of this spec under a different scaling triple"""
        return self.model_copy(update={'scaling': scaling})
