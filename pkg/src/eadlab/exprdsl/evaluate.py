"""
Evaluation of rate expressions.

Three evaluators share the AST:

- evaluate: scalar binary64 evaluation
- eval_d: forward-mode derivative through DualValue
- eval_grid: vectorised numpy evaluation for validation grids

Every evaluator rejects NaN and infinite results with ExprDomainError.
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from .base import ExprDomainError, UnboundVariableError
from .nodes import Binary, Const, ExprAst, Unary, Var

logger = logging.getLogger(__name__)

Number = Union[float, "DualValue"]


class DualValue:
    """
    Dual number value + deriv*eps with eps^2 = 0.

    Arithmetic follows the chain rule so evaluating an expression on
    DualValue(x, 1.0) yields the exact derivative in x.
    """

    __slots__ = ("value", "deriv")

    def __init__(self, value: float, deriv: float = 0.0):
        self.value = float(value)
        self.deriv = float(deriv)

    def __repr__(self) -> str:
        return f"DualValue({self.value!r}, {self.deriv!r})"

    @staticmethod
    def lift(other: Number) -> "DualValue":
        return other if isinstance(other, DualValue) else DualValue(other, 0.0)

    def __add__(self, other: Number) -> "DualValue":
        other = DualValue.lift(other)
        return DualValue(self.value + other.value, self.deriv + other.deriv)

    __radd__ = __add__

    def __sub__(self, other: Number) -> "DualValue":
        other = DualValue.lift(other)
        return DualValue(self.value - other.value, self.deriv - other.deriv)

    def __rsub__(self, other: Number) -> "DualValue":
        return DualValue.lift(other) - self

    def __mul__(self, other: Number) -> "DualValue":
        other = DualValue.lift(other)
        return DualValue(
            self.value * other.value,
            self.deriv * other.value + self.value * other.deriv,
        )

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> "DualValue":
        other = DualValue.lift(other)
        if other.value == 0.0:
            raise ExprDomainError("division by zero")
        quotient = self.value / other.value
        return DualValue(quotient, (self.deriv - quotient * other.deriv) / other.value)

    def __rtruediv__(self, other: Number) -> "DualValue":
        return DualValue.lift(other) / self

    def __neg__(self) -> "DualValue":
        return DualValue(-self.value, -self.deriv)

    def __pow__(self, other: Number) -> "DualValue":
        other = DualValue.lift(other)
        value = _checked_pow(self.value, other.value)
        if other.deriv == 0.0:
            # constant exponent: power rule, valid for negative bases too
            if self.deriv == 0.0:
                return DualValue(value, 0.0)
            slope = other.value * _checked_pow(self.value, other.value - 1.0)
            return DualValue(value, slope * self.deriv)
        if self.value <= 0.0:
            raise ExprDomainError("variable exponent requires a positive base")
        deriv = value * (
            other.deriv * math.log(self.value) + other.value * self.deriv / self.value
        )
        return DualValue(value, deriv)

    def __rpow__(self, other: Number) -> "DualValue":
        return DualValue.lift(other) ** self

    def exp(self) -> "DualValue":
        try:
            value = math.exp(self.value)
        except OverflowError as e:
            raise ExprDomainError(f"exp overflow at {self.value!r}") from e
        return DualValue(value, value * self.deriv)

    def log(self) -> "DualValue":
        if self.value <= 0.0:
            raise ExprDomainError(f"log of non-positive value {self.value!r}")
        return DualValue(math.log(self.value), self.deriv / self.value)

    def sin(self) -> "DualValue":
        return DualValue(math.sin(self.value), math.cos(self.value) * self.deriv)

    def cos(self) -> "DualValue":
        return DualValue(math.cos(self.value), -math.sin(self.value) * self.deriv)

    def sqrt(self) -> "DualValue":
        if self.value < 0.0:
            raise ExprDomainError(f"sqrt of negative value {self.value!r}")
        root = math.sqrt(self.value)
        if self.deriv == 0.0:
            return DualValue(root, 0.0)
        if root == 0.0:
            raise ExprDomainError("sqrt is not differentiable at 0")
        return DualValue(root, self.deriv / (2.0 * root))


def _checked_pow(base: float, exponent: float) -> float:
    try:
        return math.pow(base, exponent)
    except (ValueError, ZeroDivisionError) as e:
        raise ExprDomainError(f"{base!r} ^ {exponent!r} is undefined") from e
    except OverflowError as e:
        raise ExprDomainError(f"{base!r} ^ {exponent!r} overflows") from e


def _scalar_unary(op: str, value: float) -> float:
    if op == "neg":
        return -value
    if op == "exp":
        try:
            return math.exp(value)
        except OverflowError as e:
            raise ExprDomainError(f"exp overflow at {value!r}") from e
    if op == "log":
        if value <= 0.0:
            raise ExprDomainError(f"log of non-positive value {value!r}")
        return math.log(value)
    if op == "sqrt":
        if value < 0.0:
            raise ExprDomainError(f"sqrt of negative value {value!r}")
        return math.sqrt(value)
    if op == "sin":
        return math.sin(value)
    return math.cos(value)


def _scalar_binary(op: str, left: float, right: float) -> float:
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if right == 0.0:
            raise ExprDomainError("division by zero")
        return left / right
    return _checked_pow(left, right)


def _lookup(name: str, x: Number, y: Optional[Number]) -> Number:
    if name == "x":
        return x
    if y is None:
        raise UnboundVariableError(name)
    return y


def _walk_scalar(ast: ExprAst, x: float, y: Optional[float]) -> float:
    if isinstance(ast, Const):
        return ast.value
    if isinstance(ast, Var):
        return _lookup(ast.name, x, y)
    if isinstance(ast, Unary):
        return _scalar_unary(ast.op, _walk_scalar(ast.operand, x, y))
    return _scalar_binary(ast.op, _walk_scalar(ast.left, x, y), _walk_scalar(ast.right, x, y))


def _walk_dual(ast: ExprAst, x: DualValue, y: Optional[DualValue]) -> DualValue:
    if isinstance(ast, Const):
        return DualValue(ast.value, 0.0)
    if isinstance(ast, Var):
        return _lookup(ast.name, x, y)
    if isinstance(ast, Unary):
        operand = _walk_dual(ast.operand, x, y)
        if ast.op == "neg":
            return -operand
        return getattr(operand, ast.op)()
    left = _walk_dual(ast.left, x, y)
    right = _walk_dual(ast.right, x, y)
    if ast.op == "+":
        return left + right
    if ast.op == "-":
        return left - right
    if ast.op == "*":
        return left * right
    if ast.op == "/":
        return left / right
    return left ** right


def _require_finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise ExprDomainError(f"{what} is not finite ({value!r})")
    return value


def evaluate(ast: ExprAst, x: float, y: Optional[float] = None) -> float:
    """
    Evaluate an expression in binary64.

    Raises:
        UnboundVariableError: If the expression uses y and y is None
        ExprDomainError: On log/sqrt/division domain violations or a non-finite result
    """
    value = _walk_scalar(ast, float(x), None if y is None else float(y))
    return _require_finite(value, "expression value")


def eval_d(
    ast: ExprAst, x: float, y: Optional[float] = None, seed: str = "x"
) -> Tuple[float, float]:
    """
    Evaluate an expression and its exact derivative with respect to seed.

    Args:
        ast: Parsed expression
        x: Value bound to x
        y: Value bound to y (optional)
        seed: "x" or "y", the variable to differentiate by

    Returns:
        (value, derivative)
    """
    if seed not in ("x", "y"):
        raise ValueError(f"seed must be 'x' or 'y', got {seed!r}")
    if seed == "y" and y is None:
        raise UnboundVariableError("y")
    dx = DualValue(x, 1.0 if seed == "x" else 0.0)
    dy = None if y is None else DualValue(y, 1.0 if seed == "y" else 0.0)
    result = _walk_dual(ast, dx, dy)
    return (
        _require_finite(result.value, "expression value"),
        _require_finite(result.deriv, "derivative"),
    )


def _checked_grid(values: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    bad = np.flatnonzero(~np.isfinite(np.broadcast_to(values, shape)))
    if bad.size:
        index = int(bad[0])
        raise ExprDomainError(f"non-finite value at grid point {index}", index=index)
    return values


def _walk_grid(ast: ExprAst, xs: np.ndarray, ys: Optional[np.ndarray], shape: Tuple[int, ...]) -> np.ndarray:
    if isinstance(ast, Const):
        return np.asarray(ast.value, dtype=np.float64)
    if isinstance(ast, Var):
        return _lookup(ast.name, xs, ys)
    if isinstance(ast, Unary):
        operand = _walk_grid(ast.operand, xs, ys, shape)
        if ast.op == "neg":
            return -operand
        return _checked_grid(getattr(np, ast.op)(operand), shape)
    left = _walk_grid(ast.left, xs, ys, shape)
    right = _walk_grid(ast.right, xs, ys, shape)
    if ast.op == "+":
        values = left + right
    elif ast.op == "-":
        values = left - right
    elif ast.op == "*":
        values = left * right
    elif ast.op == "/":
        values = left / right
    else:
        values = np.power(left, right)
    return _checked_grid(values, shape)


def eval_grid(ast: ExprAst, xs, ys=None) -> np.ndarray:
    """
    Vectorised evaluation over arrays of x (and y) values.

    xs and ys broadcast against each other, so passing a column and a row
    evaluates a product grid. A non-finite value in any subexpression raises
    ExprDomainError whose index is the flat index of the first offending
    point, so 1/(1/x) fails at x = 0 just as the scalar evaluator does.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = None if ys is None else np.asarray(ys, dtype=np.float64)
    shape = xs.shape if ys is None else np.broadcast_shapes(xs.shape, ys.shape)
    with np.errstate(all="ignore"):
        values = _walk_grid(ast, xs, ys, shape)
    return np.broadcast_to(values, shape).astype(np.float64, copy=True)
