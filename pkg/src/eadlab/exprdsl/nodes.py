"""
AST node types for rate expressions.

Nodes are frozen dataclasses, so an ExprAst is immutable once parsed and
can be shared read-only between worker processes.
"""

from dataclasses import dataclass
from typing import FrozenSet, Union

VARIABLES = ("x", "y")
FUNCTIONS = ("neg", "exp", "log", "sin", "cos", "sqrt")
BINARY_OPS = ("+", "-", "*", "/", "^")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self) -> None:
        if self.name not in VARIABLES:
            raise ValueError(f"variable must be one of {VARIABLES}, got {self.name!r}")


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "ExprAst"

    def __post_init__(self) -> None:
        if self.op not in FUNCTIONS:
            raise ValueError(f"unknown unary op {self.op!r}")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExprAst"
    right: "ExprAst"

    def __post_init__(self) -> None:
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary op {self.op!r}")


ExprAst = Union[Const, Var, Unary, Binary]


def to_source(ast: ExprAst) -> str:
    """
    Print an AST back to source text.

    Output is fully parenthesised and uses repr() for constants, so
    parse(to_source(ast)) evaluates identically to ast.
    """
    if isinstance(ast, Const):
        text = repr(float(ast.value))
        return f"({text})" if ast.value < 0 else text
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Unary):
        inner = to_source(ast.operand)
        if ast.op == "neg":
            return f"(-{inner})"
        return f"{ast.op}({inner})"
    return f"({to_source(ast.left)} {ast.op} {to_source(ast.right)})"


def variables(ast: ExprAst) -> FrozenSet[str]:
    """Return the set of variable names used by an expression"""
    if isinstance(ast, Const):
        return frozenset()
    if isinstance(ast, Var):
        return frozenset((ast.name,))
    if isinstance(ast, Unary):
        return variables(ast.operand)
    return variables(ast.left) | variables(ast.right)


def depth(ast: ExprAst) -> int:
    """Height of the tree; leaves have depth 1"""
    if isinstance(ast, (Const, Var)):
        return 1
    if isinstance(ast, Unary):
        return 1 + depth(ast.operand)
    return 1 + max(depth(ast.left), depth(ast.right))
