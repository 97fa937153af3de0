"""
Rate-expression language: parser, AST and evaluators.
"""

from .base import (
    ExprDomainError,
    ExprError,
    ExprSyntaxError,
    UnboundVariableError,
    UnknownFunctionError,
    UnknownVariableError,
)
from .evaluate import DualValue, eval_d, eval_grid, evaluate
from .nodes import Binary, Const, ExprAst, Unary, Var, depth, to_source, variables
from .parser import NAMED_CONSTANTS, parse

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownFunctionError",
    "UnknownVariableError",
    "UnboundVariableError",
    "ExprDomainError",
    "ExprAst",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "DualValue",
    "parse",
    "evaluate",
    "eval_d",
    "eval_grid",
    "to_source",
    "variables",
    "depth",
    "NAMED_CONSTANTS",
]
