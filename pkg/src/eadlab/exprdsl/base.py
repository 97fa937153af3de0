"""
Error hierarchy for the rate-expression language.

Syntax-level errors carry the byte offset into the source text so the
config loader can point at the offending character.
"""

from typing import Optional

from ..errors import EadlabError


class ExprError(EadlabError):
    """Base exception for expression-related errors"""
    pass


class ExprSyntaxError(ExprError):
    """Raised when the source text does not match the grammar"""

    def __init__(self, message: str, offset: int, expected: Optional[str] = None):
        self.offset = offset
        self.expected = expected
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)


class UnknownFunctionError(ExprSyntaxError):
    """Raised for a call to a function outside exp, log, sin, cos, sqrt, neg"""

    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown function '{name}'", offset)


class UnknownVariableError(ExprSyntaxError):
    """Raised for an identifier that is not x, y, pi or e"""

    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown variable '{name}'", offset)


class UnboundVariableError(ExprError):
    """Raised when an expression uses y but no y value was supplied"""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable '{name}' has no binding")


class ExprDomainError(ExprError):
    """Raised when evaluation leaves the real domain (log of 0, division by zero, NaN, ...)"""

    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        super().__init__(message)
