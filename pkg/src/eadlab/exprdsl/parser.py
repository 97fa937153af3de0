"""
Recursive-descent parser for rate expressions.

Grammar (whitespace between tokens is ignored):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' factor)?
    atom   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' factor

'^' is right-associative and unary minus takes the whole power to its
right, so "-x^2" parses as -(x^2).
"""

import math
import re
from dataclasses import dataclass
from typing import List, Optional

from .base import ExprSyntaxError, UnknownFunctionError, UnknownVariableError
from .nodes import FUNCTIONS, VARIABLES, Binary, Const, ExprAst, Unary, Var

NAMED_CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)

_ATOM_EXPECTED = "number, identifier, '(' or '-'"


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | op | end
    text: str
    offset: int  # byte offset into the source


def tokenize(source: str) -> List[Token]:
    """Split source text into tokens, recording byte offsets"""
    tokens: List[Token] = []
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        offset = len(source[:pos].encode("utf-8"))
        if match is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", offset)
        kind = match.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, match.group(), offset))
        pos = match.end()
    tokens.append(Token("end", "", len(source.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _accept(self, text: str) -> Optional[Token]:
        if self.current.kind == "op" and self.current.text == text:
            return self._advance()
        return None

    def _expect(self, text: str) -> Token:
        token = self._accept(text)
        if token is None:
            raise ExprSyntaxError(
                f"unexpected {self._describe(self.current)}", self.current.offset, f"'{text}'"
            )
        return token

    @staticmethod
    def _describe(token: Token) -> str:
        return "end of input" if token.kind == "end" else f"'{token.text}'"

    def parse(self) -> ExprAst:
        ast = self.expr()
        if self.current.kind != "end":
            raise ExprSyntaxError(
                f"unexpected {self._describe(self.current)}",
                self.current.offset,
                "operator or end of input",
            )
        return ast

    def expr(self) -> ExprAst:
        node = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self._advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> ExprAst:
        node = self.factor()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self._advance().text
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> ExprAst:
        base = self.atom()
        if self._accept("^"):
            return Binary("^", base, self.factor())
        return base

    def atom(self) -> ExprAst:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Const(float(token.text))
        if token.kind == "ident":
            self._advance()
            if self._accept("("):
                if token.text not in FUNCTIONS:
                    raise UnknownFunctionError(token.text, token.offset)
                argument = self.expr()
                self._expect(")")
                return Unary(token.text, argument)
            if token.text in NAMED_CONSTANTS:
                return Const(NAMED_CONSTANTS[token.text])
            if token.text not in VARIABLES:
                raise UnknownVariableError(token.text, token.offset)
            return Var(token.text)
        if self._accept("("):
            node = self.expr()
            self._expect(")")
            return node
        if self._accept("-"):
            return Unary("neg", self.factor())
        raise ExprSyntaxError(f"unexpected {self._describe(token)}", token.offset, _ATOM_EXPECTED)


def parse(source: str) -> ExprAst:
    """
    Parse a rate expression.

    Args:
        source: Expression text in the variables x and y

    Returns:
        Immutable AST

    Raises:
        ExprSyntaxError: On malformed input (carries offset and expectation)
        UnknownFunctionError: For calls to unsupported functions
        UnknownVariableError: For identifiers other than x, y, pi, e
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0, _ATOM_EXPECTED)
    return _Parser(tokenize(source)).parse()
