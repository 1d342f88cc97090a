"""Arithmetic expressions over t for rate and probability functions.

Grammar: number literals, the variable ``t``, constants ``pi`` and ``e``,
binary ``+ - * / ^`` (with ``^`` binding tightest and right-associative,
then unary minus, then ``* /``, then ``+ -``), and the functions ``sin``,
``cos``, ``exp``. Whitespace is insignificant. Parse errors carry the byte
offset of the offending token; evaluation rejects non-finite results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import EvaluationError, ExpressionError

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTANTS = {"pi": np.pi, "e": np.e}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Const, Neg, BinOp, Call]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def _tokenize(src: str) -> list[Token]:
    tokens = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and (src[j].isdigit() or src[j] == "."):
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            text = src[i:j]
            try:
                float(text)
            except ValueError:
                raise ExpressionError(f"malformed number {text!r} at offset {i}", offset=i)
            tokens.append(Token("number", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(Token("ident", src[i:j], i))
            i = j
            continue
        if c in "+-*/^()":
            tokens.append(Token(c, c, i))
            i += 1
            continue
        raise ExpressionError(f"unexpected character {c!r} at offset {i}", offset=i)
    tokens.append(Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ExpressionError(
                f"expected {kind!r} but found {tok.text or 'end of input'!r} "
                f"at offset {tok.pos}", offset=tok.pos)
        return self.advance()

    def parse(self) -> Node:
        node = self.expression()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(
                f"trailing input {tok.text!r} at offset {tok.pos}", offset=tok.pos)
        return node

    def expression(self) -> Node:
        node = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.advance().kind
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind in ("*", "/"):
            op = self.advance().kind
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek().kind == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek().kind == "^":
            self.advance()
            # right-associative; the exponent may start with a unary minus
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "(":
            self.advance()
            node = self.expression()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name in _FUNCTIONS:
                self.expect("(")
                arg = self.expression()
                self.expect(")")
                return Call(name, arg)
            if name == "t":
                return Var("t")
            if name in _CONSTANTS:
                return Const(name)
            raise ExpressionError(
                f"unknown identifier {name!r} at offset {tok.pos}", offset=tok.pos)
        raise ExpressionError(
            f"expected a value but found {tok.text or 'end of input'!r} "
            f"at offset {tok.pos}", offset=tok.pos)


def _eval_node(node: Node, t):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Const):
        return np.float64(_CONSTANTS[node.name])
    if isinstance(node, Neg):
        return -_eval_node(node.operand, t)
    if isinstance(node, Call):
        return _FUNCTIONS[node.func](_eval_node(node.arg, t))
    left = _eval_node(node.left, t)
    right = _eval_node(node.right, t)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        return left / right
    return np.power(left, right)


def to_source(node: Node) -> str:
    """Render an AST back to parseable source (conservatively parenthesized)."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        return f"(-({to_source(node.operand)}))"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    return f"({to_source(node.left)}){node.op}({to_source(node.right)})"


@dataclass(frozen=True)
class Expr:
    """A parsed expression; calling it evaluates at a time (scalar or array)."""

    ast: Node
    source: str

    def evaluate(self, t):
        arr = np.asarray(t, dtype=float)
        with np.errstate(divide="raise", invalid="raise", over="raise"):
            try:
                out = _eval_node(self.ast, arr if arr.ndim else np.float64(arr))
            except FloatingPointError as exc:
                raise EvaluationError(
                    f"expression {self.source!r} failed at t={t}: {exc}") from exc
            except ZeroDivisionError as exc:
                raise EvaluationError(
                    f"expression {self.source!r} divides by zero at t={t}") from exc
        out = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"expression {self.source!r} is non-finite at t={t}")
        if out.ndim == 0 and np.asarray(t).ndim == 0:
            return float(out)
        return out + np.zeros_like(arr)

    def __call__(self, t):
        return self.evaluate(t)


def parse_expr(src: str) -> Expr:
    """Parse an expression over t; raises ExpressionError with a byte offset."""
    if not src or not src.strip():
        raise ExpressionError("empty expression", offset=0)
    return Expr(ast=_Parser(src).parse(), source=src)
