"""Target-label expressions over metric identifiers.

Grammar (precedence low to high): ``+ -``, then ``* /``, then unary minus,
then right-associative ``^``. Functions: ``sqrt``, ``log10``. Identifiers
are lowercase ``[a-z_][a-z0-9_]*`` metric keys. ``a ^ b`` with a
non-integer exponent evaluates as exp(b * ln a) and requires a > 0.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = [
    "TargetExpr",
    "Num",
    "Var",
    "Call",
    "Unary",
    "Bin",
    "TargetSyntaxError",
    "TargetEvalError",
    "parse_target",
    "eval_target",
    "print_target",
]

FUNCTIONS = ("sqrt", "log10")


class TargetSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class TargetEvalError(ValueError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "TargetExpr"


@dataclass(frozen=True)
class Unary:
    operand: "TargetExpr"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "TargetExpr"
    right: "TargetExpr"


TargetExpr = Num | Var | Call | Unary | Bin

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)|(?P<ident>[a-z_][a-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            ws = len(text[pos:]) - len(text[pos:].lstrip())
            at = pos + ws
            if at >= len(text):
                break  # trailing whitespace
            raise TargetSyntaxError(f"unexpected character {text[at]!r}", at)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, value, offset = self.peek()
        if kind != "op" or value != op:
            raise TargetSyntaxError(f"expected '{op}'", offset)
        self.advance()

    def parse(self) -> TargetExpr:
        node = self.additive()
        kind, value, offset = self.peek()
        if kind != "end":
            raise TargetSyntaxError(f"unexpected token {value!r}", offset)
        return node

    def additive(self) -> TargetExpr:
        node = self.multiplicative()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                node = Bin(value, node, self.multiplicative())
            else:
                return node

    def multiplicative(self) -> TargetExpr:
        node = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                node = Bin(value, node, self.unary())
            else:
                return node

    def unary(self) -> TargetExpr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Unary(self.unary())
        return self.power()

    def power(self) -> TargetExpr:
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            # Right-associative; the exponent may carry a unary minus.
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> TargetExpr:
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "ident":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if value not in FUNCTIONS:
                    raise TargetSyntaxError(f"unknown function '{value}'", offset)
                self.advance()
                arg = self.additive()
                self.expect_op(")")
                return Call(value, arg)
            return Var(value)
        if kind == "op" and value == "(":
            node = self.additive()
            self.expect_op(")")
            return node
        if kind == "end":
            raise TargetSyntaxError("unexpected end of input", offset)
        raise TargetSyntaxError(f"unexpected token {value!r}", offset)


def parse_target(text: str) -> TargetExpr:
    return _Parser(text).parse()


def _pow(a: float, b: float) -> float:
    if float(b).is_integer():
        if a == 0.0 and b < 0:
            raise TargetEvalError("zero base with negative exponent")
        return float(a) ** float(b)
    if a <= 0.0:
        raise TargetEvalError(f"fractional power of non-positive base {a}")
    return math.exp(b * math.log(a))


def eval_target(expr: TargetExpr, metrics: dict) -> float:
    """Evaluate with 64-bit arithmetic; domain errors carry a reason."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        try:
            return float(metrics[expr.name])
        except KeyError:
            raise TargetEvalError(f"unbound identifier '{expr.name}'") from None
    if isinstance(expr, Unary):
        return -eval_target(expr.operand, metrics)
    if isinstance(expr, Call):
        v = eval_target(expr.arg, metrics)
        if expr.fn == "sqrt":
            if v < 0.0:
                raise TargetEvalError(f"sqrt of negative value {v}")
            return math.sqrt(v)
        if v <= 0.0:
            raise TargetEvalError(f"log10 of non-positive value {v}")
        return math.log10(v)
    left = eval_target(expr.left, metrics)
    right = eval_target(expr.right, metrics)
    try:
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "/":
            if right == 0.0:
                raise TargetEvalError("division by zero")
            return left / right
        return _pow(left, right)
    except OverflowError:
        raise TargetEvalError("overflow during evaluation") from None


# Printing precedence: atoms bind tightest, then ^, unary minus, * /, + -.
_PREC = {"+": 0, "-": 0, "*": 1, "/": 1, "unary": 2, "^": 3, "atom": 4}


def _prec(expr: TargetExpr) -> int:
    if isinstance(expr, Bin):
        return _PREC[expr.op]
    if isinstance(expr, Unary):
        return _PREC["unary"]
    return _PREC["atom"]


def print_target(expr: TargetExpr) -> str:
    """Minimal-parenthesis form; parse_target(print_target(t)) == t."""
    if isinstance(expr, Num):
        v = expr.value
        return repr(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Call):
        return f"{expr.fn}({print_target(expr.arg)})"
    if isinstance(expr, Unary):
        inner = print_target(expr.operand)
        if _prec(expr.operand) < _PREC["unary"]:
            inner = f"({inner})"
        return f"-{inner}"
    lp, rp = _prec(expr.left), _prec(expr.right)
    left = print_target(expr.left)
    right = print_target(expr.right)
    if expr.op == "^":
        # '^' demands an atom on the left; the exponent re-parses at the
        # unary level, so anything below that level needs parentheses.
        if lp < _PREC["atom"]:
            left = f"({left})"
        if rp < _PREC["unary"]:
            right = f"({right})"
    else:
        if lp < _PREC[expr.op]:
            left = f"({left})"
        # Left-associative: an equal-precedence right child would rebind.
        if rp <= _PREC[expr.op]:
            right = f"({right})"
    return f"{left} {expr.op} {right}" if expr.op in "+-" else f"{left}{expr.op}{right}"
