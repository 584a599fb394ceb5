"""Small expression language for right-hand sides ``f(t, y)``.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" int_literal)?
    atom   := number | "t" | "y" digits | ident "(" expr ("," expr)* ")"
            | "(" expr ")"

Exponents are non-negative integer literals; fractional powers are written
with ``cbrt``/``sqrt`` so that e.g. ``3*cbrt(y1)^2`` is defined on all of R.
Unary minus binds looser than ``^``, so ``-y1^2`` means ``-(y1^2)``.

Expressions are immutable trees of frozen dataclasses; structural equality is
plain ``==``.  ``evaluate`` is a direct tree walk; ``compile_expression``
builds nested closures that compute the same value faster and is what the
integrators use.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

from .errors import EvaluationError, ExpressionSyntaxError

__all__ = [
    "Num",
    "T",
    "Y",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "Expression",
    "FUNCTIONS",
    "parse",
    "to_source",
    "evaluate",
    "compile_expression",
    "max_variable_index",
    "substitute",
    "literal",
]


@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError("numeric literals are finite and non-negative")


@dataclass(frozen=True)
class T:
    pass


@dataclass(frozen=True)
class Y:
    index: int  # 1-based

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("state variables are numbered from 1")


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expression = Union[Num, T, Y, Neg, BinOp, Pow, Call]


def _sign(x: float) -> float:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


def _cbrt(x: float) -> float:
    # real cube root, odd in x
    r = abs(x) ** (1.0 / 3.0)
    if r > 0.0:
        # one Newton step removes the error of the pow() approximation
        r = r - (r * r * r - abs(x)) / (3.0 * r * r)
    return math.copysign(r, x)


def _checked_log(x: float) -> float:
    if x <= 0:
        raise _Domain("log of a non-positive number")
    return math.log(x)


def _checked_sqrt(x: float) -> float:
    if x < 0:
        raise _Domain("sqrt of a negative number")
    return math.sqrt(x)


class _Domain(Exception):
    pass


# name -> (callable, minimum arity, maximum arity or None)
FUNCTIONS: dict[str, tuple[Callable[..., float], int, int | None]] = {
    "sin": (math.sin, 1, 1),
    "cos": (math.cos, 1, 1),
    "tan": (math.tan, 1, 1),
    "exp": (math.exp, 1, 1),
    "log": (_checked_log, 1, 1),
    "abs": (abs, 1, 1),
    "sign": (_sign, 1, 1),
    "sqrt": (_checked_sqrt, 1, 1),
    "cbrt": (_cbrt, 1, 1),
    "min": (min, 2, None),
    "max": (max, 2, None),
}


# --------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),−])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, op, end
    text: str
    column: int  # 1-based


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", pos + 1, source)
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if text == "−":
                text = "-"
            tokens.append(_Token(kind, text, pos + 1))
        pos = m.end()
    tokens.append(_Token("end", "", len(source) + 1))
    return tokens


# --------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, message: str, tok: _Token | None = None) -> ExpressionSyntaxError:
        tok = tok or self.tok
        return ExpressionSyntaxError(message, tok.column, self.source)

    def expect(self, text: str) -> _Token:
        tok = self.tok
        if tok.kind != "op" or tok.text != text:
            found = tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        self.pos += 1
        return tok

    def at_op(self, *texts: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in texts

    def parse(self) -> Expression:
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Expression:
        node = self.term()
        while self.at_op("+", "-"):
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.factor()
        while self.at_op("*", "/"):
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expression:
        if self.at_op("-"):
            self.pos += 1
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.at_op("^"):
            self.pos += 1
            tok = self.tok
            if tok.kind != "number" or not tok.text.isdigit():
                raise self.error("exponent must be a non-negative integer literal", tok)
            self.pos += 1
            if self.at_op("^"):
                raise self.error("chained exponents need parentheses")
            return Pow(base, int(tok.text))
        return base

    def atom(self) -> Expression:
        tok = self.tok
        if tok.kind == "number":
            self.pos += 1
            value = float(tok.text)
            if not math.isfinite(value):
                raise self.error("numeric literal overflows binary64", tok)
            return Num(value)
        if tok.kind == "ident":
            self.pos += 1
            name = tok.text
            if name == "t":
                return T()
            if re.fullmatch(r"y\d+", name):
                index = int(name[1:])
                if index < 1:
                    raise self.error("state variables are numbered from y1", tok)
                return Y(index)
            if name not in FUNCTIONS:
                raise self.error(f"unknown identifier {name!r}", tok)
            self.expect("(")
            args = [self.expr()]
            while self.at_op(","):
                self.pos += 1
                args.append(self.expr())
            self.expect(")")
            _, lo, hi = FUNCTIONS[name]
            if len(args) < lo or (hi is not None and len(args) > hi):
                want = str(lo) if hi == lo else f"at least {lo}"
                raise self.error(f"{name}() takes {want} argument(s), got {len(args)}", tok)
            return Call(name, tuple(args))
        if self.at_op("("):
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")


def parse(source: str) -> Expression:
    """Parse ``source`` into an expression tree.

    Raises ``ExpressionSyntaxError`` (with a 1-based ``column``) on malformed
    input, unknown identifiers and wrong function arity.
    """
    return _Parser(source).parse()


# --------------------------------------------------------------------------
# printing

_PREC_SUM, _PREC_PRODUCT, _PREC_UNARY, _PREC_POWER, _PREC_ATOM = range(5)


def _precedence(e: Expression) -> int:
    if isinstance(e, BinOp):
        return _PREC_SUM if e.op in "+-" else _PREC_PRODUCT
    if isinstance(e, Neg):
        return _PREC_UNARY
    if isinstance(e, Pow):
        return _PREC_POWER
    return _PREC_ATOM


def _wrap(e: Expression, minimum: int) -> str:
    s = to_source(e)
    return f"({s})" if _precedence(e) < minimum else s


def to_source(e: Expression) -> str:
    """Render ``e`` so that ``parse(to_source(e)) == e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, T):
        return "t"
    if isinstance(e, Y):
        return f"y{e.index}"
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _PREC_UNARY)
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _PREC_ATOM)}^{e.exponent}"
    if isinstance(e, BinOp):
        prec = _precedence(e)
        # left-associative: the right operand needs strictly higher precedence
        left = _wrap(e.left, prec)
        right = _wrap(e.right, prec + 1)
        return f"{left} {e.op} {right}" if prec == _PREC_SUM else f"{left}{e.op}{right}"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_source(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# evaluation

def _finite(value: float, e: Expression) -> float:
    if not math.isfinite(value):
        raise EvaluationError("non-finite result", to_source(e))
    return value


def _apply(e: Expression, name: str, args: Sequence[float]) -> float:
    fn = FUNCTIONS[name][0]
    try:
        return _finite(fn(*args), e)
    except _Domain as exc:
        raise EvaluationError(str(exc), to_source(e)) from None
    except (OverflowError, ValueError):
        raise EvaluationError(f"{name} undefined for argument(s) {list(args)}", to_source(e)) from None


def _power(base: float, exponent: int, e: Expression) -> float:
    try:
        return _finite(float(base) ** exponent, e)
    except OverflowError:
        raise EvaluationError("overflow", to_source(e)) from None


def evaluate(e: Expression, t: float, y: Sequence[float]) -> float:
    """Evaluate ``e`` at ``(t, y)`` by walking the tree."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, T):
        return float(t)
    if isinstance(e, Y):
        if e.index > len(y):
            raise EvaluationError(f"y{e.index} referenced but state has dimension {len(y)}")
        return float(y[e.index - 1])
    if isinstance(e, Neg):
        return -evaluate(e.operand, t, y)
    if isinstance(e, Pow):
        return _power(evaluate(e.base, t, y), e.exponent, e)
    if isinstance(e, BinOp):
        a = evaluate(e.left, t, y)
        b = evaluate(e.right, t, y)
        if e.op == "+":
            return _finite(a + b, e)
        if e.op == "-":
            return _finite(a - b, e)
        if e.op == "*":
            return _finite(a * b, e)
        if b == 0.0:
            raise EvaluationError("division by zero", to_source(e))
        return _finite(a / b, e)
    if isinstance(e, Call):
        return _apply(e, e.name, [evaluate(a, t, y) for a in e.args])
    raise TypeError(f"not an expression node: {e!r}")


def compile_expression(e: Expression) -> Callable[[float, Sequence[float]], float]:
    """Return ``fn(t, y)`` equivalent to ``evaluate(e, t, y)``, built from closures."""
    if isinstance(e, Num):
        v = e.value
        return lambda t, y: v
    if isinstance(e, T):
        return lambda t, y: float(t)
    if isinstance(e, Y):
        i = e.index - 1

        def var(t, y):
            if i >= len(y):
                raise EvaluationError(f"y{i + 1} referenced but state has dimension {len(y)}")
            return float(y[i])
        return var
    if isinstance(e, Neg):
        inner = compile_expression(e.operand)
        return lambda t, y: -inner(t, y)
    if isinstance(e, Pow):
        base = compile_expression(e.base)
        n = e.exponent
        return lambda t, y: _power(base(t, y), n, e)
    if isinstance(e, BinOp):
        left = compile_expression(e.left)
        right = compile_expression(e.right)
        op = e.op
        if op == "+":
            return lambda t, y: _finite(left(t, y) + right(t, y), e)
        if op == "-":
            return lambda t, y: _finite(left(t, y) - right(t, y), e)
        if op == "*":
            return lambda t, y: _finite(left(t, y) * right(t, y), e)

        def divide(t, y):
            a = left(t, y)
            b = right(t, y)
            if b == 0.0:
                raise EvaluationError("division by zero", to_source(e))
            return _finite(a / b, e)
        return divide
    if isinstance(e, Call):
        args = [compile_expression(a) for a in e.args]
        name = e.name
        if len(args) == 1:
            (arg,) = args
            return lambda t, y: _apply(e, name, (arg(t, y),))
        return lambda t, y: _apply(e, name, [a(t, y) for a in args])
    raise TypeError(f"not an expression node: {e!r}")


def max_variable_index(e: Expression) -> int:
    """Largest ``k`` such that ``yk`` occurs in ``e`` (0 if none)."""
    if isinstance(e, Y):
        return e.index
    if isinstance(e, Neg):
        return max_variable_index(e.operand)
    if isinstance(e, Pow):
        return max_variable_index(e.base)
    if isinstance(e, BinOp):
        return max(max_variable_index(e.left), max_variable_index(e.right))
    if isinstance(e, Call):
        return max(max_variable_index(a) for a in e.args)
    return 0


def substitute(e: Expression, mapping: dict[int, Expression]) -> Expression:
    """Replace ``y_k`` by ``mapping[k]`` wherever ``k`` is a key."""
    if isinstance(e, Y):
        return mapping.get(e.index, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Call):
        return Call(e.name, tuple(substitute(a, mapping) for a in e.args))
    return e


def literal(value: float) -> Expression:
    """Expression node for any finite real (negative values become ``Neg``)."""
    value = float(value)
    return Neg(Num(-value)) if value < 0 else Num(value)
