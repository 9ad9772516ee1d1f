"""Wave-profile expressions: parsing, printing and jet evaluation.

Grammar (whitespace is insignificant)::

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = ("-" | "+") unary | power ;
    power    = primary [ "^" exponent ] ;
    exponent = [ "-" ] integer | "(" [ "-" ] integer ")" ;
    primary  = number | name | func "(" expr ")" | "(" expr ")" ;
    func     = "sin" | "cos" | "exp" | "log" ;
    number   = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``. Exponents are
integers so that jets stay exact on polynomials. Names must be declared chart
coordinates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .jet import DomainError, Jet2

__all__ = [
    "Const", "Var", "Neg", "BinOp", "Pow", "Call", "Expr",
    "ParseError", "UndeclaredNameError", "DomainError",
    "parse_field", "to_text", "variables", "restrict",
    "ScalarField", "eval_jet2",
]

FUNCTIONS = ("sin", "cos", "exp", "log")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Const, Var, Neg, BinOp, Pow, Call]


class ParseError(ValueError):
    """Malformed expression text; ``offset`` is a byte offset into the UTF-8 text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UndeclaredNameError(ParseError):
    pass


# parsing ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", len(text[:pos].encode()))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(text[:start].encode())))
        pos = m.end()
    tokens.append(("end", "", len(text.encode())))
    return tokens


class _Parser:
    def __init__(self, text: str, coordinates: Sequence[str]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.coords = {name: i for i, name in enumerate(coordinates)}

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, offset = self.take()
        if text != value or kind != "op":
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", offset)

    def parse(self) -> Expr:
        tree = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", offset)
        return tree

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            arg = self.unary()
            # a negated literal is read as a negative constant, which is how it prints
            return Const(-arg.value) if isinstance(arg, Const) else Neg(arg)
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            base = Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        paren = self.peek()[:2] == ("op", "(")
        if paren:
            self.take()
        sign = 1
        if self.peek()[:2] == ("op", "-"):
            self.take()
            sign = -1
        kind, text, offset = self.take()
        if kind != "num" or not text.isdigit():
            raise ParseError("exponent must be an integer", offset)
        if paren:
            self.expect(")")
        return sign * int(text)

    def primary(self):
        kind, text, offset = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text not in self.coords:
                raise UndeclaredNameError(f"undeclared coordinate {text!r}", offset)
            return Var(text, self.coords[text])
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {text or 'end of input'!r}", offset)


def parse_field(text: str, coordinates: Sequence[str]) -> Expr:
    """Parse ``text`` into an expression tree over the given coordinate names."""
    return _Parser(text, coordinates).parse()


# printing -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def _fmt_const(value: float) -> str:
    if np.isfinite(value) and value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def to_text(node: Expr) -> str:
    """Render a tree as text that parses back to the same tree."""
    if isinstance(node, Const):
        s = _fmt_const(node.value)
        return f"({s})" if node.value < 0 else s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        return "-" + (f"({inner})" if _prec(node.arg) < 3 else inner)
    if isinstance(node, Pow):
        base = to_text(node.base)
        if _prec(node.base) < 5:
            base = f"({base})"
        return f"{base}^{node.exponent}" if node.exponent >= 0 else f"{base}^({node.exponent})"
    p = _PREC[node.op]
    left, right = to_text(node.left), to_text(node.right)
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    sep = " " if p == 1 else ""
    return f"{left}{sep}{node.op}{sep}{right}"


def variables(node: Expr) -> set:
    """Names of all coordinates referenced by ``node``."""
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Pow):
        return variables(node.base)
    return variables(node.arg)


def _is(node, c: float) -> bool:
    return isinstance(node, Const) and node.value == c


def _simplify(node: BinOp) -> Expr:
    # neutral elements only; the result is equal wherever the input is defined
    a, b, op = node.left, node.right, node.op
    if op == "+":
        if _is(a, 0.0):
            return b
        if _is(b, 0.0):
            return a
    elif op == "-":
        if _is(b, 0.0):
            return a
    elif op == "*":
        if _is(a, 1.0):
            return b
        if _is(b, 1.0):
            return a
    elif op == "/" and _is(b, 1.0):
        return a
    return node


def restrict(node: Expr, values: dict) -> Expr:
    """Substitute constant values for the named coordinates.

    Subtrees that become free of variables are evaluated to a single constant.
    """
    if isinstance(node, Var):
        return Const(float(values[node.name])) if node.name in values else node
    if isinstance(node, Const):
        return node
    if isinstance(node, BinOp):
        out = _simplify(BinOp(node.op, restrict(node.left, values), restrict(node.right, values)))
    elif isinstance(node, Pow):
        out = Pow(restrict(node.base, values), node.exponent)
    elif isinstance(node, Neg):
        out = Neg(restrict(node.arg, values))
    else:
        out = Call(node.func, restrict(node.arg, values))
    if not variables(out):
        return Const(float(_evaluate(out, np.zeros(0), 1).value))
    return out


# evaluation ---------------------------------------------------------------

def _compile(node: Expr):
    """Turn a tree into a closure ``(x, order) -> Jet2``."""
    if isinstance(node, Const):
        c = node.value
        return lambda x, order: Jet2.constant(c, x.shape[-1], x.shape[:-1], order)
    if isinstance(node, Var):
        i = node.index
        return lambda x, order: Jet2.variable(x, i, order)
    if isinstance(node, BinOp):
        f, g = _compile(node.left), _compile(node.right)
        if isinstance(node.right, Const):
            c = node.right.value
            ops = {"+": lambda x, o: f(x, o) + c, "-": lambda x, o: f(x, o) + (-c),
                   "*": lambda x, o: f(x, o) * c}
            if node.op in ops:
                return ops[node.op]
        if isinstance(node.left, Const) and node.op in "+*":
            c = node.left.value
            if node.op == "+":
                return lambda x, o: g(x, o) + c
            return lambda x, o: g(x, o) * c
        if node.op == "+":
            return lambda x, o: f(x, o) + g(x, o)
        if node.op == "-":
            return lambda x, o: f(x, o) - g(x, o)
        if node.op == "*":
            return lambda x, o: f(x, o) * g(x, o)
        return lambda x, o: f(x, o) / g(x, o)
    if isinstance(node, Neg):
        f = _compile(node.arg)
        return lambda x, o: -f(x, o)
    if isinstance(node, Pow):
        f, k = _compile(node.base), node.exponent
        return lambda x, o: f(x, o) ** k
    f, name = _compile(node.arg), node.func
    return lambda x, o: getattr(f(x, o), name)()


def _evaluate(node: Expr, x: np.ndarray, order: int) -> Jet2:
    return _compile(node)(x, order)


@dataclass(frozen=True)
class ScalarField:
    """An expression bound to an ordered list of chart coordinates."""

    expr: Expr
    coordinate_names: tuple

    def __post_init__(self):
        object.__setattr__(self, "_fn", _compile(self.expr))

    def __reduce__(self):
        return (type(self), (self.expr, tuple(self.coordinate_names)))

    @classmethod
    def parse(cls, text: str, coordinates: Sequence[str]) -> "ScalarField":
        return cls(parse_field(text, coordinates), tuple(coordinates))

    @property
    def dim(self) -> int:
        return len(self.coordinate_names)

    @property
    def text(self) -> str:
        return to_text(self.expr)

    def jet(self, point, order: int = 2) -> Jet2:
        x = np.asarray(point, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"point has {x.shape[-1]} components, chart has {self.dim}")
        return self._fn(x, order)

    def __call__(self, point) -> np.ndarray:
        return self.jet(point, order=1).value

    def depends_on(self, name: str) -> bool:
        return name in variables(self.expr)


def eval_jet2(field: ScalarField, point) -> Jet2:
    return field.jet(point, order=2)
