"""A small arithmetic expression language over variables ``x1..xm``.

Grammar (EBNF)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('-')? atom ('^' uint)?
    atom   := number | rational | variable | '(' expr ')'
            | func '(' expr (',' expr)? ')'
    func   := 'abs' | 'min' | 'max' | 'sqrt' | 'sin' | 'cos' | 'exp'

Numbers are integers or decimals (held exactly as rationals); ``p/q``
written without spaces is a rational literal (``1/3``), while a spaced
``1 / 3`` parses as division of constants — the value is identical.
Variables are ``x1``, ``x2``, ... and must not exceed the declared
dimension.

Expressions evaluate two ways: pointwise over real vectors, and over
boxes via the interval kernels, which yields an outer enclosure of the
range over the *closure* of the box.  Enclosures may overshoot the true
range when a variable occurs several times (the classic dependency
problem: ``x1 - x1`` over [0,1] encloses to [-1,1]); they are still
sound, inclusion-isotonic, and tighten as boxes shrink.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import intervals as iv
from .errors import DimensionError, DomainError, ParseError
from .intervals import Interval


class Expr:
    """Base class for expression nodes.  Nodes are immutable."""

    __slots__ = ()

    def interval(self, los: np.ndarray, his: np.ndarray):
        """Vector enclosure over boxes given as (m, n) bound arrays.

        Returns (lo, hi) float arrays; invalid lanes are NaN.
        """
        raise NotImplementedError

    def values(self, pts: np.ndarray) -> np.ndarray:
        """Vector pointwise evaluation over (m, n) points; NaN = domain error."""
        raise NotImplementedError

    def children(self) -> tuple["Expr", ...]:
        return ()

    def __repr__(self):
        return str(self)


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    for c in e.children():
        yield from walk(c)


def _tight_float_bounds(q: Fraction) -> tuple[float, float]:
    x = float(q)
    fx = Fraction(x)
    if fx == q:
        return x, x
    if fx < q:
        return x, math.nextafter(x, math.inf)
    return math.nextafter(x, -math.inf), x


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: Fraction

    def interval(self, los, his):
        lo, hi = _tight_float_bounds(self.value)
        n = los.shape[1]
        return np.full(n, lo), np.full(n, hi)

    def values(self, pts):
        return np.full(pts.shape[1], float(self.value))

    def __str__(self):
        if self.value.denominator == 1:
            return str(self.value.numerator)
        return f"{self.value.numerator}/{self.value.denominator}"


@dataclass(frozen=True, slots=True)
class Var(Expr):
    axis: int  # 1-based

    def interval(self, los, his):
        j = self.axis - 1
        return los[j].copy(), his[j].copy()

    def values(self, pts):
        return pts[self.axis - 1].copy()

    def __str__(self):
        return f"x{self.axis}"


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def interval(self, los, his):
        lo, hi = self.arg.interval(los, his)
        return iv.iv_neg(lo, hi)

    def values(self, pts):
        return -self.arg.values(pts)

    def __str__(self):
        return f"-({self.arg})"


def _binary(name, symbol, kernel, point_fn):
    @dataclass(frozen=True, slots=True)
    class _Node(Expr):
        left: Expr
        right: Expr

        def children(self):
            return (self.left, self.right)

        def interval(self, los, his):
            l1, h1 = self.left.interval(los, his)
            l2, h2 = self.right.interval(los, his)
            lo, hi = kernel(l1, h1, l2, h2)
            return iv.mark_invalid(lo, hi)

        def values(self, pts):
            return point_fn(self.left.values(pts), self.right.values(pts))

        def __str__(self):
            if symbol.isalpha():
                return f"{symbol}({self.left}, {self.right})"
            return f"({self.left} {symbol} {self.right})"

    _Node.__name__ = _Node.__qualname__ = name
    return _Node


def _safe_div(x, y):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(y == 0.0, np.nan, x / y)


Add = _binary("Add", "+", iv.iv_add, np.add)
Sub = _binary("Sub", "-", iv.iv_sub, np.subtract)
Mul = _binary("Mul", "*", iv.iv_mul, np.multiply)
Div = _binary("Div", "/", iv.iv_div, _safe_div)
Min = _binary("Min", "min", iv.iv_min, np.minimum)
Max = _binary("Max", "max", iv.iv_max, np.maximum)


def _unary(name, label, kernel, point_fn):
    @dataclass(frozen=True, slots=True)
    class _Node(Expr):
        arg: Expr

        def children(self):
            return (self.arg,)

        def interval(self, los, his):
            lo, hi = self.arg.interval(los, his)
            lo, hi = kernel(lo, hi)
            return iv.mark_invalid(lo, hi)

        def values(self, pts):
            with np.errstate(invalid="ignore", over="ignore"):
                return point_fn(self.arg.values(pts))

        def __str__(self):
            return f"{label}({self.arg})"

    _Node.__name__ = _Node.__qualname__ = name
    return _Node


def _safe_sqrt(x):
    return np.where(x < 0.0, np.nan, np.sqrt(np.maximum(x, 0.0)))


def _safe_exp(x):
    r = np.exp(x)
    return np.where(np.isfinite(r), r, np.nan)


Abs = _unary("Abs", "abs", iv.iv_abs, np.abs)
Sqrt = _unary("Sqrt", "sqrt", iv.iv_sqrt, _safe_sqrt)
Sin = _unary("Sin", "sin", iv.iv_sin, np.sin)
Cos = _unary("Cos", "cos", iv.iv_cos, np.cos)
Exp = _unary("Exp", "exp", iv.iv_exp, _safe_exp)


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: int  # nonnegative integer

    def children(self):
        return (self.base,)

    def interval(self, los, his):
        lo, hi = self.base.interval(los, his)
        lo, hi = iv.iv_pow(lo, hi, self.exponent)
        return iv.mark_invalid(lo, hi)

    def values(self, pts):
        return self.base.values(pts) ** self.exponent

    def __str__(self):
        return f"({self.base})^{self.exponent}"


_FUNCTIONS = {
    "abs": (Abs, 1),
    "sqrt": (Sqrt, 1),
    "sin": (Sin, 1),
    "cos": (Cos, 1),
    "exp": (Exp, 1),
    "min": (Min, 2),
    "max": (Max, 2),
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+\.\d*|\.\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise ParseError(f"unexpected character {source[pos]!r}", position=pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, dim: int):
        self.tokens = _tokenize(source)
        self.dim = dim
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text):
        kind, tok, pos = self.next()
        if tok != text:
            raise ParseError(f"expected {text!r}, found {tok or 'end of input'!r}", position=pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, tok, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing {tok!r}", position=pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            rhs = self.factor()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def factor(self) -> Expr:
        if self.peek()[1] == "-":
            self.next()
            return Neg(self.factor())
        e = self.atom()
        if self.peek()[1] == "^":
            self.next()
            kind, tok, pos = self.next()
            if kind != "number" or "." in tok:
                raise ParseError("exponent must be a nonnegative integer", position=pos)
            e = Pow(e, int(tok))
        return e

    def atom(self) -> Expr:
        kind, tok, pos = self.next()
        if kind == "number":
            # unspaced p/q over integers is a rational literal, e.g. 1/3;
            # written with spaces it parses as ordinary constant division
            if "." not in tok:
                k1, t1, p1 = self.tokens[self.i]
                if t1 == "/" and p1 == pos + len(tok) and self.i + 1 < len(self.tokens):
                    k2, t2, p2 = self.tokens[self.i + 1]
                    if k2 == "number" and "." not in t2 and p2 == p1 + 1:
                        self.i += 2
                        if int(t2) == 0:
                            raise ParseError(
                                "rational literal with zero denominator", position=pos
                            )
                        return Const(Fraction(int(tok), int(t2)))
            return Const(Fraction(tok))
        if tok == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            m = re.fullmatch(r"x(\d+)", tok)
            if m:
                axis = int(m.group(1))
                if not 1 <= axis <= self.dim:
                    raise DimensionError(
                        f"variable {tok} exceeds declared dimension {self.dim}"
                    )
                return Var(axis)
            if tok in _FUNCTIONS:
                cls, arity = _FUNCTIONS[tok]
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != arity:
                    raise ParseError(
                        f"{tok} takes {arity} argument(s), got {len(args)}", position=pos
                    )
                return cls(*args)
            raise ParseError(f"unknown identifier {tok!r}", position=pos)
        raise ParseError(f"unexpected {tok or 'end of input'!r}", position=pos)


def parse_expr(source: str, dim: int) -> Expr:
    """Parse ``source`` over variables x1..x<dim>."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    return _Parser(source, dim).parse()


def max_axis(e: Expr) -> int:
    return max((n.axis for n in walk(e) if isinstance(n, Var)), default=0)


def permute_axes(e: Expr, perm: dict[int, int]) -> Expr:
    """Rewrite variable axes; used for order-swapped repeated integrals."""
    if isinstance(e, Var):
        return Var(perm.get(e.axis, e.axis))
    if isinstance(e, Const):
        return e
    if isinstance(e, Pow):
        return Pow(permute_axes(e.base, perm), e.exponent)
    kids = tuple(permute_axes(c, perm) for c in e.children())
    return type(e)(*kids)


def eval_point(e: Expr, point: Sequence[float]) -> float:
    """Standard real evaluation at one point; domain errors raise."""
    pts = np.asarray(point, dtype=np.float64).reshape(len(point), 1)
    val = e.values(pts)[0]
    if math.isnan(val):
        node = _first_invalid_point(e, pts)
        raise DomainError("pointwise evaluation left the domain", node=node)
    return float(val)


def _first_invalid_point(e: Expr, pts) -> Expr:
    for c in e.children():
        if np.isnan(c.values(pts)).any():
            return _first_invalid_point(c, pts)
    return e


def _boxes_from(box) -> tuple[np.ndarray, np.ndarray]:
    los, his = [], []
    for axis in box:
        if isinstance(axis, Interval):
            lo, hi = axis.lo, axis.hi
        else:
            lo, hi = axis
        los.append(lo)
        his.append(hi)
    return (
        np.asarray(los, dtype=np.float64).reshape(len(los), 1),
        np.asarray(his, dtype=np.float64).reshape(len(his), 1),
    )


def eval_interval(e: Expr, box) -> Interval:
    """Outer enclosure of the range of ``e`` over the closed box.

    ``box`` is a sequence of per-axis (lo, hi) pairs or Intervals.
    Raises DomainError (identifying the offending node) when the natural
    interval extension leaves the domain.
    """
    los, his = _boxes_from(box)
    lo, hi = e.interval(los, his)
    if math.isnan(lo[0]) or math.isnan(hi[0]):
        node = _first_invalid_interval(e, los, his)
        raise DomainError("interval evaluation left the domain", node=node)
    return Interval(float(lo[0]), float(hi[0]))


def _first_invalid_interval(e: Expr, los, his) -> Expr:
    for c in e.children():
        lo, hi = c.interval(los, his)
        if np.isnan(lo).any() or np.isnan(hi).any():
            return _first_invalid_interval(c, los, his)
    return e


def lipschitz_bound(e: Expr, domain: Interval) -> float:
    """A sound (possibly coarse) Lipschitz constant of a 1-variable
    expression on ``domain``; ``inf`` when no finite bound is available
    from the tree (division near zero, sqrt at zero).
    """
    lam = _lip(e, domain)
    return lam if math.isinf(lam) else lam * 1.01


def _range_of(e: Expr, domain: Interval) -> Interval:
    return eval_interval(e, [domain])


def _mag(r: Interval) -> float:
    return max(abs(r.lo), abs(r.hi))


def _lip(e: Expr, dom: Interval) -> float:
    if isinstance(e, Const):
        return 0.0
    if isinstance(e, Var):
        return 1.0
    if isinstance(e, (Neg, Abs)):
        return _lip(e.children()[0], dom)
    if isinstance(e, (Add, Sub)):
        return _lip(e.left, dom) + _lip(e.right, dom)
    if isinstance(e, Mul):
        try:
            ra, rb = _range_of(e.left, dom), _range_of(e.right, dom)
        except DomainError:
            return math.inf
        return _mag(ra) * _lip(e.right, dom) + _mag(rb) * _lip(e.left, dom)
    if isinstance(e, Div):
        try:
            ra, rb = _range_of(e.left, dom), _range_of(e.right, dom)
        except DomainError:
            return math.inf
        if rb.lo <= 0.0 <= rb.hi:
            return math.inf
        den = min(abs(rb.lo), abs(rb.hi))
        return (_lip(e.left, dom) * _mag(rb) + _mag(ra) * _lip(e.right, dom)) / den**2
    if isinstance(e, Pow):
        if e.exponent == 0:
            return 0.0
        try:
            rb = _range_of(e.base, dom)
        except DomainError:
            return math.inf
        return e.exponent * _mag(rb) ** (e.exponent - 1) * _lip(e.base, dom)
    if isinstance(e, Sqrt):
        try:
            rb = _range_of(e.arg, dom)
        except DomainError:
            return math.inf
        if rb.lo <= 0.0:
            return math.inf
        return _lip(e.arg, dom) / (2.0 * math.sqrt(rb.lo))
    if isinstance(e, (Sin, Cos)):
        return _lip(e.arg, dom)
    if isinstance(e, Exp):
        try:
            rb = _range_of(e.arg, dom)
        except DomainError:
            return math.inf
        return math.exp(min(rb.hi, 700.0)) * _lip(e.arg, dom)
    if isinstance(e, (Min, Max)):
        return max(_lip(e.left, dom), _lip(e.right, dom))
    raise TypeError(f"unknown node {type(e).__name__}")
