"""Shared helpers: seeded random expressions and oracles kept inside
safe domains (no division, bounded ranges) so fuzz corpora never trip
domain errors and stay numerically tame."""

import random
from fractions import Fraction

import pytest

from dyadint import expr as E
from dyadint.expr import eval_interval
from dyadint.geometry import Box, DyadicRational
from dyadint.intervals import Interval


def random_expr(rng: random.Random, dim: int, depth: int) -> E.Expr:
    if depth <= 0 or rng.random() < 0.30:
        if rng.random() < 0.45:
            return E.Const(Fraction(rng.randint(-8, 8), rng.choice((1, 2, 2, 4))))
        return E.Var(rng.randint(1, dim))
    r = rng.random()
    a = random_expr(rng, dim, depth - 1)
    if r < 0.18:
        return E.Add(a, random_expr(rng, dim, depth - 1))
    if r < 0.36:
        return E.Sub(a, random_expr(rng, dim, depth - 1))
    if r < 0.52:
        return E.Mul(a, random_expr(rng, dim, depth - 1))
    if r < 0.60:
        return E.Neg(a)
    if r < 0.68:
        return E.Abs(a)
    if r < 0.76:
        return E.Min(a, random_expr(rng, dim, depth - 1)) if rng.random() < 0.5 \
            else E.Max(a, random_expr(rng, dim, depth - 1))
    if r < 0.84:
        return E.Pow(a, rng.choice((2, 2, 3)))
    if r < 0.92:
        return E.Sin(a) if rng.random() < 0.5 else E.Cos(a)
    return E.Cos(E.Mul(E.Const(Fraction(1, 4)), a))


def random_dyadic_box(rng: random.Random, dim: int, span: int = 2, level: int = 2) -> Box:
    lowers, uppers = [], []
    scale = 1 << level
    for _ in range(dim):
        a = rng.randint(-span * scale, span * scale - 1)
        b = rng.randint(a + 1, a + span * scale)
        lowers.append(DyadicRational(a, level))
        uppers.append(DyadicRational(b, level))
    return Box.semiclosed(lowers, uppers)


def random_tame_expr(rng: random.Random, dim: int, box: Box, depth: int = 3,
                     max_width: float = 1e4) -> E.Expr:
    """A random expression whose enclosure over the box is finite and
    not absurdly wide; regenerated until that holds."""
    blo, bhi = box.float_bounds()
    dom = [(blo[j], bhi[j]) for j in range(dim)]
    for _ in range(100):
        e = random_expr(rng, dim, depth)
        try:
            enc = eval_interval(e, dom)
        except Exception:
            continue
        if enc.width <= max_width and abs(enc.lo) < 1e6 and abs(enc.hi) < 1e6:
            return e
    raise AssertionError("could not draw a tame expression")


@pytest.fixture
def rng():
    return random.Random(20240817)


def assert_encloses(interval: Interval, value) -> None:
    from fractions import Fraction as F

    lo = F(interval.lo)
    hi = F(interval.hi)
    v = F(value)
    assert lo <= v <= hi, f"{value} not in [{interval.lo}, {interval.hi}]"
