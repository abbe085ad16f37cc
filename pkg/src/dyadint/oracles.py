"""Bound oracles: anything that maps a box to a certified range enclosure.

A :class:`BoundOracle` represents a bounded function on R^m that
vanishes outside its (mandatory) ``support`` box.  Its one behavioral
obligation is ``enclosures``: given query boxes, return intervals that
contain the function's range over each box.  Everything the integrator
can integrate is an oracle: expressions clipped to a support, indicator
functions of constraint regions, and algebraic combinations of oracles.

Query boxes come in two closure flavors.  The default (semiclosed)
matches the dyadic-cube convention; ``closed=True`` asks about the
closure of each query box, which only changes the outcome of exact
membership tests (supports, region boxes) -- range enclosures of
expressions are taken over closures either way, which is sound because
the two families of sums share their limits.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import intervals as iv
from .errors import DimensionError, DomainError, ParseError, PreconditionError
from .expr import Expr, eval_point, lipschitz_bound, max_axis, parse_expr
from .geometry import Box, DyadicCube, DyadicRational, parse_box
from .intervals import Interval


def _axis_relation(c, d, a, b, lo_closed, hi_closed, closed_query):
    """(intersects, contained) bool arrays for query intervals against one
    support/region axis [a,b] with the given closures.

    Semiclosed queries are [c, d); closed queries are [c, d].  All
    endpoints are exact binary64 values, so comparisons are exact.
    """
    if closed_query:
        inter = ((d > a) | (lo_closed & (d == a))) & ((c < b) | (hi_closed & (c == b)))
        contained = ((c > a) | (lo_closed & (c == a))) & ((d < b) | (hi_closed & (d == b)))
    else:
        inter = (d > a) & ((c < b) | (hi_closed & (c == b)))
        contained = ((c > a) | (lo_closed & (c == a))) & (d <= b)
    return inter, contained


def _box_relation(los, his, box: Box, closed_query: bool):
    """(intersects, contained) across all axes of ``box``."""
    a_f, b_f = box.float_bounds()
    inter = np.ones(los.shape[1], dtype=bool)
    contained = np.ones(los.shape[1], dtype=bool)
    if box.is_empty():
        return np.zeros_like(inter), np.zeros_like(contained)
    for j in range(box.dim):
        lc, uc = box.closures[j]
        i_j, c_j = _axis_relation(los[j], his[j], a_f[j], b_f[j], lc, uc, closed_query)
        inter &= i_j
        contained &= c_j
    return inter, contained


class BoundOracle:
    """Base class; subclasses implement :meth:`enclosures`."""

    dim: int
    support: Box

    def enclosures(self, los: np.ndarray, his: np.ndarray, closed: bool = False):
        """Range enclosures over query boxes given as (m, n) bound arrays.

        Returns (lo, hi) float arrays.  NaN lanes signal domain errors;
        scalar wrappers convert them to DomainError.
        """
        raise NotImplementedError

    def bounds(self, cube: DyadicCube, closed: bool = False) -> Interval:
        """Certified enclosure of the function's range over one cube."""
        if cube.dim != self.dim:
            raise DimensionError(f"cube dimension {cube.dim} != oracle dimension {self.dim}")
        blo, bhi = cube.float_bounds()
        lo, hi = self.enclosures(blo.reshape(-1, 1), bhi.reshape(-1, 1), closed=closed)
        if math.isnan(lo[0]) or math.isnan(hi[0]):
            raise DomainError("oracle evaluation left the domain", cube=cube)
        return Interval(float(lo[0]), float(hi[0]))

    def bounds_box(self, box: Box) -> Interval:
        """Enclosure over the closure of an arbitrary box (partition cells)."""
        blo, bhi = box.float_bounds()
        lo, hi = self.enclosures(blo.reshape(-1, 1), bhi.reshape(-1, 1), closed=True)
        if math.isnan(lo[0]) or math.isnan(hi[0]):
            raise DomainError("oracle evaluation left the domain", cube=box)
        return Interval(float(lo[0]), float(hi[0]))

    def global_range(self) -> Interval:
        """Sound enclosure of the function's range everywhere (includes 0)."""
        if self.support.is_empty():
            return Interval(0.0, 0.0)
        blo, bhi = self.support.float_bounds()
        lo, hi = self.enclosures(blo.reshape(-1, 1), bhi.reshape(-1, 1), closed=True)
        if math.isnan(lo[0]) or math.isnan(hi[0]):
            raise DomainError("oracle evaluation left the domain over its support")
        return Interval(min(float(lo[0]), 0.0), max(float(hi[0]), 0.0))


def _empty_box(dim: int) -> Box:
    z = tuple(DyadicRational(0) for _ in range(dim))
    return Box(z, z, tuple((True, False) for _ in range(dim)))


@dataclass(frozen=True)
class ExprOracle(BoundOracle):
    """An expression clipped to a support box: f on the support, 0 outside.

    Boxes fully inside the support evaluate over their closure; boxes
    straddling the support edge additionally hull the enclosure with 0,
    since the represented function vanishes outside.
    """

    expr: Expr
    support: Box

    @property
    def dim(self) -> int:
        return self.support.dim

    def enclosures(self, los, his, closed=False):
        inter, contained = _box_relation(los, his, self.support, closed)
        a_f, b_f = self.support.float_bounds()
        qlo = np.maximum(los, a_f.reshape(-1, 1))
        qhi = np.minimum(his, b_f.reshape(-1, 1))
        # degenerate (empty) clips can only happen on non-intersecting
        # lanes, which are zeroed below; keep the arrays well-formed
        qhi = np.maximum(qhi, qlo)
        lo, hi = self.expr.interval(qlo, qhi)
        zlo, zhi = iv.iv_hull_zero(lo, hi)
        edge = inter & ~contained
        lo = np.where(edge, zlo, lo)
        hi = np.where(edge, zhi, hi)
        lo = np.where(inter, lo, 0.0)
        hi = np.where(inter, hi, 0.0)
        return lo, hi


def from_expr(e: Expr | str, support: Box | str) -> ExprOracle:
    if isinstance(support, str):
        support = parse_box(support)
    if isinstance(e, str):
        e = parse_expr(e, support.dim)
    if max_axis(e) > support.dim:
        raise DimensionError(
            f"expression uses x{max_axis(e)} but the support has dimension {support.dim}"
        )
    return ExprOracle(e, support)


def zero(dim: int) -> ExprOracle:
    """The identically-zero oracle."""
    from fractions import Fraction

    from .expr import Const

    return ExprOracle(Const(Fraction(0)), _empty_box(dim))


class Classification(Enum):
    OUTSIDE = 0
    INSIDE = 1
    BOUNDARY = 2


@dataclass(frozen=True)
class Region:
    """A region: a bounding box intersected with constraints
    ``expr <= 0`` (strict=False) or ``expr < 0`` (strict=True).

    Classification of a query box is sound: INSIDE means every point of
    the box belongs to the region, OUTSIDE means none does.  Pure-box
    regions (no constraints) classify exactly by dyadic comparisons, so
    level-aligned rectangles produce gap exactly zero.
    """

    bbox: Box
    constraints: tuple[tuple[Expr, bool], ...] = ()

    @property
    def dim(self) -> int:
        return self.bbox.dim

    def classify_arrays(self, los, his, closed=False) -> np.ndarray:
        """int8 codes per lane: Classification values."""
        inter, contained = _box_relation(los, his, self.bbox, closed)
        n = los.shape[1]
        all_sat = np.ones(n, dtype=bool)
        any_violated = np.zeros(n, dtype=bool)
        if self.constraints:
            a_f, b_f = self.bbox.float_bounds()
            qlo = np.maximum(los, a_f.reshape(-1, 1))
            qhi = np.minimum(his, b_f.reshape(-1, 1))
            qhi = np.maximum(qhi, qlo)
            for cexpr, strict in self.constraints:
                clo, chi = cexpr.interval(qlo, qhi)
                valid = ~(np.isnan(clo) | np.isnan(chi))
                if strict:
                    sat = valid & (chi < 0.0)
                    vio = valid & (clo >= 0.0)
                else:
                    sat = valid & (chi <= 0.0)
                    vio = valid & (clo > 0.0)
                all_sat &= sat
                any_violated |= vio
        codes = np.full(n, Classification.BOUNDARY.value, dtype=np.int8)
        codes[inter & contained & all_sat] = Classification.INSIDE.value
        codes[~inter | any_violated] = Classification.OUTSIDE.value
        return codes

    def classify(self, cube: DyadicCube, closed: bool = False) -> Classification:
        blo, bhi = cube.float_bounds()
        code = self.classify_arrays(blo.reshape(-1, 1), bhi.reshape(-1, 1), closed=closed)[0]
        return Classification(int(code))

    def contains_point(self, point) -> bool:
        """Exact pointwise membership (used by sampling tests)."""
        for j in range(self.dim):
            p = DyadicRational.coerce(point[j])
            a, b = self.bbox.lowers[j], self.bbox.uppers[j]
            lc, uc = self.bbox.closures[j]
            if not ((a < p or (lc and a == p)) and (p < b or (uc and p == b))):
                return False
        for cexpr, strict in self.constraints:
            v = eval_point(cexpr, [float(x) for x in point])
            if strict and not v < 0.0:
                return False
            if not strict and not v <= 0.0:
                return False
        return True


def region_from_box(box: Box | str) -> Region:
    if isinstance(box, str):
        box = parse_box(box)
    return Region(bbox=box)


def region_from_json(source) -> Region:
    """Load the region file format
    ``{"dim": m, "bbox": "[a,b)x...", "constraints": [{"expr": .., "strict": ..}]}``.
    """
    if isinstance(source, (str, Path)):
        text = str(source)
        if text.lstrip().startswith("{"):
            obj = json.loads(text)
        else:
            obj = json.loads(Path(source).read_text())
    else:
        obj = source
    try:
        dim = int(obj["dim"])
        bbox = parse_box(obj["bbox"])
        cons = []
        for c in obj.get("constraints", ()):
            cons.append((parse_expr(c["expr"], dim), bool(c.get("strict", False))))
    except (KeyError, TypeError) as e:
        raise ParseError(f"malformed region object: {e}") from e
    if bbox.dim != dim:
        raise ParseError(f"region bbox has dimension {bbox.dim}, declared {dim}")
    return Region(bbox=bbox, constraints=tuple(cons))


@dataclass(frozen=True)
class IndicatorOracle(BoundOracle):
    """The indicator (characteristic function) of a region."""

    region: Region

    @property
    def dim(self) -> int:
        return self.region.dim

    @property
    def support(self) -> Box:
        return self.region.bbox

    def enclosures(self, los, his, closed=False):
        codes = self.region.classify_arrays(los, his, closed)
        lo = np.where(codes == Classification.INSIDE.value, 1.0, 0.0)
        hi = np.where(codes == Classification.OUTSIDE.value, 0.0, 1.0)
        return lo, hi


def indicator(region: Region | Box | str) -> IndicatorOracle:
    if isinstance(region, (Box, str)):
        region = region_from_box(region)
    return IndicatorOracle(region)


def _require_same_dim(o1: BoundOracle, o2: BoundOracle):
    if o1.dim != o2.dim:
        raise DimensionError(f"oracle dimensions differ: {o1.dim} vs {o2.dim}")


@dataclass(frozen=True)
class _AddOracle(BoundOracle):
    o1: BoundOracle
    o2: BoundOracle
    alpha: float
    beta: float
    support: Box

    @property
    def dim(self) -> int:
        return self.support.dim

    def enclosures(self, los, his, closed=False):
        l1, h1 = self.o1.enclosures(los, his, closed)
        l2, h2 = self.o2.enclosures(los, his, closed)
        l1, h1 = iv.iv_scale(l1, h1, self.alpha)
        l2, h2 = iv.iv_scale(l2, h2, self.beta)
        return iv.mark_invalid(*iv.iv_add(l1, h1, l2, h2))


@dataclass(frozen=True)
class _MulOracle(BoundOracle):
    o1: BoundOracle
    o2: BoundOracle
    support: Box

    @property
    def dim(self) -> int:
        return self.support.dim

    def enclosures(self, los, his, closed=False):
        l1, h1 = self.o1.enclosures(los, his, closed)
        l2, h2 = self.o2.enclosures(los, his, closed)
        return iv.mark_invalid(*iv.iv_mul(l1, h1, l2, h2))


@dataclass(frozen=True)
class _MinMaxOracle(BoundOracle):
    o1: BoundOracle
    o2: BoundOracle
    support: Box
    take_max: bool

    @property
    def dim(self) -> int:
        return self.support.dim

    def enclosures(self, los, his, closed=False):
        l1, h1 = self.o1.enclosures(los, his, closed)
        l2, h2 = self.o2.enclosures(los, his, closed)
        if self.take_max:
            return iv.iv_max(l1, h1, l2, h2)
        return iv.iv_min(l1, h1, l2, h2)


@dataclass(frozen=True)
class _MapOracle(BoundOracle):
    """Applies an exact monotone interval map to the inner enclosures.

    kind: 'abs' | 'pos' | 'neg' (positive part, negative part).
    """

    inner: BoundOracle
    kind: str

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def support(self) -> Box:
        return self.inner.support

    def enclosures(self, los, his, closed=False):
        lo, hi = self.inner.enclosures(los, his, closed)
        if self.kind == "abs":
            return iv.iv_abs(lo, hi)
        if self.kind == "pos":
            return np.maximum(lo, 0.0), np.maximum(hi, 0.0)
        return np.maximum(-hi, 0.0), np.maximum(-lo, 0.0)


@dataclass(frozen=True)
class _ScaleOracle(BoundOracle):
    inner: BoundOracle
    factor: float

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def support(self) -> Box:
        return self.inner.support

    def enclosures(self, los, his, closed=False):
        lo, hi = self.inner.enclosures(los, his, closed)
        return iv.mark_invalid(*iv.iv_scale(lo, hi, self.factor))


@dataclass(frozen=True)
class _RestrictOracle(BoundOracle):
    """f * chi_region: 0 outside, f inside, hull with 0 on boundary boxes."""

    inner: BoundOracle
    region: Region
    support: Box

    @property
    def dim(self) -> int:
        return self.support.dim

    def enclosures(self, los, his, closed=False):
        codes = self.region.classify_arrays(los, his, closed)
        lo, hi = self.inner.enclosures(los, his, closed)
        zlo, zhi = iv.iv_hull_zero(lo, hi)
        boundary = codes == Classification.BOUNDARY.value
        outside = codes == Classification.OUTSIDE.value
        lo = np.where(boundary, zlo, lo)
        hi = np.where(boundary, zhi, hi)
        lo = np.where(outside, 0.0, lo)
        hi = np.where(outside, 0.0, hi)
        return lo, hi


@dataclass(frozen=True)
class _ComposeOracle(BoundOracle):
    """phi o f for a 1-variable Lipschitz phi with phi(0) = 0."""

    inner: BoundOracle
    phi: Expr
    lipschitz_constant: float

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def support(self) -> Box:
        return self.inner.support

    def enclosures(self, los, his, closed=False):
        lo, hi = self.inner.enclosures(los, his, closed)
        rlo, rhi = self.phi.interval(lo.reshape(1, -1), hi.reshape(1, -1))
        return iv.mark_invalid(rlo, rhi)


def add(o1: BoundOracle, o2: BoundOracle, alpha: float = 1.0, beta: float = 1.0):
    """alpha*f + beta*g.  Support is the hull of the operand supports."""
    _require_same_dim(o1, o2)
    if o1.support.is_empty():
        sup = o2.support
    elif o2.support.is_empty():
        sup = o1.support
    else:
        sup = o1.support.hull(o2.support)
    return _AddOracle(o1, o2, float(alpha), float(beta), sup)


def mul(o1: BoundOracle, o2: BoundOracle):
    """f * g.  The product vanishes outside either support."""
    _require_same_dim(o1, o2)
    sup = o1.support.intersect(o2.support)
    return _MulOracle(o1, o2, sup if sup is not None else _empty_box(o1.dim))


def maximum(o1: BoundOracle, o2: BoundOracle):
    _require_same_dim(o1, o2)
    return _MinMaxOracle(o1, o2, o1.support.hull(o2.support), take_max=True)


def minimum(o1: BoundOracle, o2: BoundOracle):
    _require_same_dim(o1, o2)
    return _MinMaxOracle(o1, o2, o1.support.hull(o2.support), take_max=False)


def absolute(o: BoundOracle):
    return _MapOracle(o, "abs")


def pos_part(o: BoundOracle):
    """max(f, 0)."""
    return _MapOracle(o, "pos")


def neg_part(o: BoundOracle):
    """max(-f, 0)."""
    return _MapOracle(o, "neg")


def scale(o: BoundOracle, c: float):
    return _ScaleOracle(o, float(c))


def restrict(o: BoundOracle, region: Region):
    """f * chi_E."""
    if o.dim != region.dim:
        raise DimensionError(f"oracle dimension {o.dim} != region dimension {region.dim}")
    sup = o.support.intersect(region.bbox)
    return _RestrictOracle(o, region, sup if sup is not None else _empty_box(o.dim))


def _split_args(text: str) -> list[str]:
    """Split on top-level commas, respecting (), [] and {} nesting."""
    args = []
    depth = 0
    start = 0
    for i, ch in enumerate(text):
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == "," and depth == 0:
            args.append(text[start:i])
            start = i + 1
    args.append(text[start:])
    return [a.strip() for a in args]


def _region_arg(text: str) -> Region:
    text = text.strip()
    if text.startswith("{"):
        return region_from_json(text)
    if text.startswith(("[", "(")):
        return region_from_box(parse_box(text))
    return region_from_json(Path(text).read_text())


def parse_oracle(text: str) -> BoundOracle:
    """Parse the oracle pipeline syntax.

    Grammar (args split on top-level commas)::

        oracle := expr(EXPR, BOX)            # expression clipped to a box
                | indicator(REGION)           # REGION: box literal, JSON, or path
                | zero(DIM)
                | add(oracle, oracle[, alpha[, beta]])
                | mul(oracle, oracle)
                | max(oracle, oracle)
                | min(oracle, oracle)
                | abs(oracle) | pos(oracle) | neg(oracle)
                | scale(oracle, c)
                | restrict(oracle, REGION)
                | compose(PHI, oracle)        # PHI: 1-variable expression

    Example: ``restrict(expr(x1*x2, [0,2)x[0,2)), [0,1)x[0,1))``.
    """
    text = text.strip()
    m = re.fullmatch(r"([a-z]+)\s*\((.*)\)", text, re.DOTALL)
    if not m:
        raise ParseError(f"bad oracle pipeline {text!r}")
    head, body = m.group(1), m.group(2)
    args = _split_args(body)
    try:
        if head == "expr":
            if len(args) != 2:
                raise ParseError("expr(...) takes (expression, box)")
            return from_expr(args[0], parse_box(args[1]))
        if head == "indicator":
            return indicator(_region_arg(args[0]))
        if head == "zero":
            return zero(int(args[0]))
        if head == "add":
            alpha = float(args[2]) if len(args) > 2 else 1.0
            beta = float(args[3]) if len(args) > 3 else 1.0
            return add(parse_oracle(args[0]), parse_oracle(args[1]), alpha, beta)
        if head == "mul":
            return mul(parse_oracle(args[0]), parse_oracle(args[1]))
        if head == "max":
            return maximum(parse_oracle(args[0]), parse_oracle(args[1]))
        if head == "min":
            return minimum(parse_oracle(args[0]), parse_oracle(args[1]))
        if head == "abs":
            return absolute(parse_oracle(args[0]))
        if head == "pos":
            return pos_part(parse_oracle(args[0]))
        if head == "neg":
            return neg_part(parse_oracle(args[0]))
        if head == "scale":
            return scale(parse_oracle(args[0]), float(args[1]))
        if head == "restrict":
            return restrict(parse_oracle(args[0]), _region_arg(args[1]))
        if head == "compose":
            return lipschitz_compose(args[0], parse_oracle(args[1]))
    except (IndexError, ValueError) as e:
        raise ParseError(f"bad arguments in oracle pipeline {text!r}: {e}") from e
    raise ParseError(f"unknown oracle constructor {head!r}")


def lipschitz_compose(phi: Expr | str, o: BoundOracle) -> BoundOracle:
    """phi o f for a one-variable phi that is Lipschitz on the achieved
    range of f and satisfies phi(0) = 0.

    The vanishing condition keeps the composition supported inside
    ``o.support``; without it the composed function would be a nonzero
    constant on all of R^m and not integrable.  Violations raise
    PreconditionError, as does a phi whose derivative bound blows up on
    the achieved range (division near zero, sqrt at zero).
    """
    if isinstance(phi, str):
        phi = parse_expr(phi, 1)
    if max_axis(phi) > 1:
        raise DimensionError("phi must be an expression in the single variable x1")
    at_zero = eval_point(phi, [0.0])
    if at_zero != 0.0:
        raise PreconditionError(f"phi(0) = {at_zero!r}, must be exactly 0")
    rng = o.global_range()
    lam = lipschitz_bound(phi, rng)
    if math.isinf(lam):
        raise PreconditionError(
            f"phi has no finite Lipschitz bound on the achieved range {rng}"
        )
    return _ComposeOracle(o, phi, lam)
