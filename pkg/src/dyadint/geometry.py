"""Exact dyadic geometry: dyadic rationals, dyadic cubes, boxes.

Everything here is integer arithmetic in disguise.  A dyadic rational is
``num / 2**exp``; a level-``k`` dyadic cube is identified by its integer
corner vector ``n`` and spans ``prod_j [n_j * 2**-k, (n_j + 1) * 2**-k)``
(semiclosed on every axis).  Volumes, containment and intersection tests
are computed exactly, never through floats, so that level-aligned cases
come out with gap exactly zero downstream.

Floats enter only at the boundary to the interval evaluator, and the
conversion is checked: a coordinate that is not exactly representable as
a binary64 raises :class:`~dyadint.errors.CapError` instead of silently
rounding.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CapError, ParseError

#: Practical refinement cap.  Beyond level 40 cube enumeration is useless
#: anyway (2**(40*m) cubes); callers may lower but not raise this.
LEVEL_CAP = 40

_FLOAT_EXACT_LIMIT = 1 << 53


@dataclass(frozen=True, slots=True)
class DyadicRational:
    """Exact value ``num / 2**exp`` with ``exp >= 0``.

    Normalized so that ``num`` is odd whenever ``exp > 0`` (even integers
    necessarily keep ``exp == 0``).  Arithmetic is exact.
    """

    num: int
    exp: int = 0

    def __post_init__(self):
        num, exp = self.num, self.exp
        if exp < 0:
            num <<= -exp
            exp = 0
        if num == 0:
            exp = 0
        else:
            while exp > 0 and num % 2 == 0:
                num //= 2
                exp -= 1
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "exp", exp)

    # -- constructors -------------------------------------------------

    @classmethod
    def from_float(cls, x: float) -> "DyadicRational":
        """Every finite binary64 is a dyadic rational; this is exact."""
        if x != x or x in (float("inf"), float("-inf")):
            raise ValueError(f"not a finite value: {x}")
        num, den = float(x).as_integer_ratio()
        return cls(num, den.bit_length() - 1)

    @classmethod
    def from_fraction(cls, q: Fraction) -> "DyadicRational":
        den = q.denominator
        if den & (den - 1):
            raise ValueError(f"{q} is not a dyadic rational")
        return cls(q.numerator, den.bit_length() - 1)

    @classmethod
    def from_string(cls, text: str) -> "DyadicRational":
        """Accepts integers, exactly-dyadic decimals ('0.375') and 'p/2^e'."""
        text = text.strip()
        m = re.fullmatch(r"([+-]?\d+)\s*/\s*2\^(\d+)", text)
        if m:
            return cls(int(m.group(1)), int(m.group(2)))
        try:
            q = Fraction(text)
        except (ValueError, ZeroDivisionError) as e:
            raise ParseError(f"bad dyadic literal {text!r}") from e
        try:
            return cls.from_fraction(q)
        except ValueError as e:
            raise ParseError(f"{text!r} is not exactly dyadic") from e

    @classmethod
    def coerce(cls, x) -> "DyadicRational":
        if isinstance(x, DyadicRational):
            return x
        if isinstance(x, int):
            return cls(x)
        if isinstance(x, float):
            return cls.from_float(x)
        if isinstance(x, Fraction):
            return cls.from_fraction(x)
        if isinstance(x, str):
            return cls.from_string(x)
        raise TypeError(f"cannot interpret {x!r} as a dyadic rational")

    # -- arithmetic (exact) -------------------------------------------

    def __add__(self, other) -> "DyadicRational":
        o = DyadicRational.coerce(other)
        e = max(self.exp, o.exp)
        return DyadicRational((self.num << (e - self.exp)) + (o.num << (e - o.exp)), e)

    def __sub__(self, other) -> "DyadicRational":
        o = DyadicRational.coerce(other)
        e = max(self.exp, o.exp)
        return DyadicRational((self.num << (e - self.exp)) - (o.num << (e - o.exp)), e)

    def __mul__(self, other) -> "DyadicRational":
        o = DyadicRational.coerce(other)
        return DyadicRational(self.num * o.num, self.exp + o.exp)

    def __neg__(self) -> "DyadicRational":
        return DyadicRational(-self.num, self.exp)

    def _cmp_key(self, other: "DyadicRational"):
        e = max(self.exp, other.exp)
        return self.num << (e - self.exp), other.num << (e - other.exp)

    def __lt__(self, other):
        a, b = self._cmp_key(DyadicRational.coerce(other))
        return a < b

    def __le__(self, other):
        a, b = self._cmp_key(DyadicRational.coerce(other))
        return a <= b

    def __gt__(self, other):
        a, b = self._cmp_key(DyadicRational.coerce(other))
        return a > b

    def __ge__(self, other):
        a, b = self._cmp_key(DyadicRational.coerce(other))
        return a >= b

    def __eq__(self, other):
        if not isinstance(other, (DyadicRational, int, float, Fraction)):
            return NotImplemented
        o = DyadicRational.coerce(other)
        return self.num == o.num and self.exp == o.exp

    def __hash__(self):
        return hash((self.num, self.exp))

    # -- conversions ---------------------------------------------------

    def as_fraction(self) -> Fraction:
        return Fraction(self.num, 1 << self.exp)

    def to_float(self) -> float:
        """Exact conversion; raises CapError when binary64 cannot hold it."""
        if abs(self.num) >= _FLOAT_EXACT_LIMIT:
            raise CapError(f"{self!r} needs more than 53 mantissa bits")
        return float(np.ldexp(float(self.num), -self.exp))

    def scaled_floor(self, k: int) -> int:
        """``floor(self * 2**k)`` exactly."""
        shift = k - self.exp
        return self.num << shift if shift >= 0 else self.num >> -shift

    def scaled_is_integer(self, k: int) -> bool:
        shift = k - self.exp
        return shift >= 0 or self.num % (1 << -shift) == 0

    def __repr__(self):
        if self.exp == 0:
            return f"DyadicRational({self.num})"
        return f"DyadicRational({self.num}/2^{self.exp})"

    def __str__(self):
        if self.exp == 0:
            return str(self.num)
        return f"{self.num}/2^{self.exp}"


ZERO = DyadicRational(0)
ONE = DyadicRational(1)


@dataclass(frozen=True, slots=True)
class Box:
    """An m-rectangle with exact dyadic endpoints and per-axis closure.

    ``closures[j]`` is a pair ``(lower_closed, upper_closed)``; the
    semiclosed convention ``[a, b)`` is ``(True, False)``.  Degenerate
    axes (``a == b``) are allowed; a semiclosed degenerate axis is the
    empty set, a closed one is the single point.
    """

    lowers: tuple[DyadicRational, ...]
    uppers: tuple[DyadicRational, ...]
    closures: tuple[tuple[bool, bool], ...]

    def __post_init__(self):
        if not (len(self.lowers) == len(self.uppers) == len(self.closures)):
            raise ValueError("mismatched axis counts")
        if len(self.lowers) == 0:
            raise ValueError("dimension must be >= 1")
        for a, b in zip(self.lowers, self.uppers):
            if a > b:
                raise ValueError(f"lower bound {a} exceeds upper bound {b}")

    @classmethod
    def semiclosed(cls, lowers: Sequence, uppers: Sequence) -> "Box":
        lo = tuple(DyadicRational.coerce(x) for x in lowers)
        hi = tuple(DyadicRational.coerce(x) for x in uppers)
        return cls(lo, hi, tuple((True, False) for _ in lo))

    @classmethod
    def closed(cls, lowers: Sequence, uppers: Sequence) -> "Box":
        lo = tuple(DyadicRational.coerce(x) for x in lowers)
        hi = tuple(DyadicRational.coerce(x) for x in uppers)
        return cls(lo, hi, tuple((True, True) for _ in lo))

    @property
    def dim(self) -> int:
        return len(self.lowers)

    def volume(self) -> DyadicRational:
        """``prod_j (b_j - a_j)``; closure flags are irrelevant."""
        v = ONE
        for a, b in zip(self.lowers, self.uppers):
            v = v * (b - a)
        return v

    def is_empty(self) -> bool:
        """True when some axis denotes the empty point set."""
        for (a, b), (lc, uc) in zip(zip(self.lowers, self.uppers), self.closures):
            if a == b and not (lc and uc):
                return True
        return False

    def intersect(self, other: "Box") -> "Box | None":
        """Exact intersection, or None when empty."""
        lo, hi, cl = [], [], []
        for j in range(self.dim):
            a1, b1 = self.lowers[j], self.uppers[j]
            a2, b2 = other.lowers[j], other.uppers[j]
            c1, c2 = self.closures[j], other.closures[j]
            if a1 > a2 or (a1 == a2 and not c1[0]):
                a, alc = a1, c1[0]
            else:
                a, alc = a2, c2[0]
            if b1 < b2 or (b1 == b2 and not c1[1]):
                b, buc = b1, c1[1]
            else:
                b, buc = b2, c2[1]
            if a > b or (a == b and not (alc and buc)):
                return None
            lo.append(a)
            hi.append(b)
            cl.append((alc, buc))
        return Box(tuple(lo), tuple(hi), tuple(cl))

    def hull(self, other: "Box") -> "Box":
        """Smallest box containing both (closures widen to the union)."""
        lo, hi, cl = [], [], []
        for j in range(self.dim):
            a1, a2 = self.lowers[j], other.lowers[j]
            b1, b2 = self.uppers[j], other.uppers[j]
            c1, c2 = self.closures[j], other.closures[j]
            if a1 < a2 or (a1 == a2 and c1[0]):
                a, alc = a1, c1[0]
            else:
                a, alc = a2, c2[0]
            if b1 > b2 or (b1 == b2 and c1[1]):
                b, buc = b1, c1[1]
            else:
                b, buc = b2, c2[1]
            lo.append(a)
            hi.append(b)
            cl.append((alc, buc))
        return Box(tuple(lo), tuple(hi), tuple(cl))

    def float_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(lowers, uppers) as exact float arrays; raises CapError if inexact."""
        lo = np.array([a.to_float() for a in self.lowers], dtype=np.float64)
        hi = np.array([b.to_float() for b in self.uppers], dtype=np.float64)
        return lo, hi

    def __repr__(self):
        return f"Box({self.to_literal()!r})"

    def to_literal(self) -> str:
        parts = []
        for (a, b), (lc, uc) in zip(zip(self.lowers, self.uppers), self.closures):
            parts.append(f"{'[' if lc else '('}{a},{b}{']' if uc else ')'}")
        return "x".join(parts)


_AXIS_RE = re.compile(r"([\[(])([^,]+),([^)\]]+)([)\]])")


def parse_box(text: str) -> Box:
    """Parse the box literal ``[a1,b1)x[a2,b2]x...``.

    Endpoints must be exactly dyadic: integers, dyadic decimals such as
    ``0.375``, or ``p/2^e``.
    """
    text = text.strip()
    parts = re.split(r"\s*x\s*", text)
    lo, hi, cl = [], [], []
    pos = 0
    for part in parts:
        m = _AXIS_RE.fullmatch(part.strip())
        if not m:
            raise ParseError(f"bad box axis {part!r}", position=pos)
        a = DyadicRational.from_string(m.group(2))
        b = DyadicRational.from_string(m.group(3))
        if a > b:
            raise ParseError(f"axis {part!r} has lower > upper", position=pos)
        lo.append(a)
        hi.append(b)
        cl.append((m.group(1) == "[", m.group(4) == "]"))
        pos += len(part) + 1
    return Box(tuple(lo), tuple(hi), tuple(cl))


@dataclass(frozen=True, slots=True)
class DyadicCube:
    """The level-``k`` cube with integer corner ``n``:
    ``prod_j [n_j * 2**-k, (n_j + 1) * 2**-k)``.
    """

    level: int
    corner: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if self.level > LEVEL_CAP:
            raise CapError(f"level {self.level} exceeds cap {LEVEL_CAP}")
        if len(self.corner) == 0:
            raise ValueError("dimension must be >= 1")

    @property
    def dim(self) -> int:
        return len(self.corner)

    def volume(self) -> DyadicRational:
        """Exactly ``2**(-k*m)``."""
        return DyadicRational(1, self.level * self.dim)

    def lower(self, j: int) -> DyadicRational:
        return DyadicRational(self.corner[j], self.level)

    def upper(self, j: int) -> DyadicRational:
        return DyadicRational(self.corner[j] + 1, self.level)

    def children(self) -> list["DyadicCube"]:
        """The 2**m level-(k+1) cubes partitioning this one.

        Lexicographic order by corner vector; this order seeds every
        downstream deterministic enumeration.
        """
        k1 = self.level + 1
        base = tuple(2 * n for n in self.corner)
        return [
            DyadicCube(k1, tuple(b + o for b, o in zip(base, offs)))
            for offs in itertools.product((0, 1), repeat=self.dim)
        ]

    def contains(self, point: Sequence) -> bool:
        """Semiclosed membership, exact."""
        for j, p in enumerate(point):
            q = DyadicRational.coerce(p)
            if not (self.lower(j) <= q < self.upper(j)):
                return False
        return True

    def to_box(self, closed: bool = False) -> Box:
        cl = (True, True) if closed else (True, False)
        return Box(
            tuple(self.lower(j) for j in range(self.dim)),
            tuple(self.upper(j) for j in range(self.dim)),
            tuple(cl for _ in range(self.dim)),
        )

    def float_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.array(self.corner, dtype=np.float64)
        if np.any(np.abs(c) >= _FLOAT_EXACT_LIMIT):
            raise CapError(f"corner of {self!r} too large for exact floats")
        return np.ldexp(c, -self.level), np.ldexp(c + 1.0, -self.level)

    def __repr__(self):
        return f"DyadicCube(k={self.level}, corner={self.corner})"


def children(cube: DyadicCube) -> list[DyadicCube]:
    return cube.children()


def cube_containing(point: Sequence, level: int) -> DyadicCube:
    """The unique level-``level`` cube containing ``point`` (semiclosed)."""
    corner = tuple(DyadicRational.coerce(p).scaled_floor(level) for p in point)
    return DyadicCube(level, corner)


def _axis_range(a: DyadicRational, b: DyadicRational, lo_closed: bool,
                hi_closed: bool, k: int, closed_cubes: bool) -> tuple[int, int]:
    """Inclusive corner range of level-k cubes meeting the axis interval.

    With ``closed_cubes`` the cube closures ``[n*2^-k, (n+1)*2^-k]`` are
    intersected instead of the semiclosed cubes.
    """
    ta_int = a.scaled_is_integer(k)
    tb_int = b.scaled_is_integer(k)
    fa = a.scaled_floor(k)
    fb = b.scaled_floor(k)
    if not closed_cubes:
        # need (n+1)*2^-k > a regardless of the lower closure
        n_lo = fa
        # upper: n*2^-k < b, or <= b when the interval is upper-closed
        if hi_closed:
            n_hi = fb
        else:
            n_hi = fb - 1 if tb_int else fb
    else:
        if lo_closed:
            n_lo = fa - 1 if ta_int else fa  # need (n+1)*2^-k >= a
        else:
            n_lo = fa  # need (n+1)*2^-k > a
        if hi_closed:
            n_hi = fb  # need n*2^-k <= b
        else:
            n_hi = fb - 1 if tb_int else fb  # need n*2^-k < b
    return n_lo, n_hi


def corner_ranges(box: Box, level: int, closed_cubes: bool = False) -> list[tuple[int, int]]:
    """Per-axis inclusive corner ranges of level cubes meeting the box."""
    if level > LEVEL_CAP:
        raise CapError(f"level {level} exceeds cap {LEVEL_CAP}")
    if box.is_empty():
        return [(0, -1)] * box.dim
    return [
        _axis_range(a, b, lc, uc, level, closed_cubes)
        for (a, b), (lc, uc) in zip(zip(box.lowers, box.uppers), box.closures)
    ]


def count_cubes(box: Box, level: int, closed_cubes: bool = False) -> int:
    n = 1
    for lo, hi in corner_ranges(box, level, closed_cubes):
        n *= max(0, hi - lo + 1)
    return n


def cubes_intersecting(box: Box, level: int, closed_cubes: bool = False) -> Iterator[DyadicCube]:
    """All level cubes whose (semiclosed) form meets the box, lex order."""
    ranges = corner_ranges(box, level, closed_cubes)
    if any(hi < lo for lo, hi in ranges):
        return iter(())
    axes = [range(lo, hi + 1) for lo, hi in ranges]
    return (DyadicCube(level, corner) for corner in itertools.product(*axes))


def corner_blocks(box: Box, level: int, chunk: int = 1 << 16,
                  closed_cubes: bool = False) -> Iterator[np.ndarray]:
    """Corner vectors of cubes meeting the box, as int64 blocks.

    Yields ``(n, m)`` arrays in lexicographic order, each holding at most
    ``chunk`` corners.  This is the memory-bounded bulk form of
    :func:`cubes_intersecting` used by the integrator.
    """
    ranges = corner_ranges(box, level, closed_cubes)
    lens = [hi - lo + 1 for lo, hi in ranges]
    if any(n <= 0 for n in lens):
        return
    total = 1
    for n in lens:
        total *= n
    lows = np.array([lo for lo, _ in ranges], dtype=np.int64)
    shape = tuple(lens)
    start = 0
    while start < total:
        stop = min(start + chunk, total)
        flat = np.arange(start, stop, dtype=np.int64)
        offs = np.stack(np.unravel_index(flat, shape), axis=1).astype(np.int64)
        yield offs + lows
        start = stop


def volume(box: Box) -> DyadicRational:
    return box.volume()
