"""Interval arithmetic kernels with outward rounding.

All kernels operate elementwise on float64 arrays of lower/upper bounds
and return sound outer enclosures: whenever the exact operation could
differ from the rounded float result, the bound is widened by one or two
ulps via ``nextafter``.  Operations that are provably exact in binary64
(negation, abs, min/max, additions whose roundoff term is zero,
multiplication or division by an exact power of two) are not widened, so
dyadic-aligned computations stay bit-exact end to end.

Invalid lanes (division by an interval containing zero, sqrt of a wholly
negative range, overflow) are marked NaN and propagate; callers turn
them into :class:`~dyadint.errors.DomainError` with context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_INF = np.inf
_HALF_PI = math.pi / 2.0
_TWO_PI = 2.0 * math.pi
# Absolute slack on critical-point indices for sin/cos range analysis.
# Erring on the side of "a peak might be inside" only widens the result.
_CRIT_SLACK = 1e-9
# Below this magnitude a power-of-two product may land in the subnormal
# range and stop being exact.
_SUBNORMAL_GUARD = 2.0 ** -970


def up(x):
    return np.nextafter(x, _INF)


def down(x):
    return np.nextafter(x, -_INF)


def up2(x):
    return np.nextafter(np.nextafter(x, _INF), _INF)


def down2(x):
    return np.nextafter(np.nextafter(x, -_INF), -_INF)


@dataclass(frozen=True, slots=True)
class Interval:
    """A finite enclosure [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"non-finite enclosure [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"inverted enclosure [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(float(x), float(x))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def as_tuple(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def __repr__(self):
        return f"[{self.lo!r}, {self.hi!r}]"


def _is_exact_pow2_point(lo, hi):
    """Lanes where the interval is a single value 0 or +-2**j."""
    point = lo == hi
    mant, _ = np.frexp(lo)
    return point & ((lo == 0.0) | (np.abs(mant) == 0.5))


_TWO53 = 9007199254740992.0


def _sigbits(x):
    """Significant mantissa bits (leading 1 through last set bit); 0 for 0."""
    frac, _ = np.frexp(np.abs(x))
    m = (frac * _TWO53).astype(np.int64)
    low = (m & -m).astype(np.float64)
    tz = np.log2(np.where(low == 0.0, 1.0, low))
    return np.where(m == 0, 0.0, 53.0 - tz)


def _product_exact(a, b, p):
    """Lanes where the IEEE product a*b is provably exact.

    Either operand a power of two (or zero) shifts the other's mantissa;
    otherwise the mantissa bit counts must jointly fit 53 bits.  Results
    near the subnormal range or overflowing are never claimed exact.
    """
    sa = _sigbits(a)
    sb = _sigbits(b)
    fits = (sa + sb <= 53.0) | (sa <= 1.0) | (sb <= 1.0)
    in_range = ((np.abs(p) >= _SUBNORMAL_GUARD) | (p == 0.0)) & np.isfinite(p)
    return fits & in_range


def iv_neg(lo, hi):
    return -hi, -lo


def iv_add(lo1, hi1, lo2, hi2):
    lo = lo1 + lo2
    hi = hi1 + hi2
    lo_exact = ((lo - lo1) == lo2) & ((lo - lo2) == lo1)
    hi_exact = ((hi - hi1) == hi2) & ((hi - hi2) == hi1)
    return np.where(lo_exact, lo, down(lo)), np.where(hi_exact, hi, up(hi))


def iv_sub(lo1, hi1, lo2, hi2):
    return iv_add(lo1, hi1, -hi2, -lo2)


def iv_mul(lo1, hi1, lo2, hi2):
    p1 = lo1 * lo2
    p2 = lo1 * hi2
    p3 = hi1 * lo2
    p4 = hi1 * hi2
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    exact = (
        _product_exact(lo1, lo2, p1)
        & _product_exact(lo1, hi2, p2)
        & _product_exact(hi1, lo2, p3)
        & _product_exact(hi1, hi2, p4)
    )
    return np.where(exact, lo, down(lo)), np.where(exact, hi, up(hi))


def iv_div(lo1, hi1, lo2, hi2):
    """NaN lanes where the divisor encloses zero."""
    bad = (lo2 <= 0.0) & (hi2 >= 0.0)
    l2 = np.where(bad, np.nan, lo2)
    h2 = np.where(bad, np.nan, hi2)
    q1 = lo1 / l2
    q2 = lo1 / h2
    q3 = hi1 / l2
    q4 = hi1 / h2
    lo = np.minimum(np.minimum(q1, q2), np.minimum(q3, q4))
    hi = np.maximum(np.maximum(q1, q2), np.maximum(q3, q4))
    exact = _is_exact_pow2_point(lo2, hi2) & (
        ((np.abs(lo) >= _SUBNORMAL_GUARD) | (lo == 0.0))
        & ((np.abs(hi) >= _SUBNORMAL_GUARD) | (hi == 0.0))
    )
    return np.where(exact, lo, down(lo)), np.where(exact, hi, up(hi))


def iv_abs(lo, hi):
    neg = hi <= 0.0
    straddle = (lo < 0.0) & (hi > 0.0)
    alo = np.where(neg, -hi, np.where(straddle, 0.0, lo))
    ahi = np.maximum(-lo, hi)
    return alo, ahi


def iv_min(lo1, hi1, lo2, hi2):
    return np.minimum(lo1, lo2), np.minimum(hi1, hi2)


def iv_max(lo1, hi1, lo2, hi2):
    return np.maximum(lo1, lo2), np.maximum(hi1, hi2)


def iv_hull_zero(lo, hi):
    """Hull with the constant 0 (exact)."""
    return np.minimum(lo, 0.0), np.maximum(hi, 0.0)


def _pow_endpoint(x, n: int):
    """x**n via square-and-multiply over IEEE multiplies.

    Returns (result, exact) where exact flags lanes in which every
    intermediate product was exact.
    """
    result = np.ones_like(x)
    exact = np.ones(x.shape, dtype=bool)
    base = x
    e = n
    while e > 0:
        if e & 1:
            p = result * base
            exact &= _product_exact(result, base, p)
            result = p
        e >>= 1
        if e:
            sq = base * base
            exact &= _product_exact(base, base, sq)
            base = sq
    return result, exact


def iv_pow(lo, hi, n: int):
    """Even/odd-aware integer power, n >= 0."""
    if n == 0:
        one = np.ones_like(lo)
        return one, one.copy()
    if n == 1:
        return lo, hi
    if n % 2 == 0:
        base_lo, base_hi = iv_abs(lo, hi)
    else:
        base_lo, base_hi = lo, hi
    r_lo, ex_lo = _pow_endpoint(base_lo, n)
    r_hi, ex_hi = _pow_endpoint(base_hi, n)
    # inexact lanes: <= 2*log2(n) roundings of <= 0.5 ulp each
    rel = (2 * n.bit_length()) * 2.0 ** -52
    lo_out = np.where(ex_lo, r_lo, down(r_lo - np.abs(r_lo) * rel))
    hi_out = np.where(ex_hi, r_hi, up(r_hi + np.abs(r_hi) * rel))
    return lo_out, hi_out


def iv_sqrt(lo, hi):
    """NaN lanes where hi < 0; a range straddling 0 clamps to [0, hi]."""
    bad = hi < 0.0
    l = np.where(bad, np.nan, np.maximum(lo, 0.0))
    h = np.where(bad, np.nan, hi)
    r_lo = np.sqrt(l)
    r_hi = np.sqrt(h)
    # sqrt is correctly rounded; one ulp outward covers containment.
    return np.where(l == 0.0, r_lo, down(r_lo)), np.where(h == 0.0, r_hi, up(r_hi))


def iv_exp(lo, hi):
    r_lo = down2(np.exp(lo))
    r_hi = up2(np.exp(hi))
    return np.maximum(r_lo, 0.0), r_hi


def _contains_crit(lo, hi, offset):
    """Lanes whose interval contains a point offset + 2*pi*n (padded)."""
    n_lo = np.ceil((lo - offset) / _TWO_PI - _CRIT_SLACK)
    n_hi = np.floor((hi - offset) / _TWO_PI + _CRIT_SLACK)
    return n_lo <= n_hi


def iv_sin(lo, hi):
    slo = np.sin(lo)
    shi = np.sin(hi)
    r_lo = down2(np.minimum(slo, shi))
    r_hi = up2(np.maximum(slo, shi))
    has_max = _contains_crit(lo, hi, _HALF_PI)
    has_min = _contains_crit(lo, hi, -_HALF_PI)
    r_hi = np.where(has_max, 1.0, r_hi)
    r_lo = np.where(has_min, -1.0, r_lo)
    nan = np.isnan(lo) | np.isnan(hi)
    r_lo = np.where(nan, np.nan, np.clip(r_lo, -1.0, 1.0))
    r_hi = np.where(nan, np.nan, np.clip(r_hi, -1.0, 1.0))
    return r_lo, r_hi


def iv_cos(lo, hi):
    clo = np.cos(lo)
    chi = np.cos(hi)
    r_lo = down2(np.minimum(clo, chi))
    r_hi = up2(np.maximum(clo, chi))
    has_max = _contains_crit(lo, hi, 0.0)
    has_min = _contains_crit(lo, hi, math.pi)
    r_hi = np.where(has_max, 1.0, r_hi)
    r_lo = np.where(has_min, -1.0, r_lo)
    nan = np.isnan(lo) | np.isnan(hi)
    r_lo = np.where(nan, np.nan, np.clip(r_lo, -1.0, 1.0))
    r_hi = np.where(nan, np.nan, np.clip(r_hi, -1.0, 1.0))
    return r_lo, r_hi


def iv_scale(lo, hi, c: float):
    """Multiply by the scalar c (sound; exact when c is 0 or +-2**j)."""
    carr = np.full(1, float(c))
    if c >= 0:
        rlo, rhi = lo * c, hi * c
    else:
        rlo, rhi = hi * c, lo * c
    exact = bool(_is_exact_pow2_point(carr, carr)[0])
    if exact:
        return rlo, rhi
    return down(rlo), up(rhi)


def mark_invalid(lo, hi):
    """NaN out lanes that stopped being finite enclosures (overflow)."""
    ok = np.isfinite(lo) & np.isfinite(hi)
    return np.where(ok, lo, np.nan), np.where(ok, hi, np.nan)
