"""Calculus on top of the integrator: antiderivative verification,
integrals depending on a parameter, and repeated (iterated) integration
with cross-checks against direct multi-dimensional integration.

The repeated path never pretends the inner integral is a number: each
inner integration returns an enclosure, and the outer integration
consumes interval-valued "function values" through the oracle
abstraction.  All identities are therefore stated as overlap or
containment of enclosures, never as float equality.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, PreconditionError
from .expr import Const, Expr, Sub, Var, eval_point, max_axis, parse_expr, permute_axes
from .geometry import Box, DyadicRational
from .integrate import SCHEMA, DyadicSumReport, default_k_max, integrate
from .intervals import Interval, down, up
from .oracles import (
    BoundOracle,
    ExprOracle,
    Region,
    _box_relation,
    from_expr,
    restrict,
)


def _coerce_expr(e, dim):
    return parse_expr(e, dim) if isinstance(e, str) else e


def _rigorous_enclosure(report: DyadicSumReport) -> Interval:
    r = report.rows[-1]
    lo = float(down(r.lower - r.pad)) if r.pad else r.lower
    hi = float(up(r.upper + r.pad)) if r.pad else r.upper
    return Interval(lo, hi)


# ---------------------------------------------------------------------------
# Newton-Leibniz
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NLCheck:
    g: str
    antiderivative: str
    a: float
    b: float
    enclosure: Interval
    nl_value: float
    contained: bool
    derivative_warnings: tuple[str, ...]
    report: DyadicSumReport

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "g": self.g,
            "F": self.antiderivative,
            "a": self.a,
            "b": self.b,
            "enclosure": list(self.enclosure.as_tuple()),
            "nl_value": self.nl_value,
            "contained": self.contained,
            "derivative_warnings": list(self.derivative_warnings),
            "report": self.report.to_json(),
        }


def newton_leibniz_check(
    g: Expr | str,
    antiderivative: Expr | str,
    a: float,
    b: float,
    epsilon: float = 1e-6,
    k_max: Optional[int] = None,
    threads: int = 1,
) -> NLCheck:
    """Does F(b) - F(a) land inside the bracket of the integral of g
    over (a, b)?

    ``contained=False`` is the actionable result, not an exception.  As
    a sanity check (warning only) F' is compared against g by central
    finite differences at 17 Chebyshev-spaced interior points.
    """
    if not a < b:
        raise PreconditionError(f"need a < b, got a={a}, b={b}")
    g_e = _coerce_expr(g, 1)
    f_e = _coerce_expr(antiderivative, 1)
    support = Box.semiclosed([DyadicRational.from_float(a)], [DyadicRational.from_float(b)])
    report = integrate(from_expr(g_e, support), epsilon, k_max, threads=threads)
    enc = _rigorous_enclosure(report)
    nl_value = eval_point(f_e, [b]) - eval_point(f_e, [a])
    contained = enc.contains(nl_value)

    warnings = []
    h = (b - a) * 1e-5
    mid, half = (a + b) / 2.0, (b - a) / 2.0
    for i in range(1, 18):
        t = mid + half * math.cos(math.pi * i / 18.0)
        try:
            fd = (eval_point(f_e, [t + h]) - eval_point(f_e, [t - h])) / (2.0 * h)
            gt = eval_point(g_e, [t])
        except DomainError:
            continue
        if abs(fd - gt) > 1e-4 * (1.0 + abs(gt)):
            warnings.append(
                f"finite difference of F at t={t:.6g} is {fd:.8g}, g(t)={gt:.8g}"
            )
    return NLCheck(
        str(g_e), str(f_e), float(a), float(b), enc, nl_value, contained,
        tuple(warnings), report,
    )


# ---------------------------------------------------------------------------
# Parameter-dependent integrals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _CoreSliceOracle(BoundOracle):
    """1-D oracle for f(x, .) with x pinned to a fixed outer box X.

    Bounds over an inner interval J enclose f(x, y) for every x in X
    and y in J; the support is the certain core of the moving limits,
    so edge boxes hull with 0 like any compactly supported function.
    """

    f: Expr
    outer_lo: tuple[float, ...]
    outer_hi: tuple[float, ...]
    support: Box

    isotonic = True

    @property
    def dim(self) -> int:
        return 1

    def enclosures(self, los, his, closed=False):
        n = los.shape[1]
        from .oracles import _box_relation as rel

        inter, contained = rel(los, his, self.support, closed)
        a_f, b_f = self.support.float_bounds()
        qlo = np.maximum(los[0], a_f[0])
        qhi = np.minimum(his[0], b_f[0])
        qhi = np.maximum(qhi, qlo)
        m = len(self.outer_lo) + 1
        blo = np.empty((m, n))
        bhi = np.empty((m, n))
        for j, (alo, ahi) in enumerate(zip(self.outer_lo, self.outer_hi)):
            blo[j] = alo
            bhi[j] = ahi
        blo[m - 1] = qlo
        bhi[m - 1] = qhi
        lo, hi = self.f.interval(blo, bhi)
        edge = inter & ~contained
        lo = np.where(edge, np.minimum(lo, 0.0), lo)
        hi = np.where(edge, np.maximum(hi, 0.0), hi)
        lo = np.where(inter, lo, 0.0)
        hi = np.where(inter, hi, 0.0)
        return lo, hi


def _mul_nonneg_width(w: float, b_lo: float, b_hi: float) -> tuple[float, float]:
    """Outward [0, w] * [b_lo, b_hi] for w >= 0."""
    cands = (0.0, w * b_lo, w * b_hi)
    return float(down(min(cands))), float(up(max(cands)))


@dataclass(frozen=True)
class ParameterIntegralOracle(BoundOracle):
    """phi(x) = integral of f(x, .) from u(x) to v(x), as an oracle over
    the outer variables.

    Bounds over an outer box X are sound enclosures of {phi(x): x in X},
    split as: a rigorously integrated core over [sup u, inf v] (where the
    slice indicator is certainly 1), plus two fringe strips of width at
    most the enclosure widths of u and v, bounded by interval products.
    Both parts shrink as X shrinks, which is what drives the outer
    integration; per-box enclosures are not nested across parent/child
    splits (the core moves), so this oracle is flagged non-isotonic and
    the adaptive integrator restores nesting by intersection.
    """

    f: Expr
    u: Expr
    v: Expr
    support: Box
    inner_epsilon: float
    inner_k_max: int

    isotonic = False

    @property
    def dim(self) -> int:
        return self.support.dim

    def enclosures(self, los, his, closed=False):
        n = los.shape[1]
        inter, contained = _box_relation(los, his, self.support, closed)
        a_f, b_f = self.support.float_bounds()
        qlo = np.maximum(los, a_f.reshape(-1, 1))
        qhi = np.minimum(his, b_f.reshape(-1, 1))
        qhi = np.maximum(qhi, qlo)
        u_lo, u_hi = self.u.interval(qlo, qhi)
        v_lo, v_hi = self.v.interval(qlo, qhi)
        out_lo = np.zeros(n)
        out_hi = np.zeros(n)
        for i in range(n):
            if not inter[i]:
                continue
            if math.isnan(u_lo[i]) or math.isnan(v_lo[i]):
                out_lo[i] = out_hi[i] = math.nan
                continue
            lo_i, hi_i = self._phi_enclosure(
                qlo[:, i], qhi[:, i],
                (float(u_lo[i]), float(u_hi[i])),
                (float(v_lo[i]), float(v_hi[i])),
            )
            if not contained[i]:
                lo_i = min(lo_i, 0.0)
                hi_i = max(hi_i, 0.0)
            out_lo[i] = lo_i
            out_hi[i] = hi_i
        return out_lo, out_hi

    def _f_over(self, xlo, xhi, ylo, yhi) -> tuple[float, float]:
        m = len(xlo) + 1
        blo = np.empty((m, 1))
        bhi = np.empty((m, 1))
        blo[:-1, 0] = xlo
        bhi[:-1, 0] = xhi
        blo[-1, 0] = ylo
        bhi[-1, 0] = yhi
        lo, hi = self.f.interval(blo, bhi)
        return float(lo[0]), float(hi[0])

    def _phi_enclosure(self, xlo, xhi, u_enc, v_enc) -> tuple[float, float]:
        from .integrate import _adaptive_run

        if u_enc[1] <= v_enc[0]:
            core_lo, core_hi = u_enc[1], v_enc[0]
            parts_lo = 0.0
            parts_hi = 0.0
            # fringe strips where the slice may or may not extend
            for (s_lo, s_hi) in (u_enc, v_enc):
                w = s_hi - s_lo
                if w > 0.0:
                    b = self._f_over(xlo, xhi, s_lo, s_hi)
                    if math.isnan(b[0]):
                        return math.nan, math.nan
                    flo, fhi = _mul_nonneg_width(w, *b)
                else:
                    flo = fhi = 0.0
                parts_lo = float(down(parts_lo + flo))
                parts_hi = float(up(parts_hi + fhi))
            if core_hi > core_lo:
                sup = Box.closed(
                    [DyadicRational.from_float(core_lo)],
                    [DyadicRational.from_float(core_hi)],
                )
                core_oracle = _CoreSliceOracle(self.f, tuple(xlo), tuple(xhi), sup)
                rep = _adaptive_run(
                    core_oracle, self.inner_epsilon, self.inner_k_max,
                    threads=1, stall_ratio=0.9,
                )
                enc = _rigorous_enclosure(rep)
                core = (enc.lo, enc.hi)
            else:
                core = (0.0, 0.0)
            return (
                float(down(core[0] + parts_lo)),
                float(up(core[1] + parts_hi)),
            )
        # no certain core: the whole slice length is uncertain in [0, wlen]
        wlen = max(0.0, v_enc[1] - u_enc[0])
        if wlen == 0.0:
            return 0.0, 0.0
        b = self._f_over(xlo, xhi, u_enc[0], v_enc[1])
        if math.isnan(b[0]):
            return math.nan, math.nan
        return _mul_nonneg_width(wlen, *b)


def parameter_integral(
    f: Expr | str,
    u: Expr | str,
    v: Expr | str,
    a: float | None = None,
    b: float | None = None,
    inner_epsilon: float = 1e-6,
    outer_box: Box | str | None = None,
    inner_k_max: Optional[int] = None,
) -> ParameterIntegralOracle:
    """Build the oracle for phi(x) = integral_{u(x)}^{v(x)} f(x, y) dy.

    The outer window is [a, b] (one outer variable) or an explicit
    ``outer_box``.  Requires u <= v on the window, validated by the
    interval check hi(u - v) <= 0.
    """
    if outer_box is None:
        if a is None or b is None:
            raise PreconditionError("supply either (a, b) or outer_box")
        if not a < b:
            raise PreconditionError(f"need a < b, got a={a}, b={b}")
        outer_box = Box.closed(
            [DyadicRational.from_float(a)], [DyadicRational.from_float(b)]
        )
    elif isinstance(outer_box, str):
        from .geometry import parse_box

        outer_box = parse_box(outer_box)
    m = outer_box.dim + 1
    f_e = _coerce_expr(f, m)
    u_e = _coerce_expr(u, outer_box.dim)
    v_e = _coerce_expr(v, outer_box.dim)
    if max_axis(u_e) > outer_box.dim or max_axis(v_e) > outer_box.dim:
        raise PreconditionError("u and v may only use the outer variables")

    from .expr import eval_interval

    blo, bhi = outer_box.float_bounds()
    dom = [(blo[j], bhi[j]) for j in range(outer_box.dim)]
    diff = eval_interval(Sub(u_e, v_e), dom)
    if diff.hi > 0.0:
        raise PreconditionError(
            f"u <= v not verified on the window (enclosure of u - v is {diff})"
        )
    if inner_k_max is None:
        inner_k_max = default_k_max(1)
    return ParameterIntegralOracle(f_e, u_e, v_e, outer_box, inner_epsilon, inner_k_max)


# ---------------------------------------------------------------------------
# Repeated integrals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RepeatedIntegralPlan:
    """Integrate out the last variable, then the remaining ones."""

    inner_family: ParameterIntegralOracle
    outer_epsilon: float
    outer_k_max: Optional[int] = None
    threads: int = 1

    @property
    def outer_dims(self) -> int:
        return self.inner_family.dim

    @property
    def inner_epsilon(self) -> float:
        return self.inner_family.inner_epsilon


@dataclass(frozen=True)
class RepeatedResult:
    enclosure: Interval
    report: DyadicSumReport

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "enclosure": list(self.enclosure.as_tuple()),
            "report": self.report.to_json(),
        }


def make_plan(
    f: Expr | str,
    u: Expr | str,
    v: Expr | str,
    a: float | None = None,
    b: float | None = None,
    epsilon: float = 1e-3,
    outer_box: Box | str | None = None,
    inner_epsilon: Optional[float] = None,
    threads: int = 1,
) -> RepeatedIntegralPlan:
    """Assemble a repeated-integral plan.  The inner tolerance defaults
    to epsilon / (4 * outer volume) so inner slack cannot dominate."""
    oracle_probe = parameter_integral(f, u, v, a, b, inner_epsilon=1.0, outer_box=outer_box)
    vol = float(oracle_probe.support.volume().as_fraction())
    if inner_epsilon is None:
        inner_epsilon = epsilon / (4.0 * max(vol, 1e-12))
    family = parameter_integral(
        f, u, v, a, b, inner_epsilon=inner_epsilon,
        outer_box=oracle_probe.support,
    )
    return RepeatedIntegralPlan(family, epsilon, threads=threads)


def repeated_integral(plan: RepeatedIntegralPlan) -> RepeatedResult:
    """Outer integration of the inner-integral oracle; the result is an
    outward-sound enclosure of the repeated integral."""
    report = integrate(
        plan.inner_family,
        plan.outer_epsilon,
        plan.outer_k_max,
        strategy="adaptive",
        threads=plan.threads,
    )
    return RepeatedResult(_rigorous_enclosure(report), report)


# ---------------------------------------------------------------------------
# Fubini cross-check
# ---------------------------------------------------------------------------


def y_simple_region(
    u: Expr | str,
    v: Expr | str,
    a: float,
    b: float,
    pad_window: float = 0.0,
) -> Region:
    """The region a <= x1 <= b, u(x1) <= x2 <= v(x1), as constraints
    with a covering dyadic bounding box."""
    u_e = _coerce_expr(u, 1)
    v_e = _coerce_expr(v, 1)
    from .expr import eval_interval
    from fractions import Fraction

    u_enc = eval_interval(u_e, [(a, b)])
    v_enc = eval_interval(v_e, [(a, b)])
    ylo = down(min(u_enc.lo, v_enc.lo) - pad_window)
    yhi = up(max(u_enc.hi, v_enc.hi) + pad_window)
    bbox = Box.closed(
        [DyadicRational.from_float(a), DyadicRational.from_float(float(ylo))],
        [DyadicRational.from_float(b), DyadicRational.from_float(float(yhi))],
    )
    cons = (
        (Sub(Const(Fraction(a)), Var(1)), False),
        (Sub(Var(1), Const(Fraction(b))), False),
        (Sub(permute_axes(u_e, {1: 1}), Var(2)), False),
        (Sub(Var(2), permute_axes(v_e, {1: 1})), False),
    )
    return Region(bbox, cons)


@dataclass(frozen=True)
class FubiniReport:
    direct: Interval
    repeated: Interval
    overlap: bool
    both_integrable: bool
    critical: bool
    direct_report: DyadicSumReport
    repeated_result: RepeatedResult
    swapped: Optional[RepeatedResult] = None
    swap_overlap: Optional[bool] = None

    def to_json(self) -> dict:
        d = {
            "schema": SCHEMA,
            "direct": list(self.direct.as_tuple()),
            "repeated": list(self.repeated.as_tuple()),
            "overlap": self.overlap,
            "both_integrable": self.both_integrable,
            "critical": self.critical,
            "direct_report": self.direct_report.to_json(),
            "repeated_report": self.repeated_result.report.to_json(),
        }
        if self.swapped is not None:
            d["swapped"] = list(self.swapped.enclosure.as_tuple())
            d["swap_overlap"] = self.swap_overlap
        return d


def fubini_check(
    f: Expr | str,
    box: Box | str | None = None,
    u: Expr | str | None = None,
    v: Expr | str | None = None,
    a: float | None = None,
    b: float | None = None,
    epsilon: float = 1e-3,
    k_max: Optional[int] = None,
    threads: int = 1,
    swap: Optional[bool] = None,
) -> FubiniReport:
    """Compute the direct 2-D integral and the repeated integral of f
    independently and report whether the enclosures overlap.

    The domain is either a 2-D ``box`` or a y-simple region described by
    (a, b, u, v).  When both paths return an integrable verdict the
    enclosures must intersect; a non-overlap in that situation is a
    CRITICAL soundness inconsistency and is flagged.

    For box domains ``swap`` (default on) also integrates with the
    variable order interchanged and checks that enclosure as well.
    """
    if box is not None:
        if isinstance(box, str):
            from .geometry import parse_box

            box = parse_box(box)
        if box.dim != 2:
            raise PreconditionError("fubini_check box domains must be 2-D")
        f_e = _coerce_expr(f, 2)
        direct_rep = integrate(from_expr(f_e, box), epsilon, k_max, threads=threads)
        ax, bx = box.lowers[0].to_float(), box.uppers[0].to_float()
        u_e = Const(box.lowers[1].as_fraction())
        v_e = Const(box.uppers[1].as_fraction())
        plan = make_plan(f_e, u_e, v_e, ax, bx, epsilon=epsilon, threads=threads)
        rep = repeated_integral(plan)
        if swap is None:
            swap = True
        swapped = swap_overlap = None
        if swap:
            f_t = permute_axes(f_e, {1: 2, 2: 1})
            ay, by = box.lowers[1].to_float(), box.uppers[1].to_float()
            u_t = Const(box.lowers[0].as_fraction())
            v_t = Const(box.uppers[0].as_fraction())
            plan_t = make_plan(f_t, u_t, v_t, ay, by, epsilon=epsilon, threads=threads)
            swapped = repeated_integral(plan_t)
    else:
        if u is None or v is None or a is None or b is None:
            raise PreconditionError("supply a box or the y-simple data (a, b, u, v)")
        f_e = _coerce_expr(f, 2)
        region = y_simple_region(u, v, a, b)
        direct_rep = integrate(
            restrict(from_expr(f_e, region.bbox), region), epsilon, k_max, threads=threads
        )
        plan = make_plan(f_e, u, v, a, b, epsilon=epsilon, threads=threads)
        rep = repeated_integral(plan)
        swapped = swap_overlap = None

    direct_enc = _rigorous_enclosure(direct_rep)
    overlap = direct_enc.intersects(rep.enclosure)
    both = (
        direct_rep.verdict.status == "integrable"
        and rep.report.verdict.status == "integrable"
    )
    critical = both and not overlap
    if swapped is not None:
        swap_overlap = direct_enc.intersects(swapped.enclosure)
        critical = critical or (both and swapped.report.verdict.status == "integrable"
                                and not swap_overlap)
    return FubiniReport(
        direct_enc, rep.enclosure, overlap, both, critical,
        direct_rep, rep, swapped, swap_overlap,
    )
