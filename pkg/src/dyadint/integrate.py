"""The dyadic integration engine.

For a bounded, compactly supported function the engine computes the two
explicit bracket sequences

    L_k = 2**(-k*m) * sum of per-cube lower bounds over level-k cubes
    U_k = 2**(-k*m) * sum of per-cube upper bounds

whose common limit, when the gap closes, is the integral.  Everything is
enclosure-based: per-cube bounds come from an oracle and may overshoot
the true sup/inf, so a verdict of ``integrable`` certifies the enclosure
while a stuck gap is reported as ``undecided`` rather than as a proof of
non-integrability.

Two strategies:

* ``uniform`` is the literal definition: whole-level sums for k = 0, 1,
  2, ... until the gap meets epsilon.
* ``adaptive`` (default) keeps a mixed-level active set and refines only
  cubes whose local oscillation exceeds a per-volume share of epsilon.
  The mixed-level lower/upper step functions sandwich the integrand, and
  any such dyadic sandwich pins the same value, so the reported brackets
  are sound; for indicator oracles the classification is hereditary and
  the adaptive rows coincide with the uniform ones.

All row sums are deterministic bit-for-bit for any thread count: cube
order is canonical (level, then corner lexicographically) and chunk
reductions are fixed-order verified fsums (see :mod:`.summation`).
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CapError, DomainError, PreconditionError, SoundnessError
from .geometry import LEVEL_CAP, Box, DyadicCube, corner_blocks, count_cubes
from .intervals import Interval, down, up
from .oracles import (
    BoundOracle,
    IndicatorOracle,
    Region,
    indicator,
    maximum,
    mul,
    restrict,
)
from .summation import SumAccumulator, SumResult, scaled_contributions, verified_sum

SCHEMA = "dyadint/1"

#: Default refinement depth by dimension (uniform worst case ~2**(k*m)).
DEFAULT_K_MAX = {1: 24, 2: 14, 3: 9}

_MAX_ACTIVE = 1 << 24
_CHUNK = 1 << 16


def default_k_max(dim: int) -> int:
    return DEFAULT_K_MAX.get(dim, max(4, 24 // dim))


@dataclass(frozen=True, slots=True)
class Row:
    k: int
    lower: float
    upper: float
    cubes: int
    pad: float = 0.0

    @property
    def gap(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True, slots=True)
class Verdict:
    status: str  # 'integrable' | 'undecided' | 'not_converging'
    enclosure: Optional[tuple[float, float]] = None
    level: Optional[int] = None
    gap: Optional[float] = None

    def to_json(self) -> dict:
        d: dict = {"status": self.status}
        if self.enclosure is not None:
            d["enclosure"] = list(self.enclosure)
        if self.level is not None:
            d["level"] = self.level
        if self.gap is not None:
            d["gap"] = self.gap
        return d


@dataclass
class DyadicSumReport:
    """The (k, L_k, U_k) trace plus the convergence verdict.

    ``pad`` bounds the floating-point error of any single row sum; the
    rigorous enclosure of the integral is [L - pad, U + pad] for the
    verdict row.  On exact dyadic paths pad is exactly 0.0.

    For adaptive runs ``sandwich`` exposes the final mixed-level step
    functions (levels, corners, lower values, upper values) for audit.
    """

    dim: int
    strategy: str
    epsilon: float
    k_max: int
    rows: list[Row]
    verdict: Verdict
    pad: float
    sandwich: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def enclosure(self) -> Optional[Interval]:
        if self.verdict.enclosure is None:
            return None
        return Interval(*self.verdict.enclosure)

    @property
    def final_gap(self) -> float:
        return self.rows[-1].gap if self.rows else 0.0

    def validate(self) -> None:
        """Monotone bracket chain, pad-relaxed; raises SoundnessError."""
        for r in self.rows:
            if r.lower > r.upper + 2.0 * (r.pad + 1e-300):
                raise SoundnessError(f"row {r.k}: L > U ({r.lower} > {r.upper})")
        for a, b in zip(self.rows, self.rows[1:]):
            slack = a.pad + b.pad
            if b.lower < a.lower - slack:
                raise SoundnessError(
                    f"lower sums not nondecreasing at k={b.k}: {b.lower} < {a.lower}"
                )
            if b.upper > a.upper + slack:
                raise SoundnessError(
                    f"upper sums not nonincreasing at k={b.k}: {b.upper} > {a.upper}"
                )

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "dim": self.dim,
            "strategy": self.strategy,
            "epsilon": self.epsilon,
            "k_max": self.k_max,
            "rows": [
                {"k": r.k, "L": r.lower, "U": r.upper, "cubes": r.cubes} for r in self.rows
            ],
            "verdict": self.verdict.to_json(),
            "pad": self.pad,
        }

    def to_json_str(self, indent=None) -> str:
        return json.dumps(self.to_json(), indent=indent)

    def to_csv(self) -> str:
        lines = ["k,L,U,cubes"]
        for r in self.rows:
            lines.append(f"{r.k},{r.lower!r},{r.upper!r},{r.cubes}")
        return "\n".join(lines) + "\n"


def _check_corner_magnitude(corners: np.ndarray) -> None:
    if corners.size and np.abs(corners).max() >= (1 << 52):
        raise CapError("cube corners exceed the exactly representable range")


def _eval_corners(
    oracle: BoundOracle,
    corners: np.ndarray,
    levels: np.ndarray,
    threads: int = 1,
    closed: bool = False,
):
    """Oracle enclosures for cubes given by integer corners and levels."""
    n = corners.shape[0]
    lo = np.empty(n)
    hi = np.empty(n)
    _check_corner_magnitude(corners)

    def run(start, stop):
        c = corners[start:stop].astype(np.float64)
        lv = levels[start:stop].astype(np.int64)[:, None]
        blo = np.ldexp(c, -lv).T
        bhi = np.ldexp(c + 1.0, -lv).T
        lo[start:stop], hi[start:stop] = oracle.enclosures(blo, bhi, closed=closed)

    spans = [(s, min(s + _CHUNK, n)) for s in range(0, n, _CHUNK)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(lambda sp: run(*sp), spans))
    else:
        for sp in spans:
            run(*sp)

    bad = np.isnan(lo) | np.isnan(hi)
    if bad.any():
        i = int(np.argmax(bad))
        cube = DyadicCube(int(levels[i]), tuple(int(x) for x in corners[i]))
        raise DomainError("oracle evaluation left the domain", cube=cube)
    return lo, hi


def _level_sums(
    oracle: BoundOracle, k: int, threads: int = 1, closed_cubes: bool = False
) -> tuple[SumResult, SumResult, int]:
    """Whole-level sums at level k (the literal definition).

    Cube blocks stream through in lexicographic order with bounded
    memory; with threads > 1 the blocks of each batch are evaluated
    concurrently but always accumulated in block order.
    """
    if k > LEVEL_CAP:
        raise CapError(f"level {k} exceeds cap {LEVEL_CAP}")
    support = oracle.support
    count = count_cubes(support, k, closed_cubes)
    if count == 0:
        return SumResult(0.0, 0.0, True), SumResult(0.0, 0.0, True), 0
    if count > (_MAX_ACTIVE << 6):
        raise CapError(f"level {k} enumerates {count} cubes; beyond practical limits")
    dim = oracle.dim
    acc_lo = SumAccumulator()
    acc_hi = SumAccumulator()

    def evaluate(corners: np.ndarray):
        levels = np.full(corners.shape[0], k, dtype=np.int64)
        lo, hi = _eval_corners(oracle, corners, levels, threads=1, closed=closed_cubes)
        return scaled_contributions(lo, levels, dim), scaled_contributions(hi, levels, dim)

    blocks = corner_blocks(support, k, chunk=_CHUNK, closed_cubes=closed_cubes)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            while True:
                batch = list(itertools.islice(blocks, 4 * threads))
                if not batch:
                    break
                for lo_c, hi_c in ex.map(evaluate, batch):
                    acc_lo.add(lo_c)
                    acc_hi.add(hi_c)
    else:
        for corners in blocks:
            lo_c, hi_c = evaluate(corners)
            acc_lo.add(lo_c)
            acc_hi.add(hi_c)
    return acc_lo.result(), acc_hi.result(), count


def dyadic_sums(oracle: BoundOracle, k: int, threads: int = 1) -> tuple[float, float]:
    """(L_k, U_k): the level-k lower and upper dyadic sums."""
    l_res, u_res, _ = _level_sums(oracle, k, threads=threads)
    return l_res.total, u_res.total


def _canonical_order(corners: np.ndarray, levels: np.ndarray) -> np.ndarray:
    keys = [corners[:, j] for j in range(corners.shape[1] - 1, -1, -1)]
    keys.append(levels)
    return np.lexsort(keys)


def _uniform_run(oracle, epsilon, k_max, threads) -> DyadicSumReport:
    rows: list[Row] = []
    verdict = None
    pad = 0.0
    for k in range(k_max + 1):
        l_res, u_res, count = _level_sums(oracle, k, threads=threads)
        row_pad = l_res.pad + u_res.pad
        pad = max(pad, row_pad)
        rows.append(Row(k, l_res.total, u_res.total, count, row_pad))
        if u_res.total - l_res.total <= epsilon:
            verdict = Verdict(
                "integrable",
                enclosure=(
                    float(down(l_res.total - l_res.pad)) if l_res.pad else l_res.total,
                    float(up(u_res.total + u_res.pad)) if u_res.pad else u_res.total,
                ),
                level=k,
                gap=u_res.total - l_res.total,
            )
            break
    if verdict is None:
        verdict = Verdict("undecided", gap=rows[-1].gap, level=k_max)
    report = DyadicSumReport(
        oracle.dim, "uniform", epsilon, k_max, rows, verdict, pad
    )
    if getattr(oracle, "isotonic", True):
        report.validate()
    return report


def _adaptive_run(
    oracle, epsilon, k_max, threads, stop_on_upper=False, stall_ratio=None
) -> DyadicSumReport:
    dim = oracle.dim
    support = oracle.support
    rows: list[Row] = []
    pad = 0.0

    if support.is_empty() or count_cubes(support, 0) == 0:
        rows.append(Row(0, 0.0, 0.0, 0, 0.0))
        verdict = Verdict("integrable", enclosure=(0.0, 0.0), level=0, gap=0.0)
        return DyadicSumReport(dim, "adaptive", epsilon, k_max, rows, verdict, 0.0)

    corners = np.concatenate(list(corner_blocks(support, 0, chunk=_CHUNK)))
    levels = np.zeros(corners.shape[0], dtype=np.int64)
    lo, hi = _eval_corners(oracle, corners, levels, threads=threads)

    vol_supp = float(support.volume().as_fraction())
    threshold = epsilon / max(vol_supp, 1e-300)
    is_indicator = isinstance(oracle, IndicatorOracle)
    stall_rounds = 0
    stagnant_rounds = 0
    prev_gap = None
    verdict = None

    while True:
        keep = ~((lo == 0.0) & (hi == 0.0))
        if not keep.all():
            corners, levels, lo, hi = corners[keep], levels[keep], lo[keep], hi[keep]
        if corners.shape[0] == 0:
            rows.append(Row(rows[-1].k + 1 if rows else 0, 0.0, 0.0, 0, 0.0))
            verdict = Verdict("integrable", enclosure=(0.0, 0.0),
                              level=rows[-1].k, gap=0.0)
            break
        order = _canonical_order(corners, levels)
        corners, levels, lo, hi = corners[order], levels[order], lo[order], hi[order]

        l_res = verified_sum(scaled_contributions(lo, levels, dim))
        u_res = verified_sum(scaled_contributions(hi, levels, dim))
        row_pad = l_res.pad + u_res.pad
        pad = max(pad, row_pad)
        k_now = int(levels.max())
        rows.append(Row(k_now, l_res.total, u_res.total, corners.shape[0], row_pad))
        gap = u_res.total - l_res.total

        converged = (u_res.total <= epsilon) if stop_on_upper else (gap <= epsilon)
        if converged:
            verdict = Verdict(
                "integrable",
                enclosure=(
                    float(down(l_res.total - l_res.pad)) if l_res.pad else l_res.total,
                    float(up(u_res.total + u_res.pad)) if u_res.pad else u_res.total,
                ),
                level=k_now,
                gap=gap,
            )
            break

        width = hi - lo
        refine = (width > threshold) & (levels < k_max)
        if not refine.any():
            refine = (width > 0.0) & (levels < k_max)
        if not refine.any():
            verdict = Verdict("undecided", gap=gap, level=k_now)
            break

        if stall_rounds >= 3:
            verdict = Verdict("not_converging", gap=gap, level=k_now)
            break

        # optional stagnation cutoff: stop once the gap has hit a floor
        # that refinement cannot lower (used by inner integrations whose
        # enclosures carry irreducible parameter uncertainty)
        if stall_ratio is not None and prev_gap is not None and gap >= stall_ratio * prev_gap:
            stagnant_rounds += 1
            if stagnant_rounds >= 2:
                verdict = Verdict("undecided", gap=gap, level=k_now)
                break
        else:
            stagnant_rounds = 0

        n_children = int(refine.sum()) << dim
        if corners.shape[0] + n_children > _MAX_ACTIVE:
            raise CapError(
                f"active set would exceed {_MAX_ACTIVE} cubes; "
                "raise epsilon or lower k_max"
            )

        parents = corners[refine]
        child_levels = np.repeat(levels[refine] + 1, 1 << dim)
        offsets = np.array(
            [[(i >> (dim - 1 - j)) & 1 for j in range(dim)] for i in range(1 << dim)],
            dtype=np.int64,
        )
        children = (np.repeat(parents * 2, 1 << dim, axis=0)
                    + np.tile(offsets, (parents.shape[0], 1)))
        c_lo, c_hi = _eval_corners(oracle, children, child_levels, threads=threads)
        # a child's true range is inside the parent's enclosure, so the
        # intersection is sound, tighter, and makes the bracket rows
        # monotone by construction even for non-isotonic oracles
        c_lo = np.maximum(c_lo, np.repeat(lo[refine], 1 << dim))
        c_hi = np.minimum(c_hi, np.repeat(hi[refine], 1 << dim))
        if (c_lo > c_hi).any():
            i = int(np.argmax(c_lo > c_hi))
            raise SoundnessError(
                "child enclosure disjoint from parent enclosure at cube "
                f"{DyadicCube(int(child_levels[i]), tuple(int(x) for x in children[i]))!r}"
            )

        if is_indicator:
            resolved_any = bool((c_lo == c_hi).any())
            if prev_gap is not None and gap == prev_gap and not resolved_any:
                stall_rounds += 1
            else:
                stall_rounds = 0
        prev_gap = gap

        corners = np.concatenate([corners[~refine], children])
        levels = np.concatenate([levels[~refine], child_levels])
        lo = np.concatenate([lo[~refine], c_lo])
        hi = np.concatenate([hi[~refine], c_hi])

    report = DyadicSumReport(
        dim, "adaptive", epsilon, k_max, rows, verdict, pad,
        sandwich=(levels, corners, lo, hi),
    )
    report.validate()
    return report


def integrate(
    oracle: BoundOracle,
    epsilon: float = 1e-6,
    k_max: Optional[int] = None,
    strategy: str = "adaptive",
    threads: int = 1,
) -> DyadicSumReport:
    """Bracket the integral of the oracle's function to within epsilon.

    Returns a report whose verdict is ``integrable`` (with enclosure)
    once U_k - L_k <= epsilon, ``undecided`` when the refinement cap is
    reached first, or ``not_converging`` when the adaptive refiner
    detects a stably non-shrinking indicator boundary (heuristic).
    """
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    if k_max is None:
        k_max = default_k_max(oracle.dim)
    if k_max > LEVEL_CAP:
        raise CapError(f"k_max {k_max} exceeds cap {LEVEL_CAP}")
    if strategy == "uniform":
        return _uniform_run(oracle, epsilon, k_max, threads)
    if strategy == "adaptive":
        return _adaptive_run(oracle, epsilon, k_max, threads)
    raise ValueError(f"unknown strategy {strategy!r}")


def jordan_measure(
    region: Region,
    epsilon: float = 1e-6,
    k_max: Optional[int] = None,
    strategy: str = "adaptive",
    threads: int = 1,
) -> DyadicSumReport:
    """Inner/outer Jordan brackets of a region: L_k is the inner
    approximation (cubes certainly inside), U_k the outer (cubes that
    may touch the region)."""
    return integrate(indicator(region), epsilon, k_max, strategy, threads)


@dataclass(frozen=True)
class VerySmallResult:
    verdict: bool
    witness_level: Optional[int]
    covering_volume: float
    report: DyadicSumReport

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "very_small": self.verdict,
            "witness_level": self.witness_level,
            "covering_volume": self.covering_volume,
            "report": self.report.to_json(),
        }


def is_very_small(
    region: Region,
    epsilon: float = 1e-6,
    k_max: Optional[int] = None,
    threads: int = 1,
) -> VerySmallResult:
    """Is the region Jordan-null at tolerance epsilon?

    True when the outer approximation U_k of the region's indicator
    drops to <= epsilon for some k <= k_max; the witness level and the
    covering volume at that level are reported.
    """
    o = indicator(region)
    if k_max is None:
        k_max = default_k_max(o.dim)
    report = _adaptive_run(o, epsilon, k_max, threads, stop_on_upper=True)
    for r in report.rows:
        if r.upper <= epsilon:
            return VerySmallResult(True, r.k, r.upper, report)
    return VerySmallResult(False, None, report.rows[-1].upper, report)


@dataclass(frozen=True)
class AdditivityReport:
    part1: DyadicSumReport
    part2: DyadicSumReport
    union: DyadicSumReport
    sum_enclosure: tuple[float, float]
    consistent: bool

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "part1": self.part1.to_json(),
            "part2": self.part2.to_json(),
            "union": self.union.to_json(),
            "sum_enclosure": list(self.sum_enclosure),
            "consistent": self.consistent,
        }


def additivity_check(
    oracle: BoundOracle,
    r1: Region,
    r2: Region,
    epsilon: float = 1e-6,
    k_max: Optional[int] = None,
    threads: int = 1,
) -> AdditivityReport:
    """Split-range consistency: integral over the union of two regions
    against the sum of the parts.

    Precondition: the regions are disjoint or their intersection is
    very small at the given tolerance (otherwise mass double-counts).
    """
    inter_box = r1.bbox.intersect(r2.bbox)
    if inter_box is not None and not inter_box.is_empty():
        overlap = Region(inter_box, r1.constraints + r2.constraints)
        vs = is_very_small(overlap, epsilon, k_max, threads)
        if not vs.verdict:
            raise PreconditionError(
                "region intersection is not very small "
                f"(outer volume {vs.covering_volume} at k_max)"
            )

    rep1 = integrate(restrict(oracle, r1), epsilon, k_max, threads=threads)
    rep2 = integrate(restrict(oracle, r2), epsilon, k_max, threads=threads)
    union_oracle = mul(oracle, maximum(indicator(r1), indicator(r2)))
    rep_u = integrate(union_oracle, epsilon, k_max, threads=threads)

    encs = []
    for rep in (rep1, rep2, rep_u):
        r = rep.rows[-1]
        encs.append((float(down(r.lower - r.pad)), float(up(r.upper + r.pad))))
    s_lo = float(down(encs[0][0] + encs[1][0]))
    s_hi = float(up(encs[0][1] + encs[1][1]))
    consistent = s_lo <= encs[2][1] and encs[2][0] <= s_hi
    return AdditivityReport(rep1, rep2, rep_u, (s_lo, s_hi), consistent)
