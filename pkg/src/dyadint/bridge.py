"""Bridging the dyadic definition to classical Darboux machinery.

Three bracket families for the same function:

* semiclosed dyadic sums (the engine's native definition),
* closed-cube dyadic sums, where per-cube bounds are taken over cube
  closures and enumeration includes cubes whose closure merely touches
  the support, and
* classical partition sums over arbitrary axis-aligned partitions of a
  closed rectangle.

All three bracket the same integral, so their converged enclosures must
pairwise overlap; ``equivalence_report`` runs the three families side by
side and checks exactly that.  This lives in the library rather than the
test suite because the comparison is exposed as a user-facing command.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import PreconditionError
from .geometry import Box, DyadicRational
from .integrate import SCHEMA, Row, _level_sums
from .intervals import Interval, down, iv_mul, iv_sub, up
from .oracles import BoundOracle
from .summation import verified_sum


def closed_cube_sums(oracle: BoundOracle, k: int, threads: int = 1) -> tuple[float, float]:
    """Level-k sums with bounds over cube closures.

    Differs from the semiclosed sums only through exact membership:
    closure-touching cubes at the support edge enter the sum, and edge
    cubes lose certainty of full containment.  Both families converge to
    the same value.
    """
    l_res, u_res, _ = _level_sums(oracle, k, threads=threads, closed_cubes=True)
    return l_res.total, u_res.total


@dataclass(frozen=True)
class Partition:
    """Axis-aligned partition of a closed m-rectangle into closed cells.

    ``cuts[j]`` is the strictly increasing cut list of axis j; cells are
    the products of consecutive closed subintervals.
    """

    cuts: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not self.cuts:
            raise ValueError("empty partition")
        for axis in self.cuts:
            if len(axis) < 2:
                raise PreconditionError("each axis needs at least two cut points")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise PreconditionError("cut points must be strictly increasing")

    @property
    def dim(self) -> int:
        return len(self.cuts)

    @property
    def cell_count(self) -> int:
        n = 1
        for axis in self.cuts:
            n *= len(axis) - 1
        return n

    def span(self) -> Box:
        return Box.closed(
            [DyadicRational.from_float(axis[0]) for axis in self.cuts],
            [DyadicRational.from_float(axis[-1]) for axis in self.cuts],
        )

    def refine(self, extra: Sequence[Sequence[float]]) -> "Partition":
        """New partition with extra cut points merged in per axis."""
        new = []
        for axis, add in zip(self.cuts, extra):
            pts = sorted(set(axis) | {float(x) for x in add
                                      if axis[0] < float(x) < axis[-1]})
            new.append(tuple(pts))
        return Partition(tuple(new))

    @classmethod
    def uniform(cls, span_lo: Sequence[float], span_hi: Sequence[float],
                cells_per_axis: int) -> "Partition":
        cuts = []
        for a, b in zip(span_lo, span_hi):
            pts = np.linspace(a, b, cells_per_axis + 1)
            pts[0], pts[-1] = a, b
            cuts.append(tuple(float(t) for t in pts))
        return cls(tuple(cuts))

    @classmethod
    def random_cuts(cls, span_lo: Sequence[float], span_hi: Sequence[float],
                    n_cells: int, rng: random.Random) -> "Partition":
        cuts = []
        for a, b in zip(span_lo, span_hi):
            interior = sorted(a + (b - a) * rng.random() for _ in range(n_cells - 1))
            pts = [a] + [t for t in interior if a < t < b] + [b]
            pts = sorted(set(pts))
            cuts.append(tuple(pts))
        return cls(tuple(cuts))

    @classmethod
    def from_json(cls, source) -> "Partition":
        if isinstance(source, str):
            obj = json.loads(source)
        else:
            obj = source
        return cls(tuple(tuple(float(t) for t in axis) for axis in obj["cuts"]))

    def to_json(self) -> dict:
        return {"cuts": [list(axis) for axis in self.cuts]}


def classical_sums(oracle: BoundOracle, partition: Partition,
                   threads: int = 1) -> tuple[float, float]:
    """Classical lower/upper Darboux sums of the oracle's function over
    the partition: sum over cells of (inf/sup enclosure) * cell volume.

    The partition must span a closed rectangle containing the support.
    """
    if partition.dim != oracle.dim:
        raise PreconditionError(
            f"partition dimension {partition.dim} != oracle dimension {oracle.dim}"
        )
    span = partition.span()
    sup = oracle.support
    for j in range(oracle.dim):
        if span.lowers[j] > sup.lowers[j] or span.uppers[j] < sup.uppers[j]:
            raise PreconditionError("partition does not span the oracle support")

    axes_lo = [np.asarray(axis[:-1], dtype=np.float64) for axis in partition.cuts]
    axes_hi = [np.asarray(axis[1:], dtype=np.float64) for axis in partition.cuts]
    grids_lo = np.meshgrid(*axes_lo, indexing="ij")
    grids_hi = np.meshgrid(*axes_hi, indexing="ij")
    los = np.stack([g.ravel() for g in grids_lo])
    his = np.stack([g.ravel() for g in grids_hi])

    enc_lo, enc_hi = oracle.enclosures(los, his, closed=True)
    if np.isnan(enc_lo).any() or np.isnan(enc_hi).any():
        from .errors import DomainError

        raise DomainError("oracle evaluation left the domain on a partition cell")

    vol_lo = np.ones(los.shape[1])
    vol_hi = np.ones(los.shape[1])
    for j in range(oracle.dim):
        d_lo, d_hi = iv_sub(his[j], his[j], los[j], los[j])
        vol_lo, vol_hi = iv_mul(vol_lo, vol_hi, d_lo, d_hi)
    term_lo, term_hi = iv_mul(enc_lo, enc_hi, vol_lo, vol_hi)

    l_res = verified_sum(term_lo)
    u_res = verified_sum(term_hi)
    return l_res.total, u_res.total


def default_schedule(
    support: Box,
    max_cells: int = 4096,
    n_random: int = 3,
    seed: int = 0,
) -> list[Partition]:
    """Dyadic-aligned uniform partitions of doubling size plus seeded
    random (generally non-dyadic) cut partitions over the support span."""
    lo, hi = support.float_bounds()
    rng = random.Random(seed)
    schedule = []
    cells = 1
    while cells <= max_cells:
        schedule.append(Partition.uniform(lo, hi, cells))
        cells *= 2
    for _ in range(n_random):
        n = rng.randrange(3, max(4, min(max_cells, 512)))
        schedule.append(Partition.random_cuts(lo, hi, n, rng))
    return schedule


@dataclass(frozen=True)
class EquivalenceReport:
    """Side-by-side brackets from the three families."""

    semiclosed: tuple[Row, ...]
    closed: tuple[Row, ...]
    classical: tuple[tuple[int, float, float], ...]  # (cells, L, U)
    final_semiclosed: Interval
    final_closed: Interval
    final_classical: Interval
    mutual_overlap: bool

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "semiclosed": [
                {"k": r.k, "L": r.lower, "U": r.upper, "cubes": r.cubes}
                for r in self.semiclosed
            ],
            "closed": [
                {"k": r.k, "L": r.lower, "U": r.upper, "cubes": r.cubes}
                for r in self.closed
            ],
            "classical": [
                {"cells": c, "L": l, "U": u} for (c, l, u) in self.classical
            ],
            "final": {
                "semiclosed": list(self.final_semiclosed.as_tuple()),
                "closed": list(self.final_closed.as_tuple()),
                "classical": list(self.final_classical.as_tuple()),
            },
            "mutual_overlap": self.mutual_overlap,
        }


def equivalence_report(
    oracle: BoundOracle,
    k_max: int = 10,
    schedule: Optional[Sequence[Partition]] = None,
    seed: int = 0,
    threads: int = 1,
) -> EquivalenceReport:
    """Emit semiclosed-dyadic, closed-dyadic and classical bracket
    sequences for the same oracle and assert their final enclosures
    mutually overlap."""
    if schedule is None:
        schedule = default_schedule(oracle.support, seed=seed)

    semi_rows = []
    closed_rows = []
    for k in range(k_max + 1):
        l_res, u_res, count = _level_sums(oracle, k, threads=threads)
        semi_rows.append(Row(k, l_res.total, u_res.total, count,
                             l_res.pad + u_res.pad))
        lc, uc, count_c = _level_sums(oracle, k, threads=threads, closed_cubes=True)
        closed_rows.append(Row(k, lc.total, uc.total, count_c, lc.pad + uc.pad))

    classical_rows = []
    best = None
    for part in schedule:
        l, u = classical_sums(oracle, part, threads=threads)
        classical_rows.append((part.cell_count, l, u))
        if best is None or (u - l) < (best[1] - best[0]):
            best = (l, u)

    fs = semi_rows[-1]
    fc = closed_rows[-1]
    final_semi = Interval(float(down(fs.lower - fs.pad)), float(up(fs.upper + fs.pad)))
    final_closed = Interval(float(down(fc.lower - fc.pad)), float(up(fc.upper + fc.pad)))
    final_classical = Interval(best[0], best[1])
    overlap = (
        final_semi.intersects(final_closed)
        and final_semi.intersects(final_classical)
        and final_closed.intersects(final_classical)
    )
    return EquivalenceReport(
        tuple(semi_rows), tuple(closed_rows), tuple(classical_rows),
        final_semi, final_closed, final_classical, overlap,
    )
