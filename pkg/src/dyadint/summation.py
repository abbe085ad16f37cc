"""Verified deterministic summation.

Row sums are computed chunkwise with ``math.fsum`` (exactly rounded
Shewchuk summation) and combined in fixed chunk order, so the result is
bit-identical regardless of how many threads produced the chunks.  A
second fsum pass per chunk computes the *exact* residual ``sum - total``,
which yields a certified error bound: zero residuals prove the computed
sum is exact (every binary64 is a multiple of the subnormal quantum, so
a correctly rounded nonzero real never collapses to 0.0).

``pad`` below is that certified bound, slightly inflated for safety; it
is exactly 0.0 on provably exact paths, which is what lets dyadic-aligned
golden cases report a gap of literally zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CHUNK = 1 << 16


@dataclass(frozen=True, slots=True)
class SumResult:
    total: float
    pad: float
    exact: bool


class SumAccumulator:
    """Streaming verified summation; feed arrays, read one SumResult.

    Partial sums are formed per fixed-size positional chunk, so the
    result depends only on the concatenated value sequence, not on how
    it was sliced across calls.
    """

    def __init__(self):
        self._partials: list[float] = []
        self._carry: list[float] = []
        self._residual_abs = 0.0
        self._exact = True

    def add(self, values: np.ndarray) -> None:
        pending = self._carry + values.tolist()
        full = (len(pending) // CHUNK) * CHUNK
        for start in range(0, full, CHUNK):
            self._flush(pending[start:start + CHUNK])
        self._carry = pending[full:]

    def _flush(self, chunk: list[float]) -> None:
        p = math.fsum(chunk)
        if not math.isfinite(p):
            raise OverflowError("summation overflowed binary64")
        chunk.append(-p)
        r = math.fsum(chunk)
        self._partials.append(p)
        if r != 0.0:
            self._exact = False
            self._residual_abs += abs(r)

    def result(self) -> SumResult:
        partials = list(self._partials)
        exact = self._exact
        residual = self._residual_abs
        if self._carry:
            carry = list(self._carry)
            p = math.fsum(carry)
            if not math.isfinite(p):
                raise OverflowError("summation overflowed binary64")
            carry.append(-p)
            r = math.fsum(carry)
            partials.append(p)
            if r != 0.0:
                exact = False
                residual += abs(r)
        total = math.fsum(partials)
        if not math.isfinite(total):
            raise OverflowError("summation overflowed binary64")
        r_tot = math.fsum(partials + [-total])
        if r_tot != 0.0:
            exact = False
            residual += abs(r_tot)
        pad = 0.0 if exact else residual * 1.0000000000001
        return SumResult(total, pad, exact)


def verified_sum(values: np.ndarray) -> SumResult:
    """Sum a float64 array with a certified error bound."""
    if values.shape[0] == 0:
        return SumResult(0.0, 0.0, True)
    acc = SumAccumulator()
    acc.add(values)
    return acc.result()


def scaled_contributions(values: np.ndarray, levels: np.ndarray, dim: int) -> np.ndarray:
    """Per-cube terms ``value * 2**(-level*dim)``; the scaling is exact."""
    return np.ldexp(values, (-levels * dim).astype(np.int64))


def level_weighted_sum(values: np.ndarray, levels: np.ndarray, dim: int) -> SumResult:
    return verified_sum(scaled_contributions(values, levels, dim))
