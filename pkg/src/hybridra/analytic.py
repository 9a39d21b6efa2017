"""Closed-form expected throughput for TA-aided random access with SIC.

Per slot, each of ``n_mmtc`` contending devices picks one of ``preamble_count``
preambles uniformly, so a preamble's occupancy u is Binomial(n_mmtc,
1/preamble_count). Among the u occupants, suppose t have unique TA indices:
those t are detected, each gets a dedicated uplink block and transmits at the
top power level. The remaining u - t devices (whose TA indices collide in
groups of two or more) each gamble on one of the t blocks and on one of the
lower power levels, where successive interference cancellation sorts them out.

The module combines three pieces, all exact except where noted:

* ``ta_allocation_probability(u, t, cell)``: probability of the TA split,
  summed over all ways to partition the u - t colliding devices into groups
  of size >= 2 and to place groups and singletons into distinct annuli.
* ``leftover_success_probability(i, level_count)``: chance that one of i
  gambling devices on a block survives the cancellation chain.
* ``expected_preamble_successes(u, t, level_count)``: t guaranteed successes
  plus the expected surviving gamblers, treating per-block occupancy as
  Binomial(u - t, 1/t). Blocks are not truly independent, which is the one
  approximation in the model; simulation quantifies the gap.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from .geometry import CellConfig, annulus_probabilities

__all__ = [
    "AnalyticReport",
    "device_grouping_count",
    "expected_mmtc_success",
    "expected_preamble_successes",
    "expected_throughput",
    "leftover_success_probability",
    "mmtc_success_terms",
    "partitions_min2",
    "ta_allocation_probability",
]


# ---------------------------------------------------------------------------
# collision-group partitions
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _partitions_cached(n: int) -> tuple[tuple[int, ...], ...]:
    # [n] itself, plus every join of a partition of a with one of n - a.
    # Joins produce duplicates; the set collapses them.
    if n == 0:
        return ((),)
    if n == 1:
        return ()
    found = {(n,)}
    for a in range(2, n // 2 + 1):
        for left in _partitions_cached(a):
            for right in _partitions_cached(n - a):
                found.add(tuple(sorted(left + right, reverse=True)))
    return tuple(sorted(found))


def partitions_min2(n: int) -> list[tuple[int, ...]]:
    """All multisets of integers >= 2 summing to n, parts non-increasing.

    n = 0 yields just the empty partition; n = 1 yields nothing, since a
    single leftover device cannot share its annulus with another leftover.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    return list(_partitions_cached(n))


def device_grouping_count(u: int, t: int, parts: tuple[int, ...]) -> int:
    """Ways to split u labelled devices into t singletons plus the given groups.

    Multinomial count: choose the t unique devices, then fill each collision
    group in turn; groups of equal size are interchangeable, hence the
    division by the factorial of each size multiplicity.
    """
    parts = tuple(parts)
    if t < 0 or u < 1:
        raise ValueError("need u >= 1 and t >= 0")
    if any((not isinstance(p, int)) or p < 2 for p in parts):
        raise ValueError("every collision group must have size >= 2")
    if t + sum(parts) != u:
        raise ValueError("t plus the partition total must equal u")
    count = math.comb(u, t)
    remaining = u - t
    for p in parts:
        count *= math.comb(remaining, p)
        remaining -= p
    for multiplicity in Counter(parts).values():
        count //= math.factorial(multiplicity)
    return count


# ---------------------------------------------------------------------------
# TA split probability
# ---------------------------------------------------------------------------

def _injection_sum(classes: tuple[tuple[int, int], ...], probs: tuple[float, ...]) -> float:
    """Sum over injective annulus assignments of the occupancy probabilities.

    ``classes`` lists (exponent, slot count) pairs: a class with exponent e
    and count c stands for c interchangeable groups that each occupy one
    annulus with probability p_annulus**e. The return value sums, over all
    ordered ways to give every slot its own annulus, the product of those
    powers. Computed by one dynamic-programming sweep over the annuli.
    """
    if not classes:
        return 1.0
    dims = tuple(c + 1 for _, c in classes)
    state = np.zeros(dims)
    state[(0,) * len(classes)] = 1.0
    for p in probs:
        prev = state.copy()
        for axis, (exponent, count) in enumerate(classes):
            take = [slice(None)] * len(classes)
            give = [slice(None)] * len(classes)
            take[axis] = slice(1, count + 1)
            give[axis] = slice(0, count)
            state[tuple(take)] += prev[tuple(give)] * p**exponent
    total = float(state[tuple(c for _, c in classes)])
    for _, count in classes:
        total *= math.factorial(count)
    return total


@lru_cache(maxsize=None)
def _ta_allocation_cached(u: int, t: int, cell: CellConfig) -> float:
    probs = tuple(annulus_probabilities(cell))
    total = 0.0
    for parts in _partitions_cached(u - t):
        if len(parts) + t > cell.annulus_count:
            continue  # needs more distinct annuli than the cell has
        classes = sorted(Counter(parts).items())
        if t:
            classes.append((1, t))
        total += device_grouping_count(u, t, parts) * _injection_sum(tuple(classes), probs)
    return total


def ta_allocation_probability(u: int, t: int, cell: CellConfig) -> float:
    """Probability that exactly t of u same-preamble devices have unique TAs.

    t = u - 1 is impossible (one leftover device cannot collide alone) and is
    rejected rather than silently returning zero.
    """
    if u < 1:
        raise ValueError("u must be at least 1")
    if not 0 <= t <= u:
        raise ValueError("t must lie in 0..u")
    if t == u - 1:
        raise ValueError("t = u - 1 is not a feasible TA split")
    return _ta_allocation_cached(u, t, cell)


# ---------------------------------------------------------------------------
# SIC success of block gamblers
# ---------------------------------------------------------------------------

def leftover_success_probability(occupants: int, level_count: int) -> float:
    """Chance that one of ``occupants`` gambling devices on a block survives.

    The block owner holds level 1, so gamblers draw uniformly from the
    level_count - 1 lower levels. A gambler survives iff its level is
    uncontended and every occupied level above it is a singleton. Counting
    assignments: either some j >= 1 of the others sit alone on j distinct
    higher levels with the rest strictly below, or all others sit strictly
    below. Exact integer combinatorics over (level_count - 1)**occupants
    equally likely assignments; 0**0 counts as 1.
    """
    i, levels = occupants, level_count
    if i < 1:
        raise ValueError("occupants must be at least 1")
    if not isinstance(levels, int) or levels < 2:
        raise ValueError("level_count must be an integer >= 2")
    favourable = 0
    for l in range(1, levels):
        favourable += (levels - 1 - l) ** (i - 1)
        for j in range(1, min(l, i)):
            favourable += (
                math.comb(i - 1, j)
                * math.comb(l - 1, j)
                * math.factorial(j)
                * (levels - 1 - l) ** (i - j - 1)
            )
    return favourable / (levels - 1) ** i


def _leftover_success_numerator(occupants: int, level_count: int) -> int:
    """Integer numerator of leftover_success_probability (denominator (L-1)**i)."""
    i, levels = occupants, level_count
    favourable = 0
    for l in range(1, levels):
        favourable += (levels - 1 - l) ** (i - 1)
        for j in range(1, min(l, i)):
            favourable += (
                math.comb(i - 1, j)
                * math.comb(l - 1, j)
                * math.factorial(j)
                * (levels - 1 - l) ** (i - j - 1)
            )
    return favourable


def expected_preamble_successes(u: int, t: int, level_count: int) -> float:
    """Expected decoded devices on a preamble with u occupants and t blocks.

    The t block owners always succeed. Each of the u - t gamblers lands on a
    uniform block, so one block sees Binomial(u - t, 1/t) gamblers; summing
    i * P(i gamblers) * P(one survives | i) over a block and scaling by t
    gives the expected surviving gamblers. Zero blocks means nobody talks.
    """
    if u < 1 or not 0 <= t <= u:
        raise ValueError("need u >= 1 and 0 <= t <= u")
    if t == u - 1:
        raise ValueError("t = u - 1 is not a feasible TA split")
    if t == 0:
        return 0.0
    total = float(t)
    gamblers = u - t
    p_block = 1.0 / t
    for i in range(1, gamblers + 1):
        pmf = (
            math.comb(gamblers, i)
            * p_block**i
            * (1.0 - p_block) ** (gamblers - i)
        )
        total += i * t * leftover_success_probability(i, level_count) * pmf
    return total


# ---------------------------------------------------------------------------
# slot-level expectations
# ---------------------------------------------------------------------------

def mmtc_success_terms(
    n_mmtc: int,
    preamble_count: int,
    level_count: int,
    cell: CellConfig,
    pmf_cutoff: float = 1e-12,
) -> list[tuple[int, int, float, float, float]]:
    """Per-(u, t) contribution table behind expected_mmtc_success.

    Rows are (u, t, occupancy pmf, TA split probability, expected successes)
    for every occupancy whose Binomial pmf reaches pmf_cutoff. Terms with
    t = 0 contribute nothing and are omitted.
    """
    if n_mmtc < 1 or preamble_count < 1:
        raise ValueError("n_mmtc and preamble_count must be positive")
    pmf = stats.binom.pmf(np.arange(n_mmtc + 1), n_mmtc, 1.0 / preamble_count)
    rows = []
    for u in range(1, n_mmtc + 1):
        if pmf[u] < pmf_cutoff:
            continue
        for t in range(1, u + 1):
            if t == u - 1:
                continue
            split = ta_allocation_probability(u, t, cell)
            if split == 0.0:
                continue
            successes = expected_preamble_successes(u, t, level_count)
            rows.append((u, t, float(pmf[u]), split, successes))
    return rows


def expected_mmtc_success(
    n_mmtc: int,
    preamble_count: int,
    level_count: int,
    cell: CellConfig,
    pmf_cutoff: float = 1e-12,
) -> float:
    """Expected decoded contention devices per slot, summed over preambles.

    Linearity over preambles: the marginal occupancy of each preamble is
    Binomial(n_mmtc, 1/preamble_count), so the slot expectation is
    preamble_count times the single-preamble expectation. Occupancies with
    pmf below pmf_cutoff are skipped; pass 0 to force the full sum.
    """
    inner = 0.0
    for _, _, pmf, split, successes in mmtc_success_terms(
        n_mmtc, preamble_count, level_count, cell, pmf_cutoff
    ):
        inner += pmf * split * successes
    return preamble_count * inner


@dataclass(frozen=True)
class AnalyticReport:
    """Closed-form slot throughput split into contention and reserved parts."""

    n_mmtc: int
    n_urllc: int
    preamble_count: int
    level_count: int
    cell: CellConfig
    underprediction_rate: float
    expected_mmtc: float
    expected_urllc: float
    terms: tuple[tuple[int, int, float, float, float], ...] = field(repr=False)

    @property
    def expected_total(self) -> float:
        return self.expected_mmtc + self.expected_urllc

    CSV_HEADER = (
        "n_mmtc,n_urllc,preamble_count,level_count,radius_m,ta_unit_m,"
        "underprediction_rate,expected_mmtc,expected_urllc,expected_total"
    )

    def to_csv_row(self) -> str:
        return ",".join(
            [
                str(self.n_mmtc),
                str(self.n_urllc),
                str(self.preamble_count),
                str(self.level_count),
                format(self.cell.radius_m, ".10g"),
                format(self.cell.ta_unit_m, ".10g"),
                format(self.underprediction_rate, ".10g"),
                format(self.expected_mmtc, ".10g"),
                format(self.expected_urllc, ".10g"),
                format(self.expected_total, ".10g"),
            ]
        )


def expected_throughput(
    n_mmtc: int,
    n_urllc: int,
    underprediction_rate: float,
    preamble_count: int,
    level_count: int,
    cell: CellConfig,
    pmf_cutoff: float = 1e-12,
) -> AnalyticReport:
    """Total expected decoded devices per slot, contention plus reserved.

    Reserved-resource devices fail only when the arrival forecaster
    under-provisions, so their term is n_urllc * (1 - underprediction_rate).
    """
    if n_urllc < 0:
        raise ValueError("n_urllc must be non-negative")
    if not 0.0 <= underprediction_rate <= 1.0:
        raise ValueError("underprediction_rate must lie in [0, 1]")
    terms = mmtc_success_terms(n_mmtc, preamble_count, level_count, cell, pmf_cutoff)
    mmtc_part = preamble_count * sum(p * s * n for _, _, p, s, n in terms)
    urllc_part = n_urllc * (1.0 - underprediction_rate)
    return AnalyticReport(
        n_mmtc=n_mmtc,
        n_urllc=n_urllc,
        preamble_count=preamble_count,
        level_count=level_count,
        cell=cell,
        underprediction_rate=underprediction_rate,
        expected_mmtc=mmtc_part,
        expected_urllc=urllc_part,
        terms=tuple(terms),
    )
