"""Exact 1-D interval-set arithmetic and closed-form sub-level-set solvers.

Interval sets are finite unions of disjoint closed intervals, kept in a
canonical sorted form.  They carry the sampling regions used by the slice
sampler: sub-level sets of potential energies, combined with union and
intersection.

All values are immutable after construction and all operations are pure
functions, so they can be shared freely between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Gaps smaller than this are merged away during canonicalization; it absorbs
# floating-point seams produced by chained union/intersect.
MERGE_GAP = 1e-12


class InvalidPotentialError(ValueError):
    """Raised when a sub-level solver is given nonsensical parameters."""


class EmptySliceError(RuntimeError):
    """Raised when uniform sampling is requested from a zero-measure set."""


@dataclass(frozen=True)
class Interval:
    """A closed interval [lo, hi]; boundary points are members."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (self.lo <= self.hi):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class IntervalSet:
    """Canonical finite union of disjoint closed intervals, sorted by lo."""

    parts: tuple[Interval, ...] = ()

    @property
    def length(self) -> float:
        return sum(p.length for p in self.parts)

    @property
    def is_empty(self) -> bool:
        return not self.parts

    def contains(self, x: float) -> bool:
        return any(p.contains(x) for p in self.parts)

    def bounds(self) -> tuple[float, float]:
        if not self.parts:
            raise ValueError("empty set has no bounds")
        return self.parts[0].lo, self.parts[-1].hi


EMPTY = IntervalSet()


def interval_set(pieces: Iterable[tuple[float, float]] | Iterable[Interval]) -> IntervalSet:
    """Build a canonical IntervalSet from arbitrary (lo, hi) pieces.

    Overlapping pieces and pieces separated by a gap < MERGE_GAP are merged.
    Pieces with lo > hi are dropped.
    """
    raw = []
    for p in pieces:
        lo, hi = (p.lo, p.hi) if isinstance(p, Interval) else (p[0], p[1])
        if lo <= hi:
            raw.append((lo, hi))
    if not raw:
        return EMPTY
    raw.sort()
    merged = [raw[0]]
    for lo, hi in raw[1:]:
        mlo, mhi = merged[-1]
        if lo <= mhi + MERGE_GAP:
            if hi > mhi:
                merged[-1] = (mlo, hi)
        else:
            merged.append((lo, hi))
    return IntervalSet(tuple(Interval(lo, hi) for lo, hi in merged))


def union(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    """Canonical union of two interval sets."""
    return interval_set(list(a.parts) + list(b.parts))


def intersect(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    """Canonical intersection of two interval sets (two-pointer sweep)."""
    out = []
    i = j = 0
    pa, pb = a.parts, b.parts
    while i < len(pa) and j < len(pb):
        lo = max(pa[i].lo, pb[j].lo)
        hi = min(pa[i].hi, pb[j].hi)
        if lo <= hi:
            out.append((lo, hi))
        if pa[i].hi < pb[j].hi:
            i += 1
        else:
            j += 1
    return interval_set(out)


def clip(a: IntervalSet, domain: Interval) -> IntervalSet:
    return intersect(a, IntervalSet((domain,)))


def quadratic_sublevel(center: float, weight: float, level: float) -> IntervalSet:
    """{x : weight * (x - center)^2 <= level} as an interval set.

    The result is unclipped; callers clip to their axis box.
    """
    if weight <= 0:
        raise InvalidPotentialError(f"quadratic weight must be positive, got {weight}")
    if level < 0:
        return EMPTY
    r = math.sqrt(level / weight)
    return IntervalSet((Interval(center - r, center + r),))


def truncated_quadratic_sublevel(
    center: float, w2: float, cap: float, level: float, domain: Interval
) -> IntervalSet:
    """Sub-level set of the truncated quadratic w2 * min(cap, (x - center)^2).

    Levels at or above the plateau w2*cap admit the whole domain; negative
    levels admit nothing.
    """
    if w2 <= 0 or cap <= 0:
        raise InvalidPotentialError(f"need w2 > 0 and cap > 0, got w2={w2} cap={cap}")
    if level < 0:
        return EMPTY
    if level >= w2 * cap:
        return IntervalSet((domain,))
    r = math.sqrt(level / w2)
    lo = max(domain.lo, center - r)
    hi = min(domain.hi, center + r)
    if lo > hi:
        return EMPTY
    return IntervalSet((Interval(lo, hi),))


def general_quadratic_sublevel(
    a: float, b: float, c: float, level: float, domain: Interval
) -> IntervalSet:
    """{x in domain : a*x^2 + b*x + c <= level} for any sign of a.

    Handles the linear (a == 0) and constant (a == b == 0) degenerations.
    """
    if a == 0.0:
        if b == 0.0:
            return IntervalSet((domain,)) if c <= level else EMPTY
        x0 = (level - c) / b
        if b > 0:
            lo, hi = domain.lo, min(domain.hi, x0)
        else:
            lo, hi = max(domain.lo, x0), domain.hi
        return IntervalSet((Interval(lo, hi),)) if lo <= hi else EMPTY
    disc = b * b - 4.0 * a * (c - level)
    if a > 0:
        if disc < 0:
            return EMPTY
        r = math.sqrt(disc)
        lo = max(domain.lo, (-b - r) / (2.0 * a))
        hi = min(domain.hi, (-b + r) / (2.0 * a))
        return IntervalSet((Interval(lo, hi),)) if lo <= hi else EMPTY
    # a < 0: the parabola opens downward; the sub-level set is the domain
    # minus the open interval between the roots (if any).
    if disc < 0:
        return IntervalSet((domain,))
    r = math.sqrt(disc)
    # roots ordered: with a < 0, (-b + r)/(2a) <= (-b - r)/(2a)
    r1 = (-b + r) / (2.0 * a)
    r2 = (-b - r) / (2.0 * a)
    pieces = []
    if domain.lo <= min(domain.hi, r1):
        pieces.append((domain.lo, min(domain.hi, r1)))
    if max(domain.lo, r2) <= domain.hi:
        pieces.append((max(domain.lo, r2), domain.hi))
    return interval_set(pieces)


def sample_uniform(s: IntervalSet, rng: np.random.Generator) -> float:
    """Draw a point uniformly from the union.

    The interval is chosen with probability proportional to its length, then
    the point is uniform within it.  Zero total length raises EmptySliceError.
    """
    u = rng.random()
    return place_uniform(s, u)


def place_uniform(s: IntervalSet, u: float) -> float:
    """Map a uniform draw u in [0, 1) onto the set by arc length."""
    total = s.length
    if total <= 0.0:
        raise EmptySliceError("cannot sample from a zero-measure interval set")
    target = u * total
    acc = 0.0
    for p in s.parts:
        nxt = acc + p.length
        if target <= nxt or p is s.parts[-1]:
            x = p.lo + (target - acc)
            return min(x, p.hi)
        acc = nxt
    raise AssertionError("unreachable")


def membership_mask(s: IntervalSet, xs: np.ndarray) -> np.ndarray:
    """Vectorized membership test; used by the grid oracles in tests."""
    mask = np.zeros(len(xs), dtype=bool)
    for p in s.parts:
        mask |= (xs >= p.lo) & (xs <= p.hi)
    return mask
