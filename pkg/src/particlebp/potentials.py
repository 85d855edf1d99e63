"""Unary and pairwise energy terms for continuous-label MRFs.

Every potential can evaluate its energy (vectorized over label arrays).
Potentials flagged ``exact_bounds`` can additionally invert themselves into
1-D sub-level interval sets along a single coordinate while the remaining
coordinates are held fixed; that is what the slice sampler consumes.
Potentials without exact bounds may return an over-approximation or decline
with NoBoundsError, in which case the sampler falls back to the full axis
and relies on its rejection guard.
"""

from __future__ import annotations

import numpy as np

from .intervals import (
    EMPTY,
    Interval,
    IntervalSet,
    general_quadratic_sublevel,
    interval_set,
    quadratic_sublevel,
    truncated_quadratic_sublevel,
    clip,
)


class NoBoundsError(RuntimeError):
    """The potential cannot produce a 1-D sub-level interval set."""


class DomainError(ValueError):
    """A label lies outside its label-space box."""


# Relative tolerance for zeroing fit coefficients that are pure
# floating-point cancellation noise (the fitted energies are exactly
# quadratic per coordinate, so genuine coefficients are well separated).
_FIT_EPS = 1e-9


def _coordinate_quadratic_sublevel(f, axis: Interval, level: float) -> IntervalSet:
    """Sub-level set of a function known to be quadratic on [axis.lo, axis.hi].

    The coefficients are recovered from three collinear evaluations, then the
    closed-form solver finishes the job.  Exact up to floating-point rounding.
    """
    t0, t2 = axis.lo, axis.hi
    t1 = 0.5 * (t0 + t2)
    h = t1 - t0
    g0, g1, g2 = f(t0), f(t1), f(t2)
    scale = max(abs(g0), abs(g1), abs(g2), abs(level), 1e-300)
    a = (g0 - 2.0 * g1 + g2) / (2.0 * h * h)
    if abs(a) * h * h <= _FIT_EPS * scale:
        a = 0.0
    b = (g2 - g0) / (2.0 * h) - 2.0 * a * t1
    if abs(b) * h <= _FIT_EPS * scale:
        b = 0.0
    c = g1 - a * t1 * t1 - b * t1
    return general_quadratic_sublevel(a, b, c, level, axis)


class UnaryPotential:
    exact_bounds = False

    def energy_many(self, X: np.ndarray) -> np.ndarray:
        """Energies for an (m, d) array of labels; returns shape (m,)."""
        raise NotImplementedError

    def energy(self, x: np.ndarray) -> float:
        return float(self.energy_many(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def sublevel_1d(self, coord: int, x: np.ndarray, level: float, axis: Interval) -> IntervalSet:
        """{v : energy(x with x[coord] = v) <= level}, clipped to axis."""
        raise NoBoundsError(f"{type(self).__name__} has no analytic bounds")

    def describe(self) -> str:
        return type(self).__name__


class PairPotential:
    exact_bounds = False

    def energy_many(self, XA: np.ndarray, XB: np.ndarray) -> np.ndarray:
        """Energies for (m, d) x (k, d) label arrays; returns shape (m, k)."""
        raise NotImplementedError

    def energy(self, xa: np.ndarray, xb: np.ndarray) -> float:
        xa = np.asarray(xa, dtype=float).reshape(1, -1)
        xb = np.asarray(xb, dtype=float).reshape(1, -1)
        return float(self.energy_many(xa, xb)[0, 0])

    def sublevel_1d(
        self,
        side: int,
        coord: int,
        x_self: np.ndarray,
        x_other: np.ndarray,
        level: float,
        axis: Interval,
    ) -> IntervalSet:
        """Sub-level set along x_self[coord] with everything else fixed.

        ``side`` says which of the potential's two arguments x_self plays
        (0 = first, 1 = second).
        """
        raise NoBoundsError(f"{type(self).__name__} has no analytic bounds")

    def describe(self) -> str:
        return type(self).__name__


class QuadraticUnary(UnaryPotential):
    """weight * (x - center)^2 on a 1-D label axis."""

    exact_bounds = True

    def __init__(self, center: float, weight: float):
        if weight <= 0:
            raise ValueError(f"weight must be positive, got {weight}")
        self.center = float(center)
        self.weight = float(weight)

    def energy_many(self, X):
        d = X[:, 0] - self.center
        return self.weight * d * d

    def sublevel_1d(self, coord, x, level, axis):
        return clip(quadratic_sublevel(self.center, self.weight, level), axis)

    def describe(self):
        return f"QuadraticUnary(center={self.center:.17g}, weight={self.weight:.17g})"


class PositionQuadraticUnary(UnaryPotential):
    """weight * ||x[coords] - target||^2; other label coordinates are free."""

    exact_bounds = True

    def __init__(self, target, weight: float = 1.0, coords=(0, 1)):
        if weight <= 0:
            raise ValueError(f"weight must be positive, got {weight}")
        self.target = np.asarray(target, dtype=float)
        self.weight = float(weight)
        self.coords = tuple(coords)
        if len(self.coords) != len(self.target):
            raise ValueError("coords and target must have the same length")

    def energy_many(self, X):
        acc = np.zeros(X.shape[0])
        for c, t in zip(self.coords, self.target):
            d = X[:, c] - t
            acc = acc + d * d
        return self.weight * acc

    def sublevel_1d(self, coord, x, level, axis):
        if coord not in self.coords:
            return IntervalSet((axis,)) if self.energy(x) <= level else EMPTY
        rem = level
        for c, t in zip(self.coords, self.target):
            if c != coord:
                rem -= self.weight * (x[c] - t) ** 2
        i = self.coords.index(coord)
        return clip(quadratic_sublevel(self.target[i], self.weight, rem), axis)

    def describe(self):
        return (
            f"PositionQuadraticUnary(target={self.target.tolist()}, "
            f"weight={self.weight:.17g}, coords={self.coords})"
        )


class MultiSourceQuadraticUnary(UnaryPotential):
    """weight * min_j ||x[coords] - target_j||^2.

    An ambiguous observation term: every node sees the same pool of candidate
    positions, so observations alone cannot tell nodes apart.  The sub-level
    set is the union of the per-target quadratic sub-level sets.
    """

    exact_bounds = True

    def __init__(self, targets, weight: float = 1.0, coords=(0, 1)):
        if weight <= 0:
            raise ValueError(f"weight must be positive, got {weight}")
        self.targets = np.asarray(targets, dtype=float)
        if self.targets.ndim != 2:
            raise ValueError("targets must be an (n, k) array")
        self.weight = float(weight)
        self.coords = tuple(coords)
        if len(self.coords) != self.targets.shape[1]:
            raise ValueError("coords and target dimensionality must agree")

    def energy_many(self, X):
        P = X[:, list(self.coords)]  # (m, k)
        d = P[:, None, :] - self.targets[None, :, :]  # (m, n, k)
        sq = np.zeros(d.shape[:2])
        for k in range(d.shape[2]):
            sq = sq + d[:, :, k] * d[:, :, k]
        return self.weight * sq.min(axis=1)

    def sublevel_1d(self, coord, x, level, axis):
        if coord not in self.coords:
            return IntervalSet((axis,)) if self.energy(x) <= level else EMPTY
        i = self.coords.index(coord)
        pieces = []
        for tgt in self.targets:
            rem = level
            for j, c in enumerate(self.coords):
                if c != coord:
                    rem -= self.weight * (x[c] - tgt[j]) ** 2
            pieces.extend(clip(quadratic_sublevel(tgt[i], self.weight, rem), axis).parts)
        return interval_set(pieces)

    def describe(self):
        return (
            f"MultiSourceQuadraticUnary(n_targets={len(self.targets)}, "
            f"weight={self.weight:.17g}, coords={self.coords})"
        )


class TruncatedQuadraticPair(PairPotential):
    """w2 * min(cap, (x_s - x_t)^2) on 1-D label axes; symmetric."""

    exact_bounds = True

    def __init__(self, w2: float, cap: float):
        if w2 <= 0 or cap <= 0:
            raise ValueError(f"need w2 > 0 and cap > 0, got w2={w2} cap={cap}")
        self.w2 = float(w2)
        self.cap = float(cap)

    def energy_many(self, XA, XB):
        d = XA[:, 0][:, None] - XB[:, 0][None, :]
        return self.w2 * np.minimum(self.cap, d * d)

    def sublevel_1d(self, side, coord, x_self, x_other, level, axis):
        return truncated_quadratic_sublevel(float(x_other[0]), self.w2, self.cap, level, axis)

    def describe(self):
        return f"TruncatedQuadraticPair(w2={self.w2:.17g}, cap={self.cap:.17g})"


class WeakPerspectivePair(PairPotential):
    """Relational pose potential on 4-D labels (px, py, ox, oy).

    Penalizes the deviation of the neighbor displacement from the reference
    displacement rotated/scaled by the node's orientation vector, symmetrized
    over both directions and normalized by the squared reference distance.
    Exactly quadratic in each label coordinate with the others fixed, so 1-D
    sub-level sets come from the closed-form quadratic solver.
    """

    exact_bounds = True

    def __init__(self, ref_a, ref_b, weight: float = 1.0):
        self.ref_a = np.asarray(ref_a, dtype=float)
        self.ref_b = np.asarray(ref_b, dtype=float)
        self.weight = float(weight)
        self.d_ab = self.ref_b - self.ref_a  # displacement a -> b
        self.den = 2.0 * (self.d_ab[0] ** 2 + self.d_ab[1] ** 2)
        if self.den <= 0:
            raise ValueError("reference positions must be distinct")
        if self.weight <= 0:
            raise ValueError(f"weight must be positive, got {self.weight}")

    def energy_many(self, XA, XB):
        pa = XA[:, None, 0:2]
        oa = XA[:, None, 2:4]
        pb = XB[None, :, 0:2]
        ob = XB[None, :, 2:4]
        dab = self.d_ab
        # R(o) d = (ox*dx - oy*dy, oy*dx + ox*dy); d_ba = -d_ab
        r1x = pb[..., 0] - pa[..., 0] - (oa[..., 0] * dab[0] - oa[..., 1] * dab[1])
        r1y = pb[..., 1] - pa[..., 1] - (oa[..., 1] * dab[0] + oa[..., 0] * dab[1])
        r2x = pa[..., 0] - pb[..., 0] - (ob[..., 0] * -dab[0] - ob[..., 1] * -dab[1])
        r2y = pa[..., 1] - pb[..., 1] - (ob[..., 1] * -dab[0] + ob[..., 0] * -dab[1])
        return self.weight * (r1x * r1x + r1y * r1y + r2x * r2x + r2y * r2y) / self.den

    def sublevel_1d(self, side, coord, x_self, x_other, level, axis):
        x_self = np.asarray(x_self, dtype=float)
        x_other = np.asarray(x_other, dtype=float)

        def f(v):
            y = x_self.copy()
            y[coord] = v
            if side == 0:
                return self.energy(y, x_other)
            return self.energy(x_other, y)

        return _coordinate_quadratic_sublevel(f, axis, level)

    def describe(self):
        return (
            f"WeakPerspectivePair(ref_a={self.ref_a.tolist()}, "
            f"ref_b={self.ref_b.tolist()}, weight={self.weight:.17g})"
        )


class CustomUnary(UnaryPotential):
    """Wraps an arbitrary vectorized energy function; declines bounds."""

    exact_bounds = False

    def __init__(self, fn, name: str = "custom"):
        self.fn = fn
        self.name = name

    def energy_many(self, X):
        return np.asarray(self.fn(X), dtype=float)

    def describe(self):
        return f"CustomUnary({self.name})"


class CustomPair(PairPotential):
    """Wraps an arbitrary vectorized pairwise energy; declines bounds."""

    exact_bounds = False

    def __init__(self, fn, name: str = "custom"):
        self.fn = fn
        self.name = name

    def energy_many(self, XA, XB):
        return np.asarray(self.fn(XA, XB), dtype=float)

    def describe(self):
        return f"CustomPair({self.name})"
