"""MRF graph structure: nodes, label spaces, and potential bindings.

The energy of a configuration is

    E(x) = sum_s psi_s(x_s) + sum_s sum_{t in N(s)} psi_{s,t}(x_s, x_t)

i.e. each undirected edge contributes twice (once per direction) with the
same value for symmetric potentials.  One potential object is stored per
undirected edge; orientation bookkeeping lives here.

Graphs and potentials are immutable after construction and shared read-only
across workers.
"""

from __future__ import annotations

import numpy as np

from .intervals import Interval, IntervalSet, clip
from .potentials import DomainError, PairPotential, UnaryPotential


class LabelSpace:
    """A bounded box of label vectors, one Interval per dimension."""

    def __init__(self, box):
        parts = []
        for axis in box:
            axis = axis if isinstance(axis, Interval) else Interval(*axis)
            if not axis.lo < axis.hi:
                raise ValueError(f"label axis must have positive measure, got {axis}")
            parts.append(axis)
        self.box: tuple[Interval, ...] = tuple(parts)

    @property
    def dims(self) -> int:
        return len(self.box)

    def axis(self, coord: int) -> Interval:
        return self.box[coord]

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        if len(x) != self.dims:
            return False
        return all(a.lo <= v <= a.hi for a, v in zip(self.box, x))

    def clip(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        return np.array([min(max(v, a.lo), a.hi) for a, v in zip(self.box, x)])


class MrfGraph:
    """Immutable pairwise MRF over a fixed node set.

    Parameters
    ----------
    label_spaces : one LabelSpace per node
    unary : one UnaryPotential per node
    edges : dict mapping (a, b) with a < b to a PairPotential whose first
        argument is node a's label
    """

    def __init__(self, label_spaces, unary, edges):
        self.label_spaces: tuple[LabelSpace, ...] = tuple(label_spaces)
        self.unary: tuple[UnaryPotential, ...] = tuple(unary)
        n = len(self.label_spaces)
        if len(self.unary) != n:
            raise ValueError("need one unary potential per node")
        self._edge_pot: dict[tuple[int, int], PairPotential] = {}
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for (a, b), pot in edges.items():
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a},{b}) references unknown node")
            if a == b:
                raise ValueError(f"self-loop on node {a}")
            if a > b:
                raise ValueError(f"edge keys must be ordered, got ({a},{b})")
            self._edge_pot[(a, b)] = pot
            nbrs[a].add(b)
            nbrs[b].add(a)
        self.neighbors: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(s)) for s in nbrs
        )
        self.directed_edges: tuple[tuple[int, int], ...] = tuple(
            (s, t) for s in range(n) for t in self.neighbors[s]
        )

    @property
    def node_count(self) -> int:
        return len(self.label_spaces)

    def edge_potential(self, s: int, t: int) -> tuple[PairPotential, int]:
        """Potential of edge {s, t} plus the side s plays (0 or 1)."""
        key = (s, t) if s < t else (t, s)
        pot = self._edge_pot.get(key)
        if pot is None:
            raise KeyError(f"no edge between {s} and {t}")
        return pot, 0 if s < t else 1

    def _check_box(self, s: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if not self.label_spaces[s].contains(x):
            raise DomainError(f"label {x.tolist()} outside box of node {s}")
        return x

    def unary_energy(self, s: int, x) -> float:
        x = self._check_box(s, x)
        return self.unary[s].energy(x)

    def pair_energy(self, s: int, t: int, x_s, x_t) -> float:
        """psi_{s,t}(x_s, x_t) with the stored orientation applied."""
        x_s = self._check_box(s, x_s)
        x_t = self._check_box(t, x_t)
        pot, side = self.edge_potential(s, t)
        if side == 0:
            return pot.energy(x_s, x_t)
        return pot.energy(x_t, x_s)

    def unary_energy_many(self, s: int, X: np.ndarray) -> np.ndarray:
        return self.unary[s].energy_many(X)

    def pair_energy_many(self, s: int, t: int, XS: np.ndarray, XT: np.ndarray) -> np.ndarray:
        """psi_{s,t} on (m, d) x (k, d) arrays -> (m, k); no box checks."""
        pot, side = self.edge_potential(s, t)
        if side == 0:
            return pot.energy_many(XS, XT)
        return pot.energy_many(XT, XS).T

    def sublevel_unary_1d(self, s: int, coord: int, x, level: float) -> IntervalSet:
        axis = self.label_spaces[s].axis(coord)
        return clip(self.unary[s].sublevel_1d(coord, np.asarray(x, dtype=float), level, axis), axis)

    def sublevel_pair_1d(self, s: int, t: int, coord: int, x_s, x_t, level: float) -> IntervalSet:
        """Sub-level set along x_s[coord] of psi_{s,t}(x_s, x_t), x_t fixed."""
        axis = self.label_spaces[s].axis(coord)
        pot, side = self.edge_potential(s, t)
        out = pot.sublevel_1d(
            side, coord, np.asarray(x_s, dtype=float), np.asarray(x_t, dtype=float), level, axis
        )
        return clip(out, axis)

    def total_energy(self, config) -> float:
        """E(x) per the double-counted edge convention."""
        total = 0.0
        for s in range(self.node_count):
            total += self.unary_energy(s, config[s])
        for s, t in self.directed_edges:
            total += self.pair_energy(s, t, config[s], config[t])
        return total

    def dump(self) -> str:
        """Line-oriented plain-text listing for debugging."""
        lines = [f"nodes {self.node_count}"]
        for s in range(self.node_count):
            box = " ".join(f"[{a.lo:.17g},{a.hi:.17g}]" for a in self.label_spaces[s].box)
            lines.append(f"node {s} box {box} unary {self.unary[s].describe()}")
        for (a, b), pot in sorted(self._edge_pot.items()):
            lines.append(f"edge {a} {b} pair {pot.describe()}")
        return "\n".join(lines) + "\n"


def grid_edges(width: int, height: int):
    """4-connected grid edge list over row-major node ids."""
    edges = []
    for y in range(height):
        for x in range(width):
            s = y * width + x
            if x + 1 < width:
                edges.append((s, s + 1))
            if y + 1 < height:
                edges.append((s, s + width))
    return edges
