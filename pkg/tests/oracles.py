"""Independent dense-grid and brute-force oracles used across the tests."""

from __future__ import annotations

import numpy as np

from particlebp.intervals import IntervalSet, membership_mask

GRID_STEP = 1e-3
ENDPOINT_EXCLUSION = 1e-6


def grid_points(lo: float, hi: float, step: float = GRID_STEP) -> np.ndarray:
    n = int(np.floor((hi - lo) / step)) + 1
    return lo + step * np.arange(n)


def sublevel_disagreements(
    energies: np.ndarray,
    xs: np.ndarray,
    level: float,
    iset: IntervalSet,
    exclusion: float = ENDPOINT_EXCLUSION,
) -> int:
    """Interior points where the analytic set and the <=level oracle disagree.

    Points within ``exclusion`` of any computed interval endpoint are ignored:
    there the analytic and sampled answers legitimately differ by rounding.
    """
    truth = energies <= level
    claim = membership_mask(iset, xs)
    near = np.zeros(len(xs), dtype=bool)
    for p in iset.parts:
        near |= np.abs(xs - p.lo) <= exclusion
        near |= np.abs(xs - p.hi) <= exclusion
    return int(np.count_nonzero((truth != claim) & ~near))


def brute_force_map(graph, particles):
    """Exhaustive minimizer of the graph energy over the particle product space.

    Returns (best index tuple, best energy).  Intended for tiny graphs only.
    """
    import itertools

    counts = [len(p) for p in particles]
    best, best_e = None, np.inf
    for combo in itertools.product(*(range(c) for c in counts)):
        config = [particles[s][i] for s, i in enumerate(combo)]
        e = graph.total_energy(config)
        if e < best_e:
            best, best_e = combo, e
    return best, best_e
