"""MCMC particle samplers: slice sampling with analytic intervals, and
Metropolis-Hastings with a temperature-adapted Gaussian proposal.

Both samplers are stateless functions over an immutable state snapshot and a
random stream, so distinct (node, particle) chains can run concurrently.

Random-stream discipline: every step consumes a fixed number of uniform
doubles from its generator (normals are derived from uniforms through the
inverse normal CDF).  This keeps a step-by-step chain bit-identical to the
batched fast-path kernels, which pre-draw the same stream in blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import beliefs
from .graph import MrfGraph
from .intervals import EMPTY, IntervalSet, intersect, interval_set, place_uniform
from .potentials import NoBoundsError

# Endpoint slack for the acceptance guard: analytically exact interval
# endpoints hit equality only up to floating-point rounding.
GUARD_SLACK = 1e-9


@dataclass
class StepOutcome:
    new_sample: np.ndarray
    accepted: bool
    slice_measure: float = float("nan")
    proposal: np.ndarray | None = None


@dataclass(frozen=True)
class SliceLevels:
    """Per-factor slice levels: u_bar[l] = F_l(x) - log(u_l), u_l ~ U(0,1)."""

    u_bar: np.ndarray


def draw_levels(factors: np.ndarray, u: np.ndarray) -> SliceLevels:
    u_bar = np.empty(len(factors))
    for l in range(len(factors)):
        # math.log (libm) rather than np.log keeps this bit-identical to the
        # compiled fast-path kernels
        u_bar[l] = factors[l] - math.log(u[l]) if u[l] > 0.0 else math.inf
    return SliceLevels(u_bar)


def slice_interval(
    graph: MrfGraph,
    state: beliefs.ParticleState,
    s: int,
    coord: int,
    x_s: np.ndarray,
    levels: SliceLevels,
    temp: float,
) -> IntervalSet:
    """The sampling region along one coordinate of node s.

    Intersection of the unary sub-level set with, per neighbor, the union
    over that neighbor's particles of pairwise sub-level sets at shifted
    levels.  Factors without analytic bounds contribute the full axis and
    the rejection guard compensates.
    """
    axis = graph.label_spaces[s].axis(coord)
    full = IntervalSet((axis,))
    u_bar = levels.u_bar
    try:
        region = graph.sublevel_unary_1d(s, coord, x_s, u_bar[0] * temp)
    except NoBoundsError:
        region = full
    for j, t in enumerate(graph.neighbors[s]):
        consts = state.disbelief[t] - state.messages[(s, t)]
        pieces = []
        declined = False
        for k in range(len(consts)):
            # the message carries twice the stored pairwise potential (the
            # edge's full double-counted energy share), so the potential's own
            # sub-level set is taken at half the message-level budget
            lvl = (u_bar[1 + j] - consts[k]) * temp / 2.0
            try:
                sub = graph.sublevel_pair_1d(s, t, coord, x_s, state.particles[t][k], lvl)
            except NoBoundsError:
                declined = True
                break
            pieces.extend(sub.parts)
        factor_region = full if declined else interval_set(pieces)
        region = intersect(region, factor_region)
    return region


def slice_step(
    graph: MrfGraph,
    state: beliefs.ParticleState,
    s: int,
    x: np.ndarray,
    temp: float,
    rng: np.random.Generator,
) -> StepOutcome:
    """One slice-sampling move for node s starting at label x.

    Picks a coordinate uniformly at random (multi-dimensional labels only),
    draws fresh per-factor levels, samples uniformly from the constructed
    region, and accepts iff every factor satisfies its level.  An empty
    region keeps the current sample and counts as a rejection.
    """
    d = graph.label_spaces[s].dims
    coord = int(rng.random() * d) if d > 1 else 0
    n_factors = 1 + len(graph.neighbors[s])
    u = rng.random(n_factors + 1)
    factors = beliefs.factor_values(graph, state, s, x, temp)
    levels = draw_levels(factors, u[:n_factors])
    region = slice_interval(graph, state, s, coord, x, levels, temp)
    if region.length <= 0.0:
        return StepOutcome(x, False, 0.0, None)
    xi = place_uniform(region, u[n_factors])
    cand = np.array(x, dtype=float)
    cand[coord] = xi
    cand_factors = beliefs.factor_values(graph, state, s, cand, temp)
    ok = bool(np.all(cand_factors <= levels.u_bar + GUARD_SLACK))
    return StepOutcome(cand if ok else x, ok, region.length, cand)


def mh_step(
    graph: MrfGraph,
    state: beliefs.ParticleState,
    s: int,
    x: np.ndarray,
    temp: float,
    rng: np.random.Generator,
    sigmas: np.ndarray,
    polar_pairs: tuple[tuple[int, int], ...] = (),
    current_disbelief: float | None = None,
) -> tuple[StepOutcome, float]:
    """One Metropolis-Hastings move for node s starting at label x.

    Per-axis Gaussian proposal with scale sigma * sqrt(T) (the Gaussian-power
    identity for the temperature-adapted proposal).  Axis pairs listed in
    polar_pairs are perturbed in polar coordinates (radius, angle) instead.
    Out-of-box candidates are rejected, not clipped.  Returns the outcome and
    the disbelief of the returned sample (reusable as current_disbelief).
    """
    d = graph.label_spaces[s].dims
    u = rng.random(d + 1)
    z = ndtri(u[:d])
    scale = sigmas * math.sqrt(temp)
    cand = np.array(x, dtype=float)
    polar_axes = set()
    for i, j in polar_pairs:
        polar_axes.update((i, j))
        r = math.hypot(x[i], x[j])
        phi = math.atan2(x[j], x[i])
        r2 = r + scale[i] * z[i]
        phi2 = phi + scale[j] * z[j]
        cand[i] = r2 * math.cos(phi2)
        cand[j] = r2 * math.sin(phi2)
    for a in range(d):
        if a not in polar_axes:
            cand[a] = x[a] + scale[a] * z[a]
    if current_disbelief is None:
        current_disbelief = beliefs.disbelief(graph, state, s, x, temp)
    if not graph.label_spaces[s].contains(cand):
        return StepOutcome(x, False, proposal=cand), current_disbelief
    cand_disbelief = beliefs.disbelief(graph, state, s, cand, temp)
    ua = u[d]
    threshold = current_disbelief - (math.log(ua) if ua > 0.0 else -math.inf)
    if cand_disbelief < threshold:
        return StepOutcome(cand, True, proposal=cand), cand_disbelief
    return StepOutcome(x, False, proposal=cand), current_disbelief


def run_chain(
    graph: MrfGraph,
    state: beliefs.ParticleState,
    s: int,
    x0: np.ndarray,
    temp: float,
    steps: int,
    sampler: str,
    rng: np.random.Generator,
    sigmas: np.ndarray | None = None,
    polar_pairs: tuple[tuple[int, int], ...] = (),
    record: bool = False,
):
    """Run one MCMC chain of ``steps`` moves; returns (x, samples, accepted)."""
    d = graph.label_spaces[s].dims
    x = np.array(x0, dtype=float)
    samples = np.empty((steps, d)) if record else None
    accepted = 0
    current_b = None
    for m in range(steps):
        if sampler == "slice":
            out = slice_step(graph, state, s, x, temp, rng)
        else:
            out, current_b = mh_step(
                graph, state, s, x, temp, rng, sigmas, polar_pairs, current_b
            )
        x = out.new_sample
        accepted += int(out.accepted)
        if record:
            samples[m] = x
    return x, samples, accepted
