"""The outer max-product particle belief propagation loop.

Per iteration every node runs M MCMC moves per particle against a shared
immutable snapshot of the previous iteration's caches (synchronous/Jacobi
updates), then messages and disbeliefs are recomputed at the new particles
and normalized so each per-node and per-directed-edge array has minimum 0.

Randomness is derived from counter-based Philox streams keyed by
(seed, purpose, iteration, node), so results are identical for any worker
count or scheduling order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import beliefs, samplers
from .beliefs import (  # re-exported engine surface
    ParticleState,
    disbelief,
    disbelief_many,
    initial_state,
    message,
    message_many,
)
from .graph import MrfGraph

_MASK64 = (1 << 64) - 1

# Stream purposes (bits 60..63 of the low key word).
PURPOSE_CHAIN = 0
PURPOSE_RESAMPLE = 1
PURPOSE_INIT = 2
PURPOSE_NOISE = 3
PURPOSE_SCENE = 4


def derive_rng(seed: int, purpose: int, a: int = 0, b: int = 0) -> np.random.Generator:
    """Deterministic independent stream from a structured Philox key."""
    if not (0 <= purpose < 16 and 0 <= a < (1 << 20) and 0 <= b < (1 << 40)):
        raise ValueError("stream coordinates out of range")
    key = ((seed & _MASK64) << 64) | (purpose << 60) | (a << 40) | b
    return np.random.Generator(np.random.Philox(key=key))


def chain_rng(seed: int, iteration: int, node: int) -> np.random.Generator:
    """The random stream consumed by node ``node`` during one PBP iteration."""
    return derive_rng(seed, PURPOSE_CHAIN, iteration, node)


@dataclass(frozen=True)
class AnnealingSchedule:
    """Geometric temperature interpolation T_n = T0 * (TN/T0)^(n/N)."""

    t_start: float
    t_end: float
    steps: int

    def __post_init__(self):
        if self.t_start <= 0 or self.t_end <= 0 or self.steps < 1:
            raise ValueError("temperatures must be positive and steps >= 1")

    def temperature(self, n: int) -> float:
        if not 0 <= n <= self.steps:
            raise ValueError(f"iteration {n} outside schedule range [0, {self.steps}]")
        return self.t_start * (self.t_end / self.t_start) ** (n / self.steps)


@dataclass(frozen=True)
class EngineConfig:
    iterations: int  # PBP iterations N
    mcmc_steps: int  # MCMC moves per particle per iteration M
    particles: int  # particles per node p
    sampler: str = "slice"  # "slice" or "metropolis-hastings"
    mh_sigmas: tuple[float, ...] | None = None  # per-axis proposal scales
    mh_polar_pairs: tuple[tuple[int, int], ...] = ()
    annealing: AnnealingSchedule | None = None
    seed: int = 0
    trace_iterations: frozenset[int] = frozenset()
    workers: int = 1
    force_generic: bool = False  # skip compiled fast paths (testing)

    def __post_init__(self):
        sampler = {"mh": "metropolis-hastings"}.get(self.sampler, self.sampler)
        object.__setattr__(self, "sampler", sampler)
        object.__setattr__(self, "trace_iterations", frozenset(self.trace_iterations))
        if sampler not in ("slice", "metropolis-hastings"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.iterations < 0 or self.mcmc_steps < 0 or self.particles < 1:
            raise ValueError("need iterations >= 0, mcmc_steps >= 0, particles >= 1")
        if sampler == "metropolis-hastings":
            if self.mh_sigmas is None or any(s <= 0 for s in self.mh_sigmas):
                raise ValueError("metropolis-hastings needs positive mh_sigmas")
            object.__setattr__(self, "mh_sigmas", tuple(float(s) for s in self.mh_sigmas))
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class IterationSummary:
    iteration: int
    temperature: float
    mean_disbelief: float
    acceptance_rate: float


@dataclass
class RunResult:
    state: ParticleState
    # iteration -> (S, p, steps, d) array of chain samples
    traces: dict[int, np.ndarray] = field(default_factory=dict)
    summaries: list[IterationSummary] = field(default_factory=list)
    steps_total: int = 0
    steps_accepted: int = 0


def temperature_at(config: EngineConfig, n: int) -> float:
    if config.annealing is None:
        return 1.0
    return config.annealing.temperature(n)


def normalize(state: ParticleState) -> ParticleState:
    """Shift every disbelief row and message row so its minimum is zero."""
    disb = [b - b.min() for b in state.disbelief]
    msgs = {e: m - m.min() for e, m in state.messages.items()}
    return ParticleState(state.particles, disb, msgs, state.iteration)


def refresh(
    graph: MrfGraph, state: ParticleState, new_particles: list[np.ndarray], temp: float
) -> ParticleState:
    """Recompute messages and disbeliefs at new particles, then normalize.

    Messages are evaluated at the new particles of the receiving node while
    the min runs over the sending node's previous particles with their
    cached summaries.
    """
    msgs = {}
    for t, s in graph.directed_edges:
        msgs[(t, s)] = beliefs.message_many(graph, state, t, s, new_particles[s], temp)
    disb = []
    for s in range(graph.node_count):
        B = graph.unary_energy_many(s, new_particles[s]) / temp
        for t in graph.neighbors[s]:
            B = B + msgs[(t, s)]
        disb.append(B)
    return normalize(ParticleState(new_particles, disb, msgs, state.iteration + 1))


def _sample_node(graph, state, s, temp, config, iteration, record):
    rng = chain_rng(config.seed, iteration, s)
    p = config.particles
    d = graph.label_spaces[s].dims
    new = np.empty((p, d))
    chains = np.empty((p, config.mcmc_steps, d)) if record else None
    sigmas = np.asarray(config.mh_sigmas, dtype=float) if config.mh_sigmas else None
    accepted = 0
    for i in range(p):
        x, samples, acc = samplers.run_chain(
            graph,
            state,
            s,
            state.particles[s][i],
            temp,
            config.mcmc_steps,
            "slice" if config.sampler == "slice" else "mh",
            rng,
            sigmas=sigmas,
            polar_pairs=config.mh_polar_pairs,
            record=record,
        )
        new[i] = x
        accepted += acc
        if record:
            chains[i] = samples
    return new, chains, accepted


def _sample_iteration(graph, state, temp, config, iteration, record, fast=None):
    """Sample all nodes against the snapshot; returns particles and traces."""
    if fast is not None:
        res = fast.sample_iteration(graph, state, temp, config, iteration, record)
        if res is not None:
            return res
    nodes = range(graph.node_count)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(
                pool.map(
                    lambda s: _sample_node(graph, state, s, temp, config, iteration, record),
                    nodes,
                )
            )
    else:
        results = [
            _sample_node(graph, state, s, temp, config, iteration, record) for s in nodes
        ]
    new_particles = [r[0] for r in results]
    accepted = sum(r[2] for r in results)
    chains = None
    if record:
        chains = np.stack([r[1] for r in results])  # (S, p, M, d)
    return new_particles, chains, accepted


def run(graph: MrfGraph, init_particles, config: EngineConfig) -> RunResult:
    """Run N PBP iterations; deterministic for a fixed seed and config."""
    from . import fastpath

    state = initial_state(graph, init_particles, config.particles)
    result = RunResult(state=state)
    if config.iterations == 0:
        result.state = refresh(graph, state, state.particles, temperature_at(config, 0))
        return result
    steps_per_iter = graph.node_count * config.particles * config.mcmc_steps
    fast = None if config.force_generic else fastpath.dispatch(graph, config)
    for n in range(1, config.iterations + 1):
        temp = temperature_at(config, n)
        record = n in config.trace_iterations
        new_particles, chains, accepted = _sample_iteration(
            graph, state, temp, config, n, record, fast
        )
        if fast is not None and fast.refresh is not None:
            state = fast.refresh(graph, state, new_particles, temp)
        else:
            state = refresh(graph, state, new_particles, temp)
        if record:
            result.traces[n] = chains
        result.steps_total += steps_per_iter
        result.steps_accepted += accepted
        mean_b = float(np.mean([b.mean() for b in state.disbelief]))
        rate = accepted / steps_per_iter if steps_per_iter else float("nan")
        result.summaries.append(IterationSummary(n, temp, mean_b, rate))
    result.state = state
    return result


def map_estimate(state: ParticleState) -> list[np.ndarray]:
    """Per node, the particle of minimal disbelief (ties: lowest index)."""
    return [
        state.particles[s][int(np.argmin(state.disbelief[s]))].copy()
        for s in range(len(state.particles))
    ]


def belief_weights(disbelief_row: np.ndarray) -> np.ndarray:
    w = np.exp(-(disbelief_row - disbelief_row.min()))
    return w / w.sum()


def mean_estimate(state: ParticleState) -> list[np.ndarray]:
    """Per node, the belief-weighted mean of its particles."""
    out = []
    for s in range(len(state.particles)):
        w = belief_weights(state.disbelief[s])
        out.append(w @ state.particles[s])
    return out


def resample(state: ParticleState, rng: np.random.Generator) -> ParticleState:
    """Draw p particles per node with replacement, probability prop. to belief.

    Caches are invalidated (zeroed); they are recomputed at the start of the
    next engine run.
    """
    parts = []
    for s in range(len(state.particles)):
        p = len(state.particles[s])
        idx = rng.choice(p, size=p, p=belief_weights(state.disbelief[s]))
        parts.append(state.particles[s][idx].copy())
    disb = [np.zeros(len(b)) for b in state.disbelief]
    msgs = {e: np.zeros(len(m)) for e, m in state.messages.items()}
    return ParticleState(parts, disb, msgs, iteration=0)
