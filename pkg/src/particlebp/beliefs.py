"""Message and log-disbelief evaluation over a particle state snapshot.

Messages are min-sum summaries over the sending node's particle set:

    M_{t->s}(x_s) = min_{x_t in P_t} [ 2*psi_{s,t}(x_s, x_t)/T + B_t(x_t) - M_{s->t}(x_t) ]

The factor 2 is the double-counted edge convention: the total energy sums
the pairwise potential over ordered neighbor pairs, so each undirected edge
contributes twice (equal contributions for the supported exchange-symmetric
potentials), and a message carries the edge's full energy share.  This makes
the per-node disbeliefs the exact min-marginals of the total energy on trees.

and the log disbelief is

    B_s(x_s) = psi_s(x_s)/T + sum_{t in N(s)} M_{t->s}(x_s).

Both can be evaluated at arbitrary continuous labels, not only at particles.
The temperature divides only the raw potential terms; cached B and M values
are stored already tempered at their own iteration's temperature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import MrfGraph


@dataclass
class ParticleState:
    """Per-node particles plus cached disbeliefs and directed-edge messages.

    particles[s] is a (p, d) array.  disbelief[s] is (p,).  messages[(s, t)]
    holds M_{s->t} evaluated at node t's particles, shape (p,).
    """

    particles: list[np.ndarray]
    disbelief: list[np.ndarray]
    messages: dict[tuple[int, int], np.ndarray]
    iteration: int = 0

    def copy(self) -> "ParticleState":
        return ParticleState(
            [p.copy() for p in self.particles],
            [b.copy() for b in self.disbelief],
            {e: m.copy() for e, m in self.messages.items()},
            self.iteration,
        )


def initial_state(graph: MrfGraph, init_particles, particles_per_node: int) -> ParticleState:
    """Zero-initialized caches around the supplied particle arrays."""
    parts = []
    for s in range(graph.node_count):
        d = graph.label_spaces[s].dims
        arr = np.array(init_particles[s], dtype=float).reshape(particles_per_node, d)
        for i in range(particles_per_node):
            if not graph.label_spaces[s].contains(arr[i]):
                raise ValueError(f"initial particle {i} of node {s} outside label box")
        parts.append(arr)
    disb = [np.zeros(particles_per_node) for _ in range(graph.node_count)]
    msgs = {e: np.zeros(particles_per_node) for e in graph.directed_edges}
    return ParticleState(parts, disb, msgs, iteration=0)


def message_many(
    graph: MrfGraph, state: ParticleState, t: int, s: int, X: np.ndarray, temp: float
) -> np.ndarray:
    """M_{t->s} evaluated at an (m, d) array of labels of node s."""
    E = graph.pair_energy_many(s, t, X, state.particles[t])
    consts = state.disbelief[t] - state.messages[(s, t)]
    return ((2.0 * E) / temp + consts[None, :]).min(axis=1)


def message(graph: MrfGraph, state: ParticleState, t: int, s: int, x_s, temp: float) -> float:
    x = np.asarray(x_s, dtype=float).reshape(1, -1)
    return float(message_many(graph, state, t, s, x, temp)[0])


def disbelief_many(
    graph: MrfGraph, state: ParticleState, s: int, X: np.ndarray, temp: float
) -> np.ndarray:
    B = graph.unary_energy_many(s, X) / temp
    for t in graph.neighbors[s]:
        B = B + message_many(graph, state, t, s, X, temp)
    return B


def disbelief(graph: MrfGraph, state: ParticleState, s: int, x_s, temp: float) -> float:
    x = np.asarray(x_s, dtype=float).reshape(1, -1)
    return float(disbelief_many(graph, state, s, x, temp)[0])


def factor_values(
    graph: MrfGraph, state: ParticleState, s: int, x_s, temp: float
) -> np.ndarray:
    """Per-factor decomposition of the disbelief: [unary, messages...].

    Entry 0 is the tempered unary; entry 1+j is the message from the j-th
    neighbor (ascending node id).  The sum equals disbelief(s, x_s).
    """
    x = np.asarray(x_s, dtype=float).reshape(1, -1)
    out = np.empty(1 + len(graph.neighbors[s]))
    out[0] = graph.unary_energy_many(s, x)[0] / temp
    for j, t in enumerate(graph.neighbors[s]):
        out[1 + j] = message_many(graph, state, t, s, x, temp)[0]
    return out
