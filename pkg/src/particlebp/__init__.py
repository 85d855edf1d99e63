"""Max-product particle belief propagation for continuous-label MRFs.

Interchangeable MCMC particle samplers — slice sampling with analytically
constructed intervals, and Metropolis-Hastings with a temperature-adapted
Gaussian proposal — inside a synchronous annealed message-passing loop,
with chain diagnostics and two desk-scale experiment apps (grid image
denoising and relational mesh tracking).
"""

from .diagnostics import (
    ChainTrace,
    autocorrelation,
    empirical_risk,
    mean_autocorrelation,
    quantiles,
    rmsd,
)
from .engine import (
    AnnealingSchedule,
    EngineConfig,
    ParticleState,
    RunResult,
    chain_rng,
    derive_rng,
    map_estimate,
    mean_estimate,
    resample,
    run,
)
from .graph import LabelSpace, MrfGraph, grid_edges
from .intervals import (
    EMPTY,
    EmptySliceError,
    Interval,
    IntervalSet,
    InvalidPotentialError,
    intersect,
    interval_set,
    sample_uniform,
    union,
)
from .potentials import (
    CustomPair,
    CustomUnary,
    DomainError,
    MultiSourceQuadraticUnary,
    NoBoundsError,
    PairPotential,
    PositionQuadraticUnary,
    QuadraticUnary,
    TruncatedQuadraticPair,
    UnaryPotential,
    WeakPerspectivePair,
)
from .samplers import StepOutcome, mh_step, slice_interval, slice_step

__version__ = "1.0.0"

__all__ = [
    "AnnealingSchedule",
    "ChainTrace",
    "CustomPair",
    "CustomUnary",
    "DomainError",
    "EMPTY",
    "EmptySliceError",
    "EngineConfig",
    "Interval",
    "IntervalSet",
    "InvalidPotentialError",
    "LabelSpace",
    "MrfGraph",
    "MultiSourceQuadraticUnary",
    "NoBoundsError",
    "PairPotential",
    "ParticleState",
    "PositionQuadraticUnary",
    "QuadraticUnary",
    "RunResult",
    "StepOutcome",
    "TruncatedQuadraticPair",
    "UnaryPotential",
    "WeakPerspectivePair",
    "autocorrelation",
    "chain_rng",
    "derive_rng",
    "empirical_risk",
    "grid_edges",
    "intersect",
    "interval_set",
    "map_estimate",
    "mean_autocorrelation",
    "mean_estimate",
    "mh_step",
    "quantiles",
    "resample",
    "rmsd",
    "run",
    "sample_uniform",
    "slice_interval",
    "slice_step",
    "union",
]
