"""Chain-mixing and accuracy metrics.

Autocorrelation follows the truncated-sum estimator

    rho_k = sum_{m=1}^{M-k} (x_m - xbar)(x_{m+k} - xbar)
            / sum_{m=1}^{M-k} (x_m - xbar)^2

with the denominator truncated to the same M-k terms, evaluated on the last
50% of the chain (the first floor(M/2) samples are discarded as burn-in).
All functions are pure and freely concurrent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChainTrace:
    """One recorded MCMC chain for a (node, particle) pair."""

    samples: np.ndarray  # (M,) scalars or (M, d) label vectors
    iteration: int = 0


def _burned(samples: np.ndarray) -> np.ndarray:
    m = len(samples)
    return samples[m // 2 :]


def autocorrelation(trace: ChainTrace | np.ndarray, k_max: int) -> np.ndarray:
    """rho_0 .. rho_k_max of the chain's last 50%.

    A constant chain (zero variance) is reported as rho_0 = 1, rho_k = 0.
    """
    samples = trace.samples if isinstance(trace, ChainTrace) else np.asarray(trace)
    x = _burned(np.asarray(samples, dtype=float).reshape(len(samples)))
    if len(x) < 4:
        raise ValueError("need at least 4 samples after burn-in")
    return autocorrelation_batch(x[None, :], k_max)[0]


def autocorrelation_batch(chains: np.ndarray, k_max: int) -> np.ndarray:
    """Vectorized autocorrelation of (C, M) pre-burned chains -> (C, k_max+1)."""
    chains = np.asarray(chains, dtype=float)
    c, m = chains.shape
    if k_max >= m:
        raise ValueError(f"k_max={k_max} too large for chain length {m}")
    xc = chains - chains.mean(axis=1, keepdims=True)
    # a chain with no variation at all reports rho_0 = 1, rho_k = 0 by
    # convention (the centered residual may be rounding noise, not signal)
    constant = np.ptp(chains, axis=1) == 0.0
    rho = np.empty((c, k_max + 1))
    for k in range(k_max + 1):
        head = xc[:, : m - k]
        num = (head * xc[:, k:]).sum(axis=1)
        den = (head * head).sum(axis=1)
        ok = (den > 0.0) & ~constant
        rho[:, k] = np.where(ok, num / np.where(ok, den, 1.0), 1.0 if k == 0 else 0.0)
    return rho


def mean_autocorrelation(chains: np.ndarray, k_max: int) -> np.ndarray:
    """Mean over chains of the per-chain autocorrelation.

    ``chains`` has shape (..., M); leading axes index (node, particle).
    Burn-in is applied per chain before the estimate.
    """
    flat = np.asarray(chains, dtype=float).reshape(-1, chains.shape[-1])
    burned = flat[:, flat.shape[1] // 2 :]
    return autocorrelation_batch(burned, k_max).mean(axis=0)


def empirical_risk(estimates, truths) -> float:
    """Mean squared-Euclidean loss over matched instance pairs."""
    if len(estimates) != len(truths):
        raise ValueError("estimate/truth counts differ")
    if not estimates:
        raise ValueError("need at least one instance")
    losses = []
    for est, tru in zip(estimates, truths):
        e = np.asarray(est, dtype=float).ravel()
        t = np.asarray(tru, dtype=float).ravel()
        if e.shape != t.shape:
            raise ValueError("estimate/truth shapes differ")
        losses.append(float(((e - t) ** 2).sum()))
    return float(np.mean(losses))


def rmsd(errors) -> float:
    """Rooted mean of squared distances."""
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("rmsd of empty error list")
    return float(np.sqrt(np.mean(e * e)))


QUANTILE_LEVELS = (0.10, 0.25, 0.50, 0.75, 0.90)


def quantiles(errors) -> dict[str, float]:
    """{q10, q25, q50, q75, q90} with linear interpolation (type-7)."""
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("quantiles of empty error list")
    vals = np.quantile(e, QUANTILE_LEVELS)
    return {f"q{int(q * 100)}": float(v) for q, v in zip(QUANTILE_LEVELS, vals)}
