"""Chain diagnostics: autocorrelation, integrated time, ESS and thinning."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["autocorrelation", "integrated_autocorr_time", "ess_and_thinning", "EssResult"]


def autocorrelation(series: Sequence[float], maxlag: int | None = None) -> np.ndarray:
    """Normalized autocovariance by direct summation, lags 0..maxlag."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("series too short for autocorrelation")
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    maxlag = n - 1 if maxlag is None else min(maxlag, n - 1)
    if var == 0.0:
        return np.full(maxlag + 1, np.nan)
    rho = np.empty(maxlag + 1)
    rho[0] = 1.0
    for k in range(1, maxlag + 1):
        rho[k] = float(np.dot(x[:-k], x[k:])) / (n * var)
    return rho


def integrated_autocorr_time(series: Sequence[float]) -> float:
    """tau = 1 + 2 sum rho_k with the initial-positive-sequence cutoff.

    Summation stops at the first lag pair whose autocorrelation sum is
    nonpositive. A constant series has infinite integrated time.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 10:
        raise ValueError(f"chain too short for integrated time: {n}")
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        return math.inf

    def rho(k: int) -> float:
        return float(np.dot(x[:-k], x[k:])) / (n * var)

    total = 0.0
    k = 1
    while k + 1 < n:
        pair = rho(k) + rho(k + 1)
        if pair <= 0.0:
            break
        total += pair
        k += 2
    return 1.0 + 2.0 * total


@dataclass
class EssResult:
    ess: float
    thin: int
    taus: list[float]  # per-chain integrated times (max over dimensions)
    degenerate: list[int]  # indices of constant chains


def _thin_period(tau: float) -> int:
    # nearest integer, at least 1: a plain ceiling would inflate the
    # period of a white-noise chain (tau = 1 + noise) to 2
    return max(int(math.floor(tau + 0.5)), 1)


def ess_and_thinning(chains: Sequence[np.ndarray]) -> EssResult:
    """Effective sample size and thinning period across chains.

    Each chain is (samples,) or (samples, dims); the per-chain
    integrated time is the maximum over dimensions (conservative), the
    per-chain thinning period its rounded value, and the global period
    the median over chains. ESS sums samples/tau over non-degenerate
    chains.
    """
    taus: list[float] = []
    degenerate: list[int] = []
    ess = 0.0
    for index, chain in enumerate(chains):
        chain = np.atleast_2d(np.asarray(chain, dtype=np.float64).T).T
        tau = max(integrated_autocorr_time(chain[:, d]) for d in range(chain.shape[1]))
        taus.append(tau)
        if math.isinf(tau):
            degenerate.append(index)
        else:
            ess += chain.shape[0] / tau
    finite = [t for t in taus if math.isfinite(t)]
    if finite:
        thin = _thin_period(float(np.median([_thin_period(t) for t in finite])))
    else:
        thin = 1
    return EssResult(ess=ess, thin=thin, taus=taus, degenerate=degenerate)
