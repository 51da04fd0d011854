"""Particle-count adaptivity: fitscore, accuracy and the doubling rule."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

__all__ = ["fitscore", "accuracy", "adapt_particles", "FITSCORE_THRESHOLD"]

# fitscores above this activate the adaptivity
FITSCORE_THRESHOLD = -2.0


def fitscore(
    log_weights: Sequence[np.ndarray],
    log_peaks: Sequence[np.ndarray],
    dimension: int,
) -> float:
    """Average peak-normalized log observation density per dimension.

    ``r = (1/N) sum_n (1/P) sum_p (log O_n^p(D|y) - log O_n^p(y|y)) / d``.
    Tracks sampler convergence; nonpositive for errors peaked at the
    prediction. Failed particles (-inf weights) are excluded from the
    particle average.
    """
    if dimension < 1:
        raise ValueError(f"observation dimension must be >= 1: {dimension}")
    terms = []
    for logw, logp in zip(log_weights, log_peaks):
        logw = np.asarray(logw, dtype=np.float64)
        logp = np.asarray(logp, dtype=np.float64)
        alive = np.isfinite(logw) & np.isfinite(logp)
        if not np.any(alive):
            return float("-inf")
        terms.append(float(np.mean(logw[alive] - logp[alive])) / dimension)
    if not terms:
        raise ValueError("fitscore needs at least one snapshot")
    return float(np.mean(terms))


def accuracy(log_weights: Sequence[np.ndarray]) -> float:
    """Estimated relative standard error of the likelihood estimate.

    ``delta = (1/N) sum_n sigma(O_n) / mean(O_n) / sqrt(P)`` with the
    unbiased empirical standard deviation over particles; the ratio is
    shift-invariant in log-scale, so weights are exponentiated after
    subtracting the per-snapshot maximum. A snapshot with zero mean
    weight degenerates the estimate to +inf.
    """
    terms = []
    for logw in log_weights:
        logw = np.asarray(logw, dtype=np.float64)
        if logw.size < 2:
            raise ValueError("accuracy needs at least two particles")
        shift = float(np.max(logw))
        if shift == float("-inf"):
            return float("inf")
        w = np.exp(logw - shift)
        mean = float(np.mean(w))
        if mean == 0.0:
            return float("inf")
        std = float(np.std(w, ddof=1))
        terms.append(std / mean / math.sqrt(logw.size))
    if not terms:
        raise ValueError("accuracy needs at least one snapshot")
    return float(np.mean(terms))


def adapt_particles(
    fitscore_value: float,
    accuracy_value: float,
    current: int,
    minimum: int,
    maximum: int,
    target: float = 1.0,
    margin: float = 2.0,
    locked: bool = False,
    threshold: float = FITSCORE_THRESHOLD,
) -> int:
    """Next particle count: doubled, halved or kept.

    Inactive (count unchanged) while locked or while the fitscore is
    below the threshold; otherwise the count doubles when the accuracy
    is above the envelope ``target * margin`` and halves when below
    ``target / margin``, clipped to ``[minimum, maximum]``.
    """
    if not minimum <= current <= maximum:
        raise ValueError(f"particle count {current} outside [{minimum}, {maximum}]")
    if margin <= 1.0:
        raise ValueError(f"margin must exceed 1: {margin}")
    if locked or fitscore_value < threshold:
        return current
    if accuracy_value > target * margin:
        return min(2 * current, maximum)
    if accuracy_value < target / margin:
        return max(current // 2, minimum)
    return current
