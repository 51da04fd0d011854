"""Information criteria and Bayes factors from point estimates.

These are approximate model-suitability indicators computed from the
maximum-a-posteriori log-likelihood and the posterior log-likelihood
samples; the Bayes factor derives from evidence surrogates and is
flagged as approximate.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

__all__ = ["model_metrics", "bayes_factor"]


def model_metrics(
    loglik_map: float,
    k: int,
    n: int,
    posterior_logliks: Sequence[float] | None = None,
    loglik_at_mean: float | None = None,
) -> dict[str, float]:
    """AIC, BIC and DIC for ``k`` parameters and ``n`` observations.

    DIC uses the effective-parameter count ``mean deviance - deviance at
    the posterior mean`` when ``loglik_at_mean`` is available, and the
    half-variance-of-deviance surrogate otherwise.
    """
    if n <= 0:
        raise ValueError(f"need a positive number of observations: {n}")
    if not math.isfinite(loglik_map):
        raise ValueError(f"loglik at MAP must be finite: {loglik_map}")
    out = {
        "AIC": 2.0 * k - 2.0 * loglik_map,
        "BIC": k * math.log(n) - 2.0 * loglik_map,
    }
    if posterior_logliks is not None:
        deviances = -2.0 * np.asarray(
            [l for l in posterior_logliks if math.isfinite(l)], dtype=np.float64
        )
        if deviances.size:
            mean_dev = float(deviances.mean())
            if loglik_at_mean is not None:
                p_eff = mean_dev - (-2.0 * loglik_at_mean)
            else:
                p_eff = 0.5 * float(deviances.var(ddof=1)) if deviances.size > 1 else 0.0
            out["DIC"] = mean_dev + p_eff
    return out


def bayes_factor(metric_a: float, metric_b: float) -> dict[str, float | bool]:
    """K = evidence(a) / evidence(b) from information-criterion surrogates.

    Uses exp(-metric/2) as the evidence surrogate; K > 10 indicates
    strong support for model a over model b.
    """
    return {"K": math.exp((metric_b - metric_a) / 2.0), "approximate": True}
