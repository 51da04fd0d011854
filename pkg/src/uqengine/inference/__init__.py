from uqengine.inference.adaptivity import accuracy, adapt_particles, fitscore
from uqengine.inference.direct import direct_loglik
from uqengine.inference.distance import norm_distance
from uqengine.inference.errors import IndependentNormalError, peak_logdensity, row_logdensity
from uqengine.inference.estimate import LikelihoodEstimate, Trajectories
from uqengine.inference.pf import (
    SerialBackend,
    pf_estimate,
    pf_resample,
    rejection_smooth,
    systematic_resample,
)

__all__ = [
    "LikelihoodEstimate",
    "Trajectories",
    "IndependentNormalError",
    "row_logdensity",
    "peak_logdensity",
    "direct_loglik",
    "pf_estimate",
    "pf_resample",
    "systematic_resample",
    "rejection_smooth",
    "SerialBackend",
    "fitscore",
    "accuracy",
    "adapt_particles",
    "norm_distance",
]
