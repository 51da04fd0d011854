"""Bayesian uncertainty quantification engine.

Posterior inference for deterministic and stochastic (hidden-Markov)
models via particle-filter and ABC samplers, uncertainty propagation,
and a hierarchical pool/ensemble executor system.
"""

from uqengine.core import LabeledValues, Sandbox, SeedPath, rng_create, rng_for, seed_reduce

__version__ = "0.1.0"

__all__ = [
    "LabeledValues",
    "SeedPath",
    "Sandbox",
    "seed_reduce",
    "rng_create",
    "rng_for",
    "__version__",
]
