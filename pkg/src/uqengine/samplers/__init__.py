from uqengine.samplers.abc import SabcSampler
from uqengine.samplers.base import BatchRecord, ChainState, EvalRequest
from uqengine.samplers.markov import MetropolisSampler, StretchSampler
from uqengine.samplers.mc import MonteCarloSampler, mc_propagate

__all__ = [
    "ChainState",
    "BatchRecord",
    "EvalRequest",
    "MetropolisSampler",
    "StretchSampler",
    "SabcSampler",
    "MonteCarloSampler",
    "mc_propagate",
]
