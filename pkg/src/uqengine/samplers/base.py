"""Shared sampler state and the likelihood-evaluator interface.

A sampler proposes parameters and decides acceptance from returned
log-prior and log-likelihood values; all evaluation (particle counts,
pooling, replicates) lives behind the evaluator. Acceptance decisions
depend only on the parameters and the batch-seeded random stream, so a
replay with identical seeds reproduces the accepted chains exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from uqengine.core import LabeledValues, SeedPath
from uqengine.inference.estimate import LikelihoodEstimate

__all__ = ["ChainState", "BatchRecord", "EvalRequest", "Evaluator", "DEFAULT_RESET_REJECTIONS"]

# consecutive rejections before a stochastic likelihood is re-estimated
DEFAULT_RESET_REJECTIONS = 20


@dataclass
class EvalRequest:
    chain: int
    parameters: LabeledValues
    attempt: int = 0
    meta: dict = field(default_factory=dict)


class Evaluator(Protocol):
    """Maps parameter proposals to likelihood (or distance) estimates."""

    stochastic: bool

    def evaluate(self, requests: Sequence[EvalRequest], batch: int) -> list[LikelihoodEstimate]: ...


@dataclass
class ChainState:
    """Current value of one chain: parameters and posterior parts.

    ``origin`` is the (batch, chain) where the current value was
    accepted, linking rejected records back to their source sample.
    """

    parameters: LabeledValues
    logprior: float
    loglik: float
    estimate: LikelihoodEstimate | None = None
    origin: tuple[int, int] = (0, 0)
    consecutive_rejections: int = 0
    resets: int = 0

    @property
    def logpost(self) -> float:
        if math.isnan(self.loglik):
            return float("nan")
        return self.logprior + self.loglik


@dataclass
class BatchRecord:
    """Everything the engine persists for one sampler batch."""

    batch: int
    chains: list[ChainState]
    accepted: list[bool]
    infos: list[dict]

    def acceptance_rate(self) -> float:
        return sum(self.accepted) / max(len(self.accepted), 1)


def evaluate_pending(
    evaluator: Evaluator,
    batch: int,
    pending: list[EvalRequest],
) -> dict[int, LikelihoodEstimate]:
    """Evaluate proposals with finite prior; keyed by chain index."""
    if not pending:
        return {}
    estimates = evaluator.evaluate(pending, batch)
    return {request.chain: estimate for request, estimate in zip(pending, estimates)}


def maybe_reset_chains(
    chains: list[ChainState],
    evaluator: Evaluator,
    batch: int,
    infos: list[dict],
    threshold: int = DEFAULT_RESET_REJECTIONS,
) -> int:
    """Re-estimate stuck chains' likelihoods with fresh seeds.

    After ``threshold`` consecutive rejections the stored value of a
    stochastic likelihood may be a lucky overestimate; a fresh estimate
    at the same parameters (new attempt index, hence new seeds) unsticks
    the chain. Deterministic likelihoods are never re-estimated.
    """
    if not getattr(evaluator, "stochastic", False):
        return 0
    stuck = [k for k, c in enumerate(chains) if c.consecutive_rejections >= threshold]
    if not stuck:
        return 0
    requests = [
        EvalRequest(k, chains[k].parameters, attempt=chains[k].resets + 1) for k in stuck
    ]
    estimates = evaluator.evaluate(requests, batch)
    for k, estimate in zip(stuck, estimates):
        chain = chains[k]
        if estimate.ok or estimate.loglik == float("-inf"):
            chain.loglik = estimate.loglik
            chain.estimate = estimate
        chain.resets += 1
        chain.consecutive_rejections = 0
        infos[k]["reset"] = True
    return len(stuck)


def draw_initial_chains(
    prior,
    count: int,
    path: SeedPath,
) -> list[LabeledValues]:
    """Independent prior draws, one per chain (the default initialization)."""
    rng = path.spawn(0).rng()
    return [prior.draw(rng) for _ in range(count)]
