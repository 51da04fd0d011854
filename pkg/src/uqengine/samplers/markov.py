"""Markov-type posterior samplers: Metropolis random walk and the
affine-invariant ensemble (stretch move).

Each batch pre-draws every random number in a fixed chain order from
the batch-seeded stream, so the accept/reject sequence is independent
of which proposals get skipped (outside the prior support) and of the
evaluation backend. Rejected steps keep the previous parameters; a
proposal whose likelihood estimate failed counts as a rejection.
"""

from __future__ import annotations

import math

import numpy as np

from uqengine.core import LabeledValues, SeedPath
from uqengine.distributions import Distribution
from uqengine.samplers.base import (
    BatchRecord,
    ChainState,
    EvalRequest,
    Evaluator,
    draw_initial_chains,
    evaluate_pending,
    maybe_reset_chains,
)

__all__ = ["MetropolisSampler", "StretchSampler"]

NEGINF = float("-inf")


class _MarkovBase:
    def __init__(self, prior: Distribution, chains: int, path: SeedPath, reset_after: int = 20):
        if chains < 1:
            raise ValueError(f"need at least one chain: {chains}")
        self.prior = prior
        self.chains = chains
        self.path = path
        self.reset_after = reset_after
        self.states: list[ChainState] = []
        self.labels: tuple[str, ...] = prior.labels

    def init(self, evaluator: Evaluator) -> BatchRecord:
        """Draw the initial ensemble from the prior and evaluate it (batch 0)."""
        initials = draw_initial_chains(self.prior, self.chains, self.path)
        requests = [EvalRequest(k, theta) for k, theta in enumerate(initials)]
        estimates = evaluator.evaluate(requests, 0)
        self.states = []
        infos = []
        for k, (theta, estimate) in enumerate(zip(initials, estimates)):
            self.states.append(
                ChainState(
                    parameters=theta,
                    logprior=self.prior.logpdf(theta),
                    loglik=estimate.loglik,
                    estimate=estimate,
                    origin=(0, k),
                )
            )
            infos.append({"accepted": True, "origin": (0, k), **estimate.diagnostics()})
        return BatchRecord(0, list(self.states), [True] * self.chains, infos)

    def _decide(
        self,
        batch: int,
        k: int,
        proposal: LabeledValues,
        logprior: float,
        estimate,
        log_ratio_extra: float,
        log_u: float,
        infos: list[dict],
        accepted: list[bool],
    ) -> None:
        """Shared accept/reject bookkeeping for one chain."""
        chain = self.states[k]
        info = infos[k]
        if logprior == NEGINF:
            info["skipped"] = True
            accept = False
        elif estimate is None or not estimate.ok:
            info["failed"] = True
            accept = False
        else:
            current = chain.logpost
            candidate = logprior + estimate.loglik
            if not math.isfinite(current):
                accept = True  # escape a degenerate current state
            else:
                accept = log_u < (candidate - current + log_ratio_extra)
        if accept:
            self.states[k] = ChainState(
                parameters=proposal,
                logprior=logprior,
                loglik=estimate.loglik,
                estimate=estimate,
                origin=(batch, k),
                resets=chain.resets,
            )
        else:
            chain.consecutive_rejections += 1
        accepted[k] = accept
        info["accepted"] = accept
        info["origin"] = (batch, k) if accept else chain.origin
        if accept and estimate is not None:
            info.update(estimate.diagnostics())

    def _finish(self, batch: int, evaluator: Evaluator, infos, accepted) -> BatchRecord:
        maybe_reset_chains(self.states, evaluator, batch, infos, self.reset_after)
        return BatchRecord(batch, list(self.states), accepted, infos)

    # -- continuation ---------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "chains": [
                {
                    "parameters": c.parameters.as_dict(),
                    "logprior": c.logprior,
                    "loglik": c.loglik,
                    "origin": c.origin,
                    "consecutive_rejections": c.consecutive_rejections,
                    "resets": c.resets,
                }
                for c in self.states
            ]
        }

    def load_state_dict(self, state: dict) -> None:
        self.states = [
            ChainState(
                parameters=LabeledValues.from_dict(entry["parameters"]),
                logprior=entry["logprior"],
                loglik=entry["loglik"],
                estimate=None,
                origin=tuple(entry["origin"]),
                consecutive_rejections=entry["consecutive_rejections"],
                resets=entry["resets"],
            )
            for entry in state["chains"]
        ]


class MetropolisSampler(_MarkovBase):
    """Gaussian random-walk Metropolis over independent chains.

    The proposal scale defaults to 5% of each prior central interval
    width (diagonal covariance).
    """

    def __init__(
        self,
        prior: Distribution,
        chains: int,
        path: SeedPath,
        scales: dict[str, float] | None = None,
        reset_after: int = 20,
    ):
        super().__init__(prior, chains, path, reset_after)
        if scales is None:
            intervals = prior.intervals(0.99)
            scales = {l: 0.05 * (hi - lo) for l, (lo, hi) in intervals.items()}
        self.scales = np.array([scales[l] for l in self.labels])

    def step(self, batch: int, evaluator: Evaluator) -> BatchRecord:
        rng = self.path.spawn(batch).rng()
        dim = len(self.labels)
        noise = rng.standard_normal((self.chains, dim))
        log_us = np.log(rng.uniform(size=self.chains))

        proposals = []
        logpriors = []
        pending = []
        for k, chain in enumerate(self.states):
            theta = LabeledValues(
                self.labels, chain.parameters.as_array() + self.scales * noise[k]
            )
            lp = self.prior.logpdf(theta)
            proposals.append(theta)
            logpriors.append(lp)
            if lp > NEGINF:
                pending.append(EvalRequest(k, theta))
        estimates = evaluate_pending(evaluator, batch, pending)

        infos: list[dict] = [{} for _ in range(self.chains)]
        accepted = [False] * self.chains
        for k in range(self.chains):
            self._decide(
                batch,
                k,
                proposals[k],
                logpriors[k],
                estimates.get(k),
                0.0,
                float(log_us[k]),
                infos,
                accepted,
            )
        return self._finish(batch, evaluator, infos, accepted)


class StretchSampler(_MarkovBase):
    """Affine-invariant ensemble sampler.

    Walkers update in two half-ensemble passes; each moving walker X
    picks a partner Y from the complementary half, draws the stretch
    factor z with density ~ 1/sqrt(z) on [1/a, a], proposes
    ``Y + z (X - Y)`` and accepts with probability
    ``min(1, z^(d-1) exp(dlogpost))``.
    """

    def __init__(
        self,
        prior: Distribution,
        chains: int,
        path: SeedPath,
        stretch: float = 2.0,
        reset_after: int = 20,
    ):
        if chains < 4:
            raise ValueError(f"the ensemble needs at least 4 walkers: {chains}")
        if stretch <= 1.0:
            raise ValueError(f"stretch parameter must exceed 1: {stretch}")
        super().__init__(prior, chains, path, reset_after)
        self.stretch = stretch

    def step(self, batch: int, evaluator: Evaluator) -> BatchRecord:
        rng = self.path.spawn(batch).rng()
        dim = len(self.labels)
        half = self.chains // 2
        first = list(range(half))
        second = list(range(half, self.chains))

        infos: list[dict] = [{} for _ in range(self.chains)]
        accepted = [False] * self.chains
        for moving, resting in ((first, second), (second, first)):
            partners = rng.integers(len(resting), size=len(moving))
            zs = ((self.stretch - 1.0) * rng.uniform(size=len(moving)) + 1.0) ** 2 / self.stretch
            log_us = np.log(rng.uniform(size=len(moving)))

            proposals = {}
            logpriors = {}
            pending = []
            for j, k in enumerate(moving):
                x = self.states[k].parameters.as_array()
                y = self.states[resting[int(partners[j])]].parameters.as_array()
                theta = LabeledValues(self.labels, y + zs[j] * (x - y))
                lp = self.prior.logpdf(theta)
                proposals[k] = theta
                logpriors[k] = lp
                if lp > NEGINF:
                    pending.append(EvalRequest(k, theta))
            estimates = evaluate_pending(evaluator, batch, pending)
            for j, k in enumerate(moving):
                self._decide(
                    batch,
                    k,
                    proposals[k],
                    logpriors[k],
                    estimates.get(k),
                    (dim - 1) * math.log(float(zs[j])),
                    float(log_us[j]),
                    infos,
                    accepted,
                )
        return self._finish(batch, evaluator, infos, accepted)
