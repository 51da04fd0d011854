"""Simulated-annealing ABC sampler over a parameter population.

The initial population is drawn from the prior; every batch re-draws a
subset (by default everyone; otherwise the worst members by distance)
through a Gaussian perturbation kernel and accepts a proposal by the
Metropolis rule of the annealed target: the prior ratio times
``exp(-(rho' - rho) / tau)``. The tolerance starts at the median
initial distance and shrinks by the decay factor after every batch
whose acceptance rate stays above the mixing floor; a batch with zero
acceptances additionally warns. Decaying the tolerance below the scale
the population can still mix at provably freezes the population off
target, hence the floor.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from uqengine.core import LabeledValues, SeedPath
from uqengine.distributions import Distribution
from uqengine.samplers.base import BatchRecord, ChainState, EvalRequest, Evaluator

__all__ = ["SabcSampler"]

NEGINF = float("-inf")


class SabcSampler:
    def __init__(
        self,
        prior: Distribution,
        batchsize: int,
        path: SeedPath,
        kappa: float = 0.9,
        redraw_fraction: float = 1.0,
        min_acceptance: float = 0.2,
    ):
        if batchsize < 2:
            raise ValueError(f"population needs at least 2 members: {batchsize}")
        if not 0.0 < kappa <= 1.0:
            raise ValueError(f"tolerance decay must be in (0, 1]: {kappa}")
        self.prior = prior
        self.batchsize = batchsize
        self.path = path
        self.kappa = kappa
        self.redraw_fraction = redraw_fraction
        self.min_acceptance = min_acceptance
        self.labels = prior.labels
        self.states: list[ChainState] = []
        self.tolerance: float | None = None

    def init(self, evaluator: Evaluator) -> BatchRecord:
        rng = self.path.spawn(0).rng()
        population = [self.prior.draw(rng) for _ in range(self.batchsize)]
        estimates = evaluator.evaluate(
            [EvalRequest(k, theta) for k, theta in enumerate(population)], 0
        )
        self.states = [
            ChainState(
                parameters=theta,
                logprior=self.prior.logpdf(theta),
                loglik=estimate.loglik,  # holds the (negated) distance, see evaluator
                estimate=estimate,
                origin=(0, k),
            )
            for k, (theta, estimate) in enumerate(zip(population, estimates))
        ]
        distances = [self._distance(c) for c in self.states]
        self.tolerance = float(np.median([d for d in distances if math.isfinite(d)]))
        if self.tolerance <= 0.0:
            self.tolerance = 1.0  # all-zero distances: any positive tolerance works
        infos = [
            {"accepted": True, "origin": (0, k), "distance": distances[k], "tolerance": self.tolerance}
            for k in range(self.batchsize)
        ]
        return BatchRecord(0, list(self.states), [True] * self.batchsize, infos)

    @staticmethod
    def _distance(chain: ChainState) -> float:
        # distances ride in loglik as their negation so that ChainState
        # ordering semantics (larger is better) carry over
        return -chain.loglik

    def _population_covariance(self) -> np.ndarray:
        values = np.array([c.parameters.as_array() for c in self.states])
        cov = np.cov(values, rowvar=False, ddof=1)
        cov = np.atleast_2d(cov)
        # perturbation kernel: twice the population covariance, regularized
        cov = 2.0 * cov + 1e-12 * np.eye(cov.shape[0])
        return np.linalg.cholesky(cov)

    def step(self, batch: int, evaluator: Evaluator) -> BatchRecord:
        rng = self.path.spawn(batch).rng()
        count = max(int(math.ceil(self.redraw_fraction * self.batchsize)), 1)
        if count >= self.batchsize:
            moving = list(range(self.batchsize))
        else:
            order = sorted(
                range(self.batchsize),
                key=lambda k: self._distance(self.states[k]),
                reverse=True,
            )
            moving = sorted(order[:count])

        chol = self._population_covariance()
        noise = rng.standard_normal((len(moving), len(self.labels)))
        log_us = np.log(rng.uniform(size=len(moving)))

        proposals = {}
        logpriors = {}
        pending = []
        for j, k in enumerate(moving):
            theta = LabeledValues(
                self.labels, self.states[k].parameters.as_array() + chol @ noise[j]
            )
            lp = self.prior.logpdf(theta)
            proposals[k] = theta
            logpriors[k] = lp
            if lp > NEGINF:
                pending.append(EvalRequest(k, theta))
        estimates = {
            r.chain: e for r, e in zip(pending, evaluator.evaluate(pending, batch))
        }

        infos: list[dict] = [{} for _ in range(self.batchsize)]
        accepted = [False] * self.batchsize
        for j, k in enumerate(moving):
            info = infos[k]
            estimate = estimates.get(k)
            if logpriors[k] == NEGINF:
                info["skipped"] = True
            elif estimate is None or not estimate.ok:
                info["failed"] = True
            else:
                old = self._distance(self.states[k])
                new = -estimate.loglik
                # Metropolis ratio of the annealed target: prior ratio
                # times the Boltzmann distance factor
                prior_shift = logpriors[k] - self.states[k].logprior
                if log_us[j] < prior_shift - (new - old) / self.tolerance:
                    self.states[k] = ChainState(
                        parameters=proposals[k],
                        logprior=logpriors[k],
                        loglik=estimate.loglik,
                        estimate=estimate,
                        origin=(batch, k),
                    )
                    accepted[k] = True
        rate = sum(accepted) / len(moving)
        if not any(accepted):
            warnings.warn(
                f"batch {batch}: all perturbations rejected; tolerance decay paused"
            )
        elif rate >= self.min_acceptance:
            self.tolerance *= self.kappa
        for k in range(self.batchsize):
            infos[k].setdefault("accepted", accepted[k])
            infos[k]["origin"] = (batch, k) if accepted[k] else self.states[k].origin
            infos[k]["distance"] = self._distance(self.states[k])
            infos[k]["tolerance"] = self.tolerance
        return BatchRecord(batch, list(self.states), accepted, infos)

    # -- continuation ------------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "chains": [
                {
                    "parameters": c.parameters.as_dict(),
                    "logprior": c.logprior,
                    "loglik": c.loglik,
                    "origin": c.origin,
                }
                for c in self.states
            ],
        }

    def load_state_dict(self, state: dict) -> None:
        self.tolerance = state["tolerance"]
        self.states = [
            ChainState(
                parameters=LabeledValues.from_dict(entry["parameters"]),
                logprior=entry["logprior"],
                loglik=entry["loglik"],
                origin=tuple(entry["origin"]),
            )
            for entry in state["chains"]
        ]
