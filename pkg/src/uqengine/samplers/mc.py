"""Plain Monte Carlo sampler and posterior forecast propagation.

The MC sampler draws parameters from its prior each batch and accepts
everything; combined with a bootstrap prior over past posterior samples
(and, optionally, a particle-filter likelihood over a new dataset) it
implements forecasting and sequential Bayesian updating while keeping
the parameters distribution unchanged.
"""

from __future__ import annotations

import numpy as np

from uqengine.core import LabeledValues, Sandbox, SeedPath
from uqengine.distributions import Distribution, Empirical
from uqengine.models.base import Model, ModelState
from uqengine.samplers.base import BatchRecord, ChainState, EvalRequest, Evaluator

__all__ = ["MonteCarloSampler", "mc_propagate"]


class MonteCarloSampler:
    """Prior sampling without conditioning; one draw per chain per batch."""

    def __init__(self, prior: Distribution, chains: int, path: SeedPath):
        if chains < 1:
            raise ValueError(f"need at least one chain: {chains}")
        self.prior = prior
        self.chains = chains
        self.path = path
        self.labels = prior.labels
        self.states: list[ChainState] = []

    def init(self, evaluator: Evaluator) -> BatchRecord:
        return self._sample(0, evaluator)

    def step(self, batch: int, evaluator: Evaluator) -> BatchRecord:
        return self._sample(batch, evaluator)

    def _sample(self, batch: int, evaluator: Evaluator) -> BatchRecord:
        rng = self.path.spawn(batch).rng()
        draws = []
        for k in range(self.chains):
            meta = {}
            if isinstance(self.prior, Empirical):
                index = self.prior.draw_index(rng)
                meta["source_index"] = index
                theta = self.prior.samples[index]
            else:
                theta = self.prior.draw(rng)
            draws.append((theta, meta))
        estimates = evaluator.evaluate(
            [EvalRequest(k, theta, meta=meta) for k, (theta, meta) in enumerate(draws)],
            batch,
        )
        self.states = []
        infos = []
        for k, ((theta, meta), estimate) in enumerate(zip(draws, estimates)):
            self.states.append(
                ChainState(
                    parameters=theta,
                    logprior=0.0,  # bootstrap priors have no density
                    loglik=estimate.loglik,
                    estimate=estimate,
                    origin=(batch, k),
                )
            )
            info = {"accepted": True, "origin": (batch, k), **estimate.diagnostics()}
            info.update(meta)
            infos.append(info)
        return BatchRecord(batch, list(self.states), [True] * self.chains, infos)

    def state_dict(self) -> dict:
        return {}

    def load_state_dict(self, state: dict) -> None:
        pass


def mc_propagate(
    samples: list[tuple[LabeledValues, ModelState]],
    factory,
    times,
    seed: int = 0,
    draws: int | None = None,
    sandbox: Sandbox | None = None,
) -> dict:
    """Forward propagation of stored posterior (parameters, state) pairs.

    Each draw bootstraps one stored pair, loads the model state (no
    re-initialization) and runs it over the future times without any
    conditioning. With ``times == [T]`` (the stored time) the forecast
    reproduces the stored states.
    """
    if not samples:
        raise FileNotFoundError(
            "no stored model states; run the inference with states enabled"
        )
    times = [float(t) for t in times]
    if not times:
        raise ValueError("no future times given")
    path = SeedPath((int(seed),))
    if draws is None:
        # propagate every stored sample exactly once
        picks = list(range(len(samples)))
    else:
        rng = path.spawn(0).rng()
        picks = [int(rng.integers(len(samples))) for _ in range(int(draws))]

    labels: tuple[str, ...] | None = None
    collected = []
    parameters = []
    for j, pick in enumerate(picks):
        theta, state = samples[pick]
        model: Model = factory()
        model.place(sandbox.descend(j) if sandbox is not None else None)
        model.load_state(state)
        series = []
        try:
            for step, time in enumerate(times, start=1):
                model.reseed(path.spawn(j + 1, step))
                out = model.run(time)
                if out is None:
                    series = None
                    break
                if labels is None:
                    labels = out.values.labels
                series.append([float(out.values[l]) for l in labels])
        finally:
            model.exit()
        if series is not None:
            collected.append(series)
            parameters.append(theta)
    if not collected:
        raise RuntimeError("every forecast trajectory failed")
    return {
        "times": times,
        "labels": list(labels),
        "values": np.asarray(collected),
        "parameters": parameters,
    }
