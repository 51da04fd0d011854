"""Direct (analytic) likelihood for deterministic models."""

from __future__ import annotations

import numpy as np

from uqengine.core import LabeledValues, Sandbox, SeedPath, rng_for
from uqengine.inference.errors import ErrorModel, row_logdensity
from uqengine.inference.estimate import LikelihoodEstimate, Trajectories
from uqengine.io.data import Dataset
from uqengine.models.base import Model, ModelState, initial_resolve

__all__ = ["direct_loglik"]


def direct_loglik(
    factory,
    parameters: LabeledValues,
    dataset: Dataset,
    error: ErrorModel,
    path: SeedPath,
    initial=None,
    sandbox: Sandbox | None = None,
    capture_states: bool = False,
) -> LikelihoodEstimate:
    """Sum of observation log-densities along a single model trajectory.

    Intended for deterministic models (documented requirement, not
    enforced); missing data cells are skipped. A model failure flags
    the whole estimate as failed (NaN) rather than aborting.
    """
    model: Model = factory()
    model.place(sandbox.descend(0) if sandbox is not None else None)
    values, _ = initial_resolve(initial, parameters, rng_for([*path, 0, 0]))
    model.reseed(path.spawn(0, 0))
    if isinstance(values, ModelState):
        model.load_state(values)
    else:
        model.init(values, parameters)

    labels = dataset.labels
    trajectories = Trajectories(labels)
    loglik = 0.0
    try:
        for step, (time, row) in enumerate(dataset.rows(), start=1):
            model.reseed(path.spawn(0, step))
            out = model.run(time)
            if out is None:
                return LikelihoodEstimate.failure(particles=1)
            loglik += row_logdensity(error(out.values, parameters), row)
            trajectories.append(
                time,
                np.array([[float(out.values[l]) for l in labels]]),
                np.zeros(1, dtype=np.int64),
            )
        states = [model.save_state()] if capture_states else None
    finally:
        model.exit()
    return LikelihoodEstimate(
        loglik=loglik,
        trajectories=trajectories,
        particles=1,
        states=states if capture_states else None,
    )
