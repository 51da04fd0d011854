"""Synthetic dataset generation from exact parameters."""

from __future__ import annotations

from typing import Sequence

from uqengine.core import LabeledValues, Sandbox, SeedPath, rng_for
from uqengine.io.data import Dataset
from uqengine.models.base import initial_resolve

__all__ = ["synthesize"]

# seed-path level separating observation-noise draws from model streams
_OBSERVE_LEVEL = 0x7FFFFFFE


def synthesize(
    factory,
    parameters: LabeledValues,
    snapshots: Sequence[float],
    error=None,
    initial=None,
    seed: int = 0,
    sandbox: Sandbox | None = None,
) -> tuple[Dataset, Dataset | None]:
    """Exact model outputs and, with an error model, noisy observations.

    Returns loader-compatible datasets (exact predictions, observation
    draws); the observation dataset is None when no error model is
    given.
    """
    snapshots = [float(t) for t in snapshots]
    if not snapshots:
        raise ValueError("no snapshot times given")
    path = SeedPath((int(seed),))
    model = factory()
    model.place(sandbox.descend("synthesize") if sandbox is not None else None)
    values, _ = initial_resolve(initial, parameters, rng_for([*path, 0, 0]))
    model.reseed(path.spawn(0, 0))
    model.init(values, parameters)

    labels: tuple[str, ...] | None = None
    exact_rows: list[list[float]] = []
    noisy_rows: list[list[float]] = []
    try:
        for step, time in enumerate(snapshots, start=1):
            model.reseed(path.spawn(0, step))
            out = model.run(time)
            if out is None:
                raise RuntimeError(f"model failed at synthesis time {time}")
            if labels is None:
                labels = out.values.labels
            exact_rows.append([float(out.values[l]) for l in labels])
            if error is not None:
                distribution = error(out.values, parameters)
                observed = distribution.draw(rng_for([*path, _OBSERVE_LEVEL, step]))
                noisy_rows.append([float(observed[l]) for l in distribution.labels])
    finally:
        model.exit()

    exact = Dataset(snapshots, {l: [row[i] for row in exact_rows] for i, l in enumerate(labels)})
    observations = None
    if error is not None:
        obs_labels = error(
            LabeledValues(labels, exact_rows[0]), parameters
        ).labels
        observations = Dataset(
            snapshots,
            {l: [row[i] for row in noisy_rows] for i, l in enumerate(obs_labels)},
        )
    return exact, observations
