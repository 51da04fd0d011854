"""Particle filter likelihood with bootstrap resampling and smoothing.

Estimates the marginal likelihood of time-series observations under a
hidden-Markov model by propagating P particles between snapshots,
weighting them by the observational error density, and bootstrapping
the ensemble at each snapshot. Accumulation is in log-scale via a
max-shifted log-sum-exp. Every random stream derives from the seed
path and the particle's re-identification index, never from worker
identity, so results are reproducible for any executor layout.
"""

from __future__ import annotations

import math
from typing import Callable, Protocol, Sequence

import numpy as np

from uqengine.core import LabeledValues, Sandbox, SeedPath, rng_create, scratch_rng
from uqengine.inference.adaptivity import accuracy, fitscore
from uqengine.inference.errors import ErrorModel, peak_logdensity, row_logdensity
from uqengine.inference.estimate import LikelihoodEstimate, Trajectories
from uqengine.io.data import Dataset
from uqengine.models.base import Model, ModelState, initial_resolve

__all__ = [
    "pf_estimate",
    "pf_resample",
    "systematic_resample",
    "rejection_smooth",
    "ParticleBackend",
    "SerialBackend",
]

NEGINF = float("-inf")

# seed-path level reserved for the per-snapshot resampling stream; far
# above any particle index, so particle streams can never collide with it
RESAMPLE_LEVEL = 0x7FFFFFFF


def pf_resample(weights: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Bootstrap: P ancestor indices drawn multinomially by weight.

    Returned in nondecreasing ancestor order; as a multiset this equals
    P i.i.d. categorical draws, and the canonical order makes the
    re-identification of resampled particles worker-independent.
    """
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("negative weights")
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("degenerate weights: all zero")
    counts = rng.multinomial(w.size, w / total)
    return np.repeat(np.arange(w.size), counts)


def systematic_resample(weights: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Systematic (low-variance) resampling; optional alternative scheme."""
    w = np.asarray(weights, dtype=np.float64)
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("degenerate weights: all zero")
    positions = (float(rng.uniform()) + np.arange(w.size)) / w.size
    return np.searchsorted(np.cumsum(w / total), positions).astype(np.int64)


class ParticleBackend(Protocol):
    """Holds the particle model instances for one likelihood estimate.

    The serial backend keeps them in a list; the ensemble-executor
    backend distributes them over workers with the same call surface.
    """

    def connect(self, factory: Callable[[], Model], count: int,
                path: SeedPath, sandbox: Sandbox | None) -> None: ...
    def initialize(self, initials: Sequence[LabeledValues | None],
                   parameters: LabeledValues) -> None: ...
    def run_all(self, time: float, step: int) -> list: ...
    def resample(self, ancestors: np.ndarray) -> dict: ...
    def save_states(self) -> list[ModelState]: ...
    def disconnect(self) -> None: ...


class SerialBackend:
    """In-process particle collection; clones go through save/load.

    One random-stream object is shared by all particles of the backend:
    each is reseeded from its own path before running, and particles
    run strictly sequentially, so the shared object never leaks state.
    """

    def __init__(self):
        self.models: list[Model] = []
        self.path: SeedPath | None = None
        self.sandbox: Sandbox | None = None
        self.stream = rng_create(0)

    def connect(self, factory, count, path, sandbox=None):
        self.path = path
        self.sandbox = sandbox
        self.models = [factory() for _ in range(count)]
        for index, model in enumerate(self.models):
            model.__dict__["rng"] = self.stream
            model.place(sandbox.descend(index) if sandbox is not None else None)

    def initialize(self, initials, parameters):
        for index, model in enumerate(self.models):
            model.reseed(self.path.spawn(index, 0))
            if isinstance(initials[index], ModelState):
                model.load_state(initials[index])
            else:
                model.init(initials[index], parameters)

    def run_all(self, time, step):
        outputs = []
        for index, model in enumerate(self.models):
            model.reseed(self.path.spawn(index, step))
            outputs.append(model.run(time))
        return outputs

    def resample(self, ancestors):
        counts = np.bincount(ancestors, minlength=len(self.models))
        survivors_set = {int(a) for a in np.unique(ancestors)}
        # sandbox directories move only if anything was materialized
        on_disk = self.sandbox is not None and self.sandbox.exists()
        # snapshot duplicated ancestors while they still sit in their dirs
        states: dict[int, ModelState] = {
            a: self.models[a].save_state() for a in survivors_set if counts[a] > 1
        }
        # stash surviving sandboxes so index reuse cannot collide, drop the rest
        for index, model in enumerate(self.models):
            if index in survivors_set:
                if on_disk:
                    self.sandbox.descend(index).rename_to(self.sandbox.descend(f"stash-{index}"))
            else:
                model.exit()
                if on_disk:
                    self.sandbox.descend(index).remove()
        survivors: list[Model] = []
        fetched: dict[int, int] = {}  # ancestor -> new index of its primary copy
        copied = 0
        for new_index, ancestor in enumerate(ancestors):
            ancestor = int(ancestor)
            box = self.sandbox.descend(new_index) if self.sandbox is not None else None
            if ancestor not in fetched:
                fetched[ancestor] = new_index
                model = self.models[ancestor]
                if on_disk:
                    self.sandbox.descend(f"stash-{ancestor}").rename_to(box)
                model.place(box)
            else:
                model = type(self.models[ancestor]).__new__(type(self.models[ancestor]))
                model.__dict__["rng"] = self.stream
                if on_disk:
                    self.sandbox.descend(fetched[ancestor]).copy_to(box)
                model.place(box)
                model.load_state(states[ancestor])
                copied += 1
            survivors.append(model)
        self.models = survivors
        return {"copied": copied, "moved": 0, "bytes": 0}

    def save_states(self):
        return [model.save_state() for model in self.models]

    def disconnect(self):
        for model in self.models:
            model.exit()
        self.models = []


def pf_estimate(
    factory: Callable[[], Model],
    parameters: LabeledValues,
    dataset: Dataset,
    error: ErrorModel,
    particles: int,
    path: SeedPath,
    initial=None,
    backend: ParticleBackend | None = None,
    sandbox: Sandbox | None = None,
    smoothing: bool = True,
    scheme: str = "multinomial",
    capture_states: bool = False,
) -> LikelihoodEstimate:
    """Particle-filter estimate of the marginal log-likelihood.

    With one particle and a deterministic model this reduces exactly to
    the direct likelihood. The trajectories record (when ``smoothing``)
    carries per-snapshot outputs and ancestry for the rejection smoother.
    """
    if particles < 1:
        raise ValueError(f"particle count must be >= 1: {particles}")
    resampler = {"multinomial": pf_resample, "systematic": systematic_resample}[scheme]
    backend = backend if backend is not None else SerialBackend()
    backend.connect(factory, particles, path, sandbox)
    try:
        initials = []
        drawn = False
        for p in range(particles):
            values, was_drawn = initial_resolve(initial, parameters, scratch_rng([*path, p, 0]))
            initials.append(values)
            drawn = drawn or was_drawn
        backend.initialize(initials, parameters)

        labels = dataset.labels
        trajectories = None
        if smoothing:
            init_labels = initials[0].labels if (drawn and initials[0] is not None) else ()
            trajectories = Trajectories(labels, init_labels)
            if init_labels:
                trajectories.set_initials(
                    np.array([[float(v[l]) for l in init_labels] for v in initials])
                )

        loglik = 0.0
        log_mean_weights: list[float] = []
        redraw: list[float] = []
        all_logw: list[np.ndarray] = []
        all_logpeak: list[np.ndarray] = []
        log_particles = math.log(particles)

        for step, (time, row) in enumerate(dataset.rows(), start=1):
            outputs = backend.run_all(time, step)
            logw = np.full(particles, NEGINF)
            logpeak = np.full(particles, NEGINF)
            output_matrix = np.full((particles, len(labels)), np.nan)
            any_alive = False
            for p, out in enumerate(outputs):
                if out is None:
                    continue
                any_alive = True
                distribution = error(out.values, parameters)
                if hasattr(distribution, "row_and_peak"):
                    logw[p], logpeak[p] = distribution.row_and_peak(row)
                else:
                    logw[p] = row_logdensity(distribution, row)
                    logpeak[p] = peak_logdensity(distribution, out.values, row)
                for j, label in enumerate(labels):
                    output_matrix[p, j] = float(out.values[label])
            if not any_alive:
                return LikelihoodEstimate.failure(particles)
            all_logw.append(logw)
            all_logpeak.append(logpeak)

            shift = float(np.max(logw))
            if shift == NEGINF:
                # data impossible under every particle
                loglik = NEGINF
                log_mean_weights.append(NEGINF)
                if trajectories is not None:
                    trajectories.append(time, output_matrix, np.arange(particles))
                break
            weights = np.exp(logw - shift)
            log_mean = shift + math.log(float(weights.sum())) - log_particles
            log_mean_weights.append(log_mean)
            loglik += log_mean

            ancestors = resampler(weights, scratch_rng([*path, RESAMPLE_LEVEL, step]))
            redraw.append(float(np.unique(ancestors).size) / particles)
            if trajectories is not None:
                trajectories.append(time, output_matrix, ancestors)
            backend.resample(ancestors)

        states = backend.save_states() if capture_states and loglik > NEGINF else None
        return LikelihoodEstimate(
            loglik=loglik,
            trajectories=trajectories,
            fitscore=fitscore(all_logw, all_logpeak, len(labels)),
            accuracy=accuracy(all_logw) if particles >= 2 else None,
            particles=particles,
            redraw=redraw,
            log_mean_weights=log_mean_weights,
            states=states,
        )
    finally:
        backend.disconnect()


def rejection_smooth(
    trajectories: Trajectories,
    rng: np.random.Generator,
    count: int = 1,
) -> list[np.ndarray]:
    """Smoothed trajectory draws from the filtered particle history.

    Re-filtering every preceding snapshot with the latest resampling
    indices is equivalent to tracing the ancestry of the final (equally
    weighted) particles, so a draw is a uniformly chosen final particle
    followed back through its lineage.
    """
    if trajectories.snapshots == 0:
        raise ValueError("no snapshots recorded")
    picks = rng.integers(trajectories.particles, size=count)
    return [trajectories.trajectory(int(j)) for j in picks]
