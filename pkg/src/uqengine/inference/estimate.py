"""Likelihood estimate record and lineage-compressed trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from uqengine.models.base import ModelState

__all__ = ["LikelihoodEstimate", "Trajectories"]


class Trajectories:
    """Particle outputs stored per snapshot with ancestry indices.

    ``outputs[n][p]`` is the output of pre-resampling particle ``p`` at
    snapshot ``n``; ``parents[n][j]`` is the pre-resampling index of the
    ancestor of post-resampling particle ``j`` at that snapshot. A full
    trajectory is reconstructed by backtracking the lineage, so each
    shared ancestor segment is stored exactly once.
    """

    def __init__(self, labels: Sequence[str], initial_labels: Sequence[str] = ()):
        self.labels = tuple(labels)
        self.initial_labels = tuple(initial_labels)
        self.times: list[float] = []
        self.outputs: list[np.ndarray] = []
        self.parents: list[np.ndarray] = []
        self.initials: np.ndarray | None = None

    def set_initials(self, values: np.ndarray) -> None:
        self.initials = np.asarray(values, dtype=np.float64)

    def append(self, time: float, outputs: np.ndarray, parents: np.ndarray) -> None:
        self.times.append(float(time))
        self.outputs.append(np.asarray(outputs, dtype=np.float64))
        self.parents.append(np.asarray(parents, dtype=np.int64))

    @property
    def snapshots(self) -> int:
        return len(self.times)

    @property
    def particles(self) -> int:
        return 0 if not self.outputs else int(self.outputs[0].shape[0])

    def lineage(self, index: int) -> np.ndarray:
        """Pre-resampling ancestor index at each snapshot for a final particle."""
        path = np.empty(self.snapshots, dtype=np.int64)
        i = int(index)
        for n in range(self.snapshots - 1, -1, -1):
            i = int(self.parents[n][i])
            path[n] = i
        return path

    def trajectory(self, index: int) -> np.ndarray:
        """Smoothed output series (snapshots x labels) of a final particle."""
        path = self.lineage(index)
        return np.stack([self.outputs[n][path[n]] for n in range(self.snapshots)])

    def initial_of(self, index: int) -> np.ndarray | None:
        """Initial-state values on the lineage of a final particle."""
        if self.initials is None:
            return None
        return self.initials[self.lineage(index)[0]]

    def ancestors_at(self, snapshot: int) -> np.ndarray:
        """Pre-resampling indices at ``snapshot`` for every final particle."""
        indices = np.arange(self.particles, dtype=np.int64)
        for n in range(self.snapshots - 1, snapshot - 1, -1):
            indices = self.parents[n][indices]
        return indices

    def smoothed_outputs(self, snapshot: int) -> np.ndarray:
        """Outputs at ``snapshot`` on the surviving lineages (one per final particle)."""
        return self.outputs[snapshot][self.ancestors_at(snapshot)]


@dataclass
class LikelihoodEstimate:
    """Marginal log-likelihood estimate with filter diagnostics.

    ``loglik`` is NaN when every particle failed; -inf is a valid value
    (data impossible under the proposed parameters).
    """

    loglik: float
    failed: bool = False
    trajectories: Trajectories | None = None
    fitscore: float | None = None
    accuracy: float | None = None
    particles: int | None = None
    redraw: list[float] | None = None
    log_mean_weights: list[float] | None = None
    states: list[ModelState] | None = None
    per_replicate: dict[str, "LikelihoodEstimate"] | None = None

    @property
    def ok(self) -> bool:
        return not self.failed and not math.isnan(self.loglik)

    def diagnostics(self) -> dict:
        out: dict = {}
        if self.fitscore is not None:
            out["fitscore"] = self.fitscore
        if self.accuracy is not None:
            out["accuracy"] = self.accuracy
        if self.particles is not None:
            out["particles"] = self.particles
        if self.redraw is not None:
            out["redraw"] = list(self.redraw)
        if self.log_mean_weights is not None:
            out["log_mean_weights"] = list(self.log_mean_weights)
        return out

    @classmethod
    def failure(cls, particles: int | None = None) -> "LikelihoodEstimate":
        return cls(loglik=float("nan"), failed=True, particles=particles)
