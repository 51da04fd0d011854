"""Replicates aggregator: independent datasets sharing the parameters.

Each replicate pairs a dataset with (optionally) its own error model
and initial-state spec. The total log-likelihood is the sum over
replicates; scheduling priorities put longer datasets with more
particles first so pool workers start on the heaviest tasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

from uqengine.inference.estimate import LikelihoodEstimate
from uqengine.io.data import Dataset

__all__ = ["Replicate", "ReplicateSet", "replicates_loglik", "replicates_priorities"]


@dataclass
class Replicate:
    name: str
    dataset: Dataset
    error: Callable | None = None
    initial: object | None = None


class ReplicateSet:
    def __init__(
        self,
        datasets: Mapping[str, Dataset],
        errors: Mapping[str, Callable] | None = None,
        initials: Mapping[str, object] | None = None,
    ):
        names = list(datasets.keys())
        if len(set(names)) != len(names):
            raise ValueError("replicate names must be unique")
        for mapping, kind in ((errors, "error"), (initials, "initial")):
            if mapping is not None:
                unknown = set(mapping) - set(names)
                if unknown:
                    raise ValueError(f"{kind} mapping names unknown replicates: {sorted(unknown)}")
        self.replicates = {
            name: Replicate(
                name,
                datasets[name],
                (errors or {}).get(name),
                (initials or {}).get(name),
            )
            for name in names
        }

    def __len__(self) -> int:
        return len(self.replicates)

    def names(self) -> list[str]:
        return list(self.replicates.keys())

    def __getitem__(self, name: str) -> Replicate:
        return self.replicates[name]


def replicates_priorities(
    replicate_set: ReplicateSet,
    particles: Mapping[str, int] | None = None,
) -> list[str]:
    """Names sorted by descending (dataset length x particle count).

    Ties break alphabetically so the order is a stable permutation of
    the replicate set.
    """
    particles = particles or {}

    def key(name: str) -> tuple:
        weight = len(replicate_set[name].dataset) * particles.get(name, 1)
        return (-weight, name)

    return sorted(replicate_set.names(), key=key)


def replicates_loglik(
    estimates: Mapping[str, LikelihoodEstimate],
) -> tuple[float, dict[str, dict]]:
    """Total log-likelihood over independent replicates plus diagnostics.

    Any failed replicate fails the total; a -inf replicate makes the
    total -inf.
    """
    if not estimates:
        raise ValueError("no replicate estimates")
    total = 0.0
    diagnostics: dict[str, dict] = {}
    failed = False
    for name, estimate in estimates.items():
        diagnostics[name] = {"loglik": estimate.loglik, **estimate.diagnostics()}
        if estimate.failed or math.isnan(estimate.loglik):
            failed = True
        else:
            total += estimate.loglik
    if failed:
        return float("nan"), diagnostics
    return total, diagnostics
