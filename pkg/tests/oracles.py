"""Independent reference implementations used to freeze expected values.

These stay deliberately separate from the code paths they check: the
Kalman filter gives the exact marginal likelihood of the linear-Gaussian
walk, the forward-backward recursion gives exact discrete smoothing
posteriors, and the routing oracle enumerates all feasible placements.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np


def kalman_walk_loglik(
    observations,
    times,
    mu: float,
    sigma: float,
    epsilon: float,
    m0_mean: float,
    m0_std: float,
    t0: float = 0.0,
) -> float:
    """Exact marginal log-likelihood of the Gaussian drift-diffusion walk.

    State transition over a gap d: m' = m + mu*d + N(0, sigma^2 d);
    observation: D = m + N(0, epsilon^2); prior m ~ N(m0_mean, m0_std^2).
    """
    mean = m0_mean
    var = m0_std**2
    previous = t0
    loglik = 0.0
    for t, d_obs in zip(times, observations):
        gap = t - previous
        mean = mean + mu * gap
        var = var + sigma**2 * gap
        innovation_var = var + epsilon**2
        loglik += -0.5 * math.log(2.0 * math.pi * innovation_var)
        loglik += -0.5 * (d_obs - mean) ** 2 / innovation_var
        gain = var / innovation_var
        mean = mean + gain * (d_obs - mean)
        var = (1.0 - gain) * var
        previous = t
    return loglik


def forward_backward_two_steps(p0, transition, g1, g2) -> np.ndarray:
    """Exact smoothing marginal P(x_1 | y_1, y_2) of a 2-snapshot HMM.

    ``p0`` is the initial state distribution (before the first
    transition), ``transition`` the one-step matrix applied per
    snapshot, ``g1``/``g2`` the observation likelihood vectors.
    """
    p0 = np.asarray(p0, dtype=float)
    transition = np.asarray(transition, dtype=float)
    alpha1 = (p0 @ transition) * np.asarray(g1, dtype=float)
    beta1 = transition @ np.asarray(g2, dtype=float)
    posterior = alpha1 * beta1
    return posterior / posterior.sum()


def minimal_transfer_count(assignment, resampled, max_load) -> int:
    """Brute-force minimum number of (task, destination) transfers.

    Enumerates every placement of the resampled copy counts over the
    workers subject to the load bound; a transfer is a destination that
    receives copies of a task it does not currently hold (identical
    copies travel once and replicate on arrival).
    """
    workers = sorted(assignment.keys())
    home = {t: w for w, tasks in assignment.items() for t in tasks}
    counts = Counter(resampled)
    tasks = sorted(counts)

    best = math.inf

    def place(index: int, loads: dict, cost: int) -> None:
        nonlocal best
        if cost >= best:
            return
        if index == len(tasks):
            best = cost
            return
        task = tasks[index]
        need = counts[task]
        # all splits of `need` copies over the workers within capacity
        free = [max_load - loads[w] for w in workers]
        for split in _compositions(need, free):
            extra = sum(
                1 for w, n in zip(workers, split) if n > 0 and home[task] != w
            )
            for w, n in zip(workers, split):
                loads[w] += n
            place(index + 1, loads, cost + extra)
            for w, n in zip(workers, split):
                loads[w] -= n

    place(0, {w: 0 for w in workers}, 0)
    return int(best)


def _compositions(total: int, capacities: list[int]):
    """All splits of ``total`` into parts bounded by ``capacities``."""
    if len(capacities) == 1:
        if total <= capacities[0]:
            yield (total,)
        return
    for first in range(min(total, capacities[0]) + 1):
        for rest in _compositions(total - first, capacities[1:]):
            yield (first, *rest)


def enumerate_routing_instances(max_workers: int = 3, max_tasks: int = 6):
    """All (assignment, resampled) routing instances up to the given sizes.

    Task homes sweep every assignment of distinct tasks to workers;
    resampled multisets sweep every multiset over the live tasks of the
    same total size. Symmetric worker relabelings are not deduplicated
    because rank distance breaks the symmetry.
    """
    for workers in range(1, max_workers + 1):
        for tasks in range(1, max_tasks + 1):
            for homes in itertools.product(range(workers), repeat=tasks):
                assignment = {w: [] for w in range(workers)}
                for task, w in enumerate(homes):
                    assignment[w].append(task)
                for resampled in itertools.combinations_with_replacement(
                    range(tasks), tasks
                ):
                    yield assignment, list(resampled)
