"""Greedy communication-avoiding routing for ensemble resampling.

Given the current task-to-worker assignment and the resampled task
multiset, builds per-worker move/copy instructions: resident resampled
tasks stay in place up to the maximal worker load, overflow is routed
first to under-utilized workers on the same pseudo-node, then to the
closest under-utilized remote worker by rank distance, and identical
tasks travel once and replicate at the destination.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

__all__ = ["RouteInstruction", "RoutingPlan", "route_plan"]


@dataclass(frozen=True)
class RouteInstruction:
    """Placement of one resampled task copy.

    ``reident`` is the copy's new global index, used downstream for
    re-seeding; ``primary`` marks the single copy of a transfer group
    that actually carries the state (the rest replicate on arrival).
    """

    task: int
    source: int
    destination: int
    reident: int
    affinity: str  # "local" | "remote"
    primary: bool


@dataclass
class RoutingPlan:
    instructions: list[RouteInstruction] = field(default_factory=list)
    moves: int = 0  # primary transfers to a worker not holding the task

    def assignment(self) -> dict[int, list[int]]:
        """New worker -> sorted re-identification indices."""
        out: dict[int, list[int]] = {}
        for ins in self.instructions:
            out.setdefault(ins.destination, []).append(ins.reident)
        return {w: sorted(ids) for w, ids in out.items()}


def route_plan(
    assignment: Mapping[int, Sequence[int]],
    resampled: Sequence[int],
    max_load: int,
    node_of: Mapping[int, int] | None = None,
) -> RoutingPlan:
    """Plan the placement of every resampled task copy.

    ``resampled`` is ordered; position ``j`` becomes re-identification
    index ``j``. Raises when the requested multiset exceeds the total
    capacity or references a task that is not live.
    """
    workers = sorted(assignment.keys())
    if not workers:
        raise ValueError("no workers")
    home: dict[int, int] = {}
    for w in workers:
        for task in assignment[w]:
            if task in home:
                raise ValueError(f"task {task} is resident on two workers")
            home[task] = w
    unknown = [t for t in resampled if t not in home]
    if unknown:
        raise ValueError(f"resampled tasks are not live: {sorted(set(unknown))}")
    if len(resampled) > max_load * len(workers):
        raise ValueError(
            f"capacity exceeded: {len(resampled)} tasks > {len(workers)} x {max_load}"
        )
    nodes = dict(node_of) if node_of is not None else {w: 0 for w in workers}

    counts = Counter(resampled)
    remaining = dict(counts)
    load = {w: 0 for w in workers}
    kept: dict[int, list[int]] = {w: [] for w in workers}

    # Resident resampled tasks stay in place up to the load bound. The
    # kept copies are chosen to minimize the number of outgoing transfer
    # groups: exporting c copies of one task costs ceil(c / L) moves, so
    # keeping (c mod L) copies, and each further L copies, saves one
    # move each. Smallest savings bundles are taken first, and leftover
    # capacity is filled with any remaining resident copies.
    for w in workers:
        resident = [t for t in assignment[w] if remaining.get(t, 0) > 0]
        bundles: list[tuple[int, int]] = []  # (size, task), each saves one move
        for task in resident:
            c = remaining[task]
            r = c % max_load
            sizes = ([r] if r else []) + [max_load] * (c // max_load)
            bundles.extend((s, task) for s in sizes)
        bundles.sort()
        capacity = max_load
        keep: Counter = Counter()
        for size, task in bundles:
            if size <= capacity:
                keep[task] += size
                capacity -= size
        for task in resident:
            while capacity > 0 and keep[task] < remaining[task]:
                keep[task] += 1
                capacity -= 1
        for task in resident:
            for _ in range(keep[task]):
                kept[w].append(task)
                remaining[task] -= 1
                load[w] += 1

    # Route the overflow, largest transfer groups first so they fit one
    # destination whenever possible; within the affinity preference
    # (same node first, then nearest rank) a destination with room for
    # the whole group wins.
    transfers: list[tuple[int, int, int, int]] = []  # (task, source, destination, copies)
    moves = 0
    overflow = sorted(
        ((t, c) for t, c in remaining.items() if c > 0), key=lambda tc: (-tc[1], tc[0])
    )
    for task, count in overflow:
        source = home[task]
        while count > 0:
            candidates = [w for w in workers if load[w] < max_load]
            if not candidates:
                raise ValueError("capacity exceeded during routing")
            pending = count
            candidates.sort(
                key=lambda w: (
                    nodes[w] != nodes[source],
                    max_load - load[w] < pending,
                    abs(w - source),
                    w,
                )
            )
            dest = candidates[0]
            copies = min(count, max_load - load[dest])
            transfers.append((task, source, dest, copies))
            count -= copies
            load[dest] += copies
            moves += 1
        remaining[task] = 0

    # hand out re-identification indices in canonical (position) order
    positions: dict[int, list[int]] = {}
    for j, task in enumerate(resampled):
        positions.setdefault(task, []).append(j)
    for task in positions:
        positions[task].reverse()  # pop() yields ascending positions

    plan = RoutingPlan(moves=moves)
    for w in workers:
        seen: set[int] = set()
        for task in kept[w]:
            plan.instructions.append(
                RouteInstruction(
                    task=task,
                    source=w,
                    destination=w,
                    reident=positions[task].pop(),
                    affinity="local",
                    primary=task not in seen,
                )
            )
            seen.add(task)
    for task, source, dest, copies in transfers:
        local = nodes[source] == nodes[dest]
        for c in range(copies):
            plan.instructions.append(
                RouteInstruction(
                    task=task,
                    source=source,
                    destination=dest,
                    reident=positions[task].pop(),
                    affinity="local" if local else "remote",
                    primary=c == 0,
                )
            )
    return plan
