"""Ensemble executor: stateful particle collection over workers.

Workers are in-process execution units owning a disjoint partition of
particle tasks; the coordinator broadcasts commands (initialize, run,
method calls) and performs index-multiset resampling through the greedy
routing plan. Cross-worker clones travel as serialized model states
(remote affinity) or by sandbox renaming and direct hand-over (local
affinity, same pseudo-node); a synchronization barrier separates the
send/stash phase from the fetch/replicate phase. Every particle's
randomness derives from its re-identification index, so results are
identical for any worker count.
"""

from __future__ import annotations

import math
import queue
import threading
from typing import Callable, Sequence

import numpy as np

from uqengine.core import LabeledValues, Sandbox, SeedPath, rng_create
from uqengine.executors.routing import RouteInstruction, route_plan
from uqengine.models.base import Model, ModelState

__all__ = ["EnsembleExecutor"]


class _ParticleHost:
    """Worker-side particle owner; all model access happens here.

    The host's models share one random-stream object, reseeded from
    each particle's path before use; particles execute sequentially
    within their worker.
    """

    def __init__(self, worker: int, base_sandbox: Sandbox | None):
        self.worker = worker
        self.base = base_sandbox
        self.models: dict[int, Model] = {}
        self.stream = rng_create(0)

    def _box(self, index) -> Sandbox | None:
        return self.base.descend(index) if self.base is not None else None

    def _adopt(self, model: Model) -> Model:
        model.__dict__["rng"] = self.stream
        return model

    def create(self, factory, indices, path: SeedPath):
        self.path = path
        for index in indices:
            model = self._adopt(factory())
            model.place(self._box(index))
            self.models[index] = model

    def initialize(self, initials: dict[int, LabeledValues | None], parameters):
        for index in sorted(self.models):
            model = self.models[index]
            model.reseed(self.path.spawn(index, 0))
            if isinstance(initials[index], ModelState):
                model.load_state(initials[index])
            else:
                model.init(initials[index], parameters)

    def run(self, time: float, step: int) -> dict:
        out = {}
        for index in sorted(self.models):
            model = self.models[index]
            model.reseed(self.path.spawn(index, step))
            out[index] = model.run(time)
        return out

    def call(self, name: str, args: tuple) -> dict:
        return {i: getattr(self.models[i], name)(*args) for i in sorted(self.models)}

    def export_states(self, tasks: Sequence[int]) -> dict[int, ModelState]:
        return {t: self.models[t].save_state() for t in tasks}

    def stage(self, stash: Sequence[int], handoff: Sequence[int], drops: Sequence[int]) -> dict[int, Model]:
        """Stash surviving sandboxes, release handed-over models, drop the extinct."""
        on_disk = self.base is not None and self.base.exists()
        released: dict[int, Model] = {}
        for task in stash:
            if on_disk:
                self._box(task).rename_to(self._box(f"stash-{task}"))
        for task in handoff:
            released[task] = self.models.pop(task)
        for task in drops:
            model = self.models.pop(task)
            model.exit()
            if on_disk:
                self._box(task).remove()
        return released

    def commit(self, fetches: Sequence[tuple]) -> None:
        """Materialize this worker's share of the routing plan.

        Fetch kinds: ("keep", task, new) rename of a resident primary;
        ("adopt", task, new, model) model handed over within the node;
        ("load", task, new, state, cls) remote arrival from bytes;
        ("replicate", task, new, primary_new) local clone of a primary.
        """
        on_disk = self.base is not None and self.base.exists()
        survivors: dict[int, Model] = {}
        for fetch in fetches:
            kind, task, new = fetch[0], fetch[1], fetch[2]
            if kind == "keep":
                model = self.models.pop(task)
                if on_disk:
                    self._box(f"stash-{task}").rename_to(self._box(new))
                model.place(self._box(new))
            elif kind == "adopt":
                model = self._adopt(fetch[3])
                if on_disk:
                    self._box(f"stash-{task}").rename_to(self._box(new))
                model.place(self._box(new))
            elif kind == "load":
                state, cls = fetch[3], fetch[4]
                model = self._adopt(cls.__new__(cls))
                model.place(self._box(new))
                model.load_state(state)
            elif kind == "replicate":
                primary = survivors[fetch[3]]
                model = self._adopt(type(primary).__new__(type(primary)))
                if on_disk and primary.sandbox is not None:
                    primary.sandbox.copy_to(self._box(new))
                model.place(self._box(new))
                model.load_state(primary.save_state())
            else:
                raise ValueError(f"unknown fetch kind: {kind}")
            survivors[new] = model
        self.models = survivors

    def shutdown(self):
        for model in self.models.values():
            model.exit()
        self.models = {}


def _serve(host: _ParticleHost, inbox: queue.Queue, outbox: queue.Queue) -> None:
    while True:
        command = inbox.get()
        name = command[0]
        if name == "stop":
            outbox.put((host.worker, None))
            return
        try:
            result = getattr(host, name)(*command[1:])
            outbox.put((host.worker, result))
        except Exception as exc:  # surfaced by the coordinator
            outbox.put((host.worker, exc))


class EnsembleExecutor:
    """Coordinator for a worker group holding persistent particle tasks.

    Implements the particle-backend surface of the particle filter
    (connect / initialize / run_all / resample / save_states /
    disconnect) plus a generic ``call``. ``node_size`` groups workers
    into pseudo-nodes for the local-affinity optimization; by default
    all workers share one node.
    """

    def __init__(self, workers: int = 0, node_size: int | None = None):
        self.workers = max(int(workers or 0), 0)
        self.node_size = node_size
        self.traffic = {"copied": 0, "moved": 0, "bytes": 0}
        self._connected = False
        self._hosts: list[_ParticleHost] = []
        self._inboxes: list[queue.Queue] = []
        self._outbox: queue.Queue | None = None
        self._threads: list[threading.Thread] = []

    # -- lifecycle ----------------------------------------------------------

    def connect(
        self,
        factory: Callable[[], Model],
        count: int,
        path: SeedPath,
        sandbox: Sandbox | None = None,
    ) -> None:
        if self._connected:
            raise RuntimeError("ensemble already connected")
        self._count = count
        self._factory = factory
        active = max(min(self.workers, count), 1)
        self._hosts = [_ParticleHost(w, sandbox) for w in range(active)]
        self._inboxes = [queue.Queue() for _ in range(active)]
        self._outbox = queue.Queue()
        self._threads = []
        if self.workers > 0:
            for host, inbox in zip(self._hosts, self._inboxes):
                thread = threading.Thread(
                    target=_serve,
                    args=(host, inbox, self._outbox),
                    daemon=True,
                    name=f"ensemble-{host.worker}",
                )
                thread.start()
                self._threads.append(thread)
        # balanced contiguous partition of the initial indices
        self._owner: dict[int, int] = {}
        bounds = np.linspace(0, count, len(self._hosts) + 1).astype(int)
        for w, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:])):
            indices = list(range(lo, hi))
            for i in indices:
                self._owner[i] = w
            self._send(w, ("create", factory, indices, path))
        self._collect()
        self._connected = True

    def disconnect(self) -> None:
        if not self._connected:
            return
        self._broadcast(("shutdown",))
        self._collect()
        if self._threads:
            self._broadcast(("stop",))
            for t in self._threads:
                t.join()
        self._threads = []
        self._connected = False

    # -- messaging ------------------------------------------------------------

    def _send(self, worker: int, command: tuple) -> None:
        if self._threads:
            self._inboxes[worker].put(command)
        else:
            host = self._hosts[worker]
            name = command[0]
            if name == "stop":
                self._outbox.put((worker, None))
                return
            try:
                self._outbox.put((worker, getattr(host, name)(*command[1:])))
            except Exception as exc:
                self._outbox.put((worker, exc))

    def _broadcast(self, command: tuple) -> None:
        for w in range(len(self._hosts)):
            self._send(w, command)

    def _collect(self, expected: int | None = None) -> dict[int, object]:
        expected = len(self._hosts) if expected is None else expected
        results: dict[int, object] = {}
        for _ in range(expected):
            worker, value = self._outbox.get()
            if isinstance(value, Exception):
                raise value
            results[worker] = value
        return results

    def _require_connected(self) -> None:
        if not self._connected:
            raise RuntimeError("ensemble not connected; call connect() first")

    # -- particle-backend surface ----------------------------------------------

    def initialize(self, initials: Sequence[LabeledValues | None], parameters) -> None:
        self._require_connected()
        for w in range(len(self._hosts)):
            share = {i: initials[i] for i, owner in self._owner.items() if owner == w}
            self._send(w, ("initialize", share, parameters))
        self._collect()

    def run_all(self, time: float, step: int) -> list:
        self._require_connected()
        self._broadcast(("run", time, step))
        merged: dict[int, object] = {}
        for part in self._collect().values():
            merged.update(part)
        return [merged[i] for i in sorted(merged)]

    def call(self, method: str, *args) -> dict[int, object]:
        self._require_connected()
        self._broadcast(("call", method, args))
        merged: dict[int, object] = {}
        for part in self._collect().values():
            merged.update(part)
        return merged

    def save_states(self) -> list[ModelState]:
        self._require_connected()
        merged: dict[int, ModelState] = {}
        for w in range(len(self._hosts)):
            tasks = sorted(i for i, owner in self._owner.items() if owner == w)
            self._send(w, ("export_states", tasks))
        for part in self._collect().values():
            merged.update(part)
        return [merged[i] for i in sorted(merged)]

    def resample(self, ancestors: Sequence[int]) -> dict:
        """Clone/delete particles so the live multiset equals ``ancestors``.

        Position ``j`` of ``ancestors`` becomes the new index ``j``.
        """
        self._require_connected()
        resampled = [int(a) for a in ancestors]
        workers = range(len(self._hosts))
        assignment = {
            w: sorted(i for i, owner in self._owner.items() if owner == w) for w in workers
        }
        max_load = max(math.ceil(len(resampled) / len(self._hosts)), 1)
        nodes = {
            w: (w // self.node_size if self.node_size else 0) for w in workers
        }
        plan = route_plan(assignment, resampled, max_load, node_of=nodes)
        self._execute_plan(plan, assignment)
        return dict(self.traffic)

    # -- plan execution -----------------------------------------------------------

    def _execute_plan(self, plan, assignment: dict[int, list[int]]) -> None:
        home = {t: w for w, tasks in assignment.items() for t in tasks}
        by_dest: dict[int, list[RouteInstruction]] = {}
        for ins in plan.instructions:
            by_dest.setdefault(ins.destination, []).append(ins)

        kept_at_home: set[int] = set()
        adopted: dict[int, int] = {}  # task -> destination taking the live model
        needs_state: dict[int, list[int]] = {}  # task -> destinations needing bytes
        for ins in plan.instructions:
            if not ins.primary:
                continue
            if ins.destination == ins.source:
                kept_at_home.add(ins.task)
        for ins in plan.instructions:
            if not ins.primary or ins.destination == ins.source:
                continue
            if (
                ins.affinity == "local"
                and ins.task not in kept_at_home
                and ins.task not in adopted
            ):
                adopted[ins.task] = ins.destination
            else:
                needs_state.setdefault(ins.task, []).append(ins.destination)

        # phase 1: serialize outgoing states, stash sandboxes, hand over models
        survivors = {ins.task for ins in plan.instructions if ins.primary}
        released: dict[int, Model] = {}
        exported: dict[int, ModelState] = {}
        pending = 0
        for w, tasks in assignment.items():
            exports = sorted(t for t in tasks if t in needs_state)
            if exports:
                self._send(w, ("export_states", exports))
                pending += 1
        for part in self._collect(pending).values():
            exported.update(part)
        pending = 0
        for w, tasks in assignment.items():
            stash = sorted(t for t in tasks if t in kept_at_home or t in adopted)
            handoff = sorted(t for t in tasks if t in adopted)
            drops = sorted(
                t for t in tasks if t not in kept_at_home and t not in adopted
            )
            self._send(w, ("stage", stash, handoff, drops))
            pending += 1
        for part in self._collect(pending).values():
            released.update(part)

        # phase 2 (after the barrier above): fetch, load and replicate
        model_class = None
        for instructions in by_dest.values():
            instructions.sort(key=lambda i: (not i.primary, i.reident))
        pending = 0
        for w in range(len(self._hosts)):
            fetches = []
            primary_of: dict[int, int] = {}
            for ins in by_dest.get(w, []):
                if ins.primary:
                    primary_of[ins.task] = ins.reident
                    if ins.destination == ins.source:
                        fetches.append(("keep", ins.task, ins.reident))
                    elif adopted.get(ins.task) == w:
                        fetches.append(("adopt", ins.task, ins.reident, released[ins.task]))
                        self.traffic["moved"] += 1
                    else:
                        state = exported[ins.task]
                        if model_class is None:
                            model_class = type(self._factory())
                        fetches.append(("load", ins.task, ins.reident, state, model_class))
                        self.traffic["moved"] += 1
                        self.traffic["bytes"] += state.nbytes()
                else:
                    fetches.append(("replicate", ins.task, ins.reident, primary_of[ins.task]))
                    self.traffic["copied"] += 1
            self._send(w, ("commit", fetches))
            pending += 1
        self._collect(pending)

        self._owner = {ins.reident: ins.destination for ins in plan.instructions}
        self._count = len(plan.instructions)
