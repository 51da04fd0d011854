"""Pool executor: stateless task map with deterministic result order.

Workers are in-process execution units pulling tasks from a queue;
results come back as messages keyed by task index, so the returned
sequence follows submission order regardless of completion order.
Tasks must be self-contained (carry their own seeds and sandboxes);
with that discipline, serial and parallel runs produce identical
results.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass
from typing import Any, Callable, Sequence

__all__ = ["PoolExecutor", "TaskFailure"]


@dataclass(frozen=True)
class TaskFailure:
    """Recorded in place of the result when a task keeps failing."""

    index: int
    error: str


class PoolExecutor:
    """Maps independent tasks over ``workers`` concurrent executors.

    ``workers`` of 0 (or None) runs everything serially in the calling
    thread. A task raising an exception is retried once on another
    worker, then recorded as a TaskFailure instead of crashing the map.
    """

    def __init__(self, workers: int | None = 0, retries: int = 1):
        self.workers = int(workers or 0)
        self.retries = int(retries)

    def map(self, tasks: Sequence[Callable[[], Any]]) -> list[Any]:
        tasks = list(tasks)
        if not tasks:
            return []
        if self.workers <= 0:
            return [self._attempt_serial(i, task) for i, task in enumerate(tasks)]
        return self._map_parallel(tasks)

    def _attempt_serial(self, index: int, task: Callable[[], Any]) -> Any:
        last = "unknown error"
        for _ in range(self.retries + 1):
            try:
                return task()
            except Exception as exc:
                last = f"{type(exc).__name__}: {exc}"
        return TaskFailure(index, last)

    def _map_parallel(self, tasks: Sequence[Callable[[], Any]]) -> list[Any]:
        pending: queue.Queue = queue.Queue()
        done: queue.Queue = queue.Queue()
        for i, task in enumerate(tasks):
            pending.put((i, task, 0))

        def worker() -> None:
            while True:
                item = pending.get()
                if item is None:
                    return
                index, task, attempt = item
                try:
                    done.put((index, task()))
                except Exception as exc:
                    if attempt < self.retries:
                        pending.put((index, task, attempt + 1))
                    else:
                        done.put((index, TaskFailure(index, f"{type(exc).__name__}: {exc}")))

        threads = [
            threading.Thread(target=worker, daemon=True, name=f"pool-{k}")
            for k in range(min(self.workers, len(tasks)))
        ]
        for t in threads:
            t.start()
        results: list[Any] = [None] * len(tasks)
        for _ in range(len(tasks)):
            index, value = done.get()
            results[index] = value
        for _ in threads:
            pending.put(None)
        for t in threads:
            t.join()
        return results
