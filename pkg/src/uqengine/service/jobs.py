"""Background execution of engine runs with an in-memory registry."""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from uqengine.config import config_parse_text
from uqengine.engine import Engine

__all__ = ["Job", "JobRegistry"]


@dataclass
class Job:
    id: str
    mode: str
    state: str = "queued"
    created: float = field(default_factory=time.time)
    finished: float | None = None
    error: str | None = None
    outputdir: str | None = None
    summary: dict | None = None


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return value


class JobRegistry:
    """Tracks runs; each executes the engine in its own worker thread."""

    def __init__(self, workdir: str | Path):
        self.workdir = Path(workdir)
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def submit(
        self,
        config_text: str,
        mode: str,
        seed: int | None = None,
        outputdir: str | None = None,
        serial: bool = False,
    ) -> Job:
        job_id = uuid.uuid4().hex[:12]
        jobdir = self.workdir / job_id
        jobdir.mkdir(parents=True, exist_ok=True)
        (jobdir / "run.cfg").write_text(config_text)
        config = config_parse_text(config_text, basedir=jobdir)  # validate before queuing
        if seed is not None:
            config.seed = seed
        config.outputdir = outputdir if outputdir else str(jobdir / "output")
        if "sandboxdir" not in config_text:
            config.sandboxdir = str(jobdir / "sandbox")

        job = Job(id=job_id, mode=mode, outputdir=str(config.resolve_path(config.outputdir)))
        with self._lock:
            self._jobs[job_id] = job

        def execute() -> None:
            job.state = "running"
            try:
                engine = Engine(config, serial=serial)
                result = engine.run(mode)
                job.summary = _jsonable(
                    {k: v for k, v in result.items() if k not in ("report", "values")}
                )
                job.state = "done"
            except Exception as exc:
                job.error = f"{type(exc).__name__}: {exc}"
                job.state = "failed"
            finally:
                job.finished = time.time()

        threading.Thread(target=execute, daemon=True, name=f"run-{job_id}").start()
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def list(self) -> list[Job]:
        with self._lock:
            return sorted(self._jobs.values(), key=lambda j: j.created)

    def remove(self, job_id: str) -> bool:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None or job.state in ("queued", "running"):
                return False
            del self._jobs[job_id]
            return True
