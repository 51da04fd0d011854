"""Model executor: runs a user application as a separate process.

The working directory is the model's sandbox; a nonzero exit status is
reported, never raised. With no workers attached the semantics are the
same as an in-shell execution.
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass
from pathlib import Path

from uqengine.core import Sandbox

__all__ = ["ExecutionResult", "ModelExecutor", "model_execute"]


@dataclass(frozen=True)
class ExecutionResult:
    status: int
    stdout: str
    stderr: str

    @property
    def ok(self) -> bool:
        return self.status == 0


def model_execute(
    command: str,
    args: tuple[str, ...] = (),
    sandbox: Sandbox | Path | str | None = None,
    timeout: float | None = None,
) -> ExecutionResult:
    """Run ``command`` (plus arguments) with the sandbox as working directory."""
    cwd = sandbox.resolve() if isinstance(sandbox, Sandbox) else sandbox
    full = command if not args else command + " " + " ".join(args)
    try:
        proc = subprocess.run(
            full,
            shell=True,
            cwd=str(cwd) if cwd is not None else None,
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired as exc:
        return ExecutionResult(-1, exc.stdout or "", f"timeout after {timeout}s")
    return ExecutionResult(proc.returncode, proc.stdout, proc.stderr)


class ModelExecutor:
    """Process launcher attachable to a model.

    ``workers`` documents the resource claim of a parallel application;
    execution itself always goes through the shell in this in-process
    realization.
    """

    def __init__(self, workers: int = 0):
        self.workers = int(workers or 0)

    def execute(
        self,
        command: str,
        args: tuple[str, ...] = (),
        sandbox: Sandbox | Path | str | None = None,
        timeout: float | None = None,
    ) -> ExecutionResult:
        return model_execute(command, args, sandbox, timeout)
