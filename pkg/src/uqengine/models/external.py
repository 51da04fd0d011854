"""External model: couples any application speaking the file protocol.

Inputs are written into the model's sandbox before each execution
(``parameters.txt``, ``time.txt``, ``seed.txt``, plus ``initial.txt``
at initialization), the command runs with the sandbox as working
directory, and ``output.txt`` is parsed into labeled values. The
``<PARAMETERS>``, ``<TIME>`` and ``<SEED>`` keywords in the command are
substituted by the respective file contents. In direct mode the command
runs once for all times, reading ``times.txt``/``seeds.txt`` (keywords
``<TIMES>``/``<SEEDS>``) and writing ``outputs.txt``.
"""

from __future__ import annotations

import shlex

from uqengine.core import LabeledValues
from uqengine.executors.modelexec import model_execute
from uqengine.models.base import Model, ModelOutput

__all__ = ["External"]


class External(Model):
    def __init__(self, command: str, direct: bool = False, timeout: float | None = None):
        self.command = command
        self.direct = bool(direct)
        self.timeout = timeout
        self.t: float | None = None

    def init(self, initial: LabeledValues | None, parameters: LabeledValues) -> None:
        self.parameters = parameters
        if initial is not None:
            self.t = float(initial["time"]) if "time" in initial else None
            self.sandbox.resolve("initial.txt").write_text(initial.to_text())

    # -- incremental mode ----------------------------------------------------

    def run(self, time: float) -> ModelOutput | None:
        time = float(time)
        seed = self.seed.reduced()
        self.sandbox.resolve("parameters.txt").write_text(self.parameters.to_text())
        self.sandbox.resolve("time.txt").write_text(f"{time!r}\n")
        self.sandbox.resolve("seed.txt").write_text(f"{seed}\n")
        command = self.replace(self.command, time=time, seed=seed)
        result = model_execute(command, sandbox=self.sandbox, timeout=self.timeout)
        if not result.ok:
            self.print(f"external command failed (status {result.status}): {result.stderr}", 2)
            return None
        try:
            values = LabeledValues.from_text(self.sandbox.resolve("output.txt").read_text())
        except (OSError, ValueError) as exc:
            self.print(f"unparsable output.txt: {exc}", 2)
            return None
        self.t = time
        return ModelOutput(time, values)

    # -- direct mode -----------------------------------------------------------

    def run_direct(self, times) -> list[ModelOutput] | None:
        """Single execution evolving through all times at once."""
        times = [float(t) for t in times]
        if not times:
            raise ValueError("no times requested")
        seeds = [self.seed.spawn(i).reduced() for i in range(len(times))]
        self.sandbox.resolve("parameters.txt").write_text(self.parameters.to_text())
        self.sandbox.resolve("times.txt").write_text("".join(f"{t!r}\n" for t in times))
        self.sandbox.resolve("seeds.txt").write_text("".join(f"{s}\n" for s in seeds))
        command = self.replace(self.command, times=times, seeds=seeds)
        result = model_execute(command, sandbox=self.sandbox, timeout=self.timeout)
        if not result.ok:
            self.print(f"external command failed (status {result.status}): {result.stderr}", 2)
            return None
        try:
            rows = self._parse_outputs(self.sandbox.resolve("outputs.txt").read_text())
        except (OSError, ValueError) as exc:
            self.print(f"unparsable outputs.txt: {exc}", 2)
            return None
        self.t = times[-1]
        return rows

    @staticmethod
    def _parse_outputs(text: str) -> list[ModelOutput]:
        """Rows of "time name value"; lines sharing a time form one output."""
        grouped: dict[float, dict[str, float | int | str]] = {}
        order: list[float] = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'time name value', got {line!r}")
            time = float(parts[0])
            if time not in grouped:
                grouped[time] = {}
                order.append(time)
            grouped[time][parts[1]] = LabeledValues.from_text(f"{parts[1]} {parts[2]}")[parts[1]]
        return [ModelOutput(t, LabeledValues.from_dict(grouped[t])) for t in order]

    # -- keyword substitution ---------------------------------------------------

    def replace(self, command: str, time=None, seed=None, times=None, seeds=None) -> str:
        """Substitute protocol keywords in the command by file contents."""
        if "<PARAMETERS>" in command:
            flat = " ".join(f"{l} {v}" for l, v in self.parameters.items())
            command = command.replace("<PARAMETERS>", shlex.quote(flat))
        if time is not None and "<TIME>" in command:
            command = command.replace("<TIME>", repr(float(time)))
        if seed is not None and "<SEED>" in command:
            command = command.replace("<SEED>", str(seed))
        if times is not None and "<TIMES>" in command:
            command = command.replace("<TIMES>", shlex.quote(" ".join(repr(t) for t in times)))
        if seeds is not None and "<SEEDS>" in command:
            command = command.replace("<SEEDS>", shlex.quote(" ".join(str(s) for s in seeds)))
        return command
