"""Behavioral model checks: clone, move and reseed tests.

The clone test runs a model to a clone time, snapshots its state, loads
the snapshot into a fresh instance (without calling ``init``) and drives
both with identical seeds: outputs must be identical. The move test
relocates the sandbox between runs; the reseed test verifies the model
tolerates per-call seed updates reproducibly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from uqengine.core import LabeledValues, Sandbox, SeedPath
from uqengine.models.base import Model, ModelOutput

__all__ = ["CheckReport", "clone_test", "move_test", "reseed_test", "run_model_checks"]


@dataclass
class CheckReport:
    name: str
    passed: bool
    details: list[str] = field(default_factory=list)


def _drive(
    model: Model,
    times: Sequence[float],
    path: SeedPath,
    start_step: int = 1,
) -> list[ModelOutput | None]:
    outputs = []
    for offset, time in enumerate(times):
        model.reseed(path.spawn(start_step + offset))
        outputs.append(model.run(float(time)))
    return outputs


def _outputs_equal(a: ModelOutput | None, b: ModelOutput | None) -> bool:
    if a is None or b is None:
        return a is b
    return a.time == b.time and a.values == b.values


def clone_test(
    factory: Callable[[], Model],
    initial: LabeledValues | None,
    parameters: LabeledValues,
    times: Sequence[float],
    clone_at: float,
    sandbox: Sandbox | None = None,
    seed: int = 0,
) -> CheckReport:
    times = [float(t) for t in times]
    before = [t for t in times if t <= clone_at]
    after = [t for t in times if t > clone_at]
    path = SeedPath((seed,))

    original = factory()
    original.place(sandbox.descend("clone-original") if sandbox else None)
    original.reseed(path.spawn(0))
    original.init(initial, parameters)
    _drive(original, before, path)

    state = original.save_state()
    clone = factory()
    clone.place(sandbox.descend("clone-copy") if sandbox else None)
    clone.load_state(state)

    start = len(before) + 1
    got_a = _drive(original, after, path, start_step=start)
    got_b = _drive(clone, after, path, start_step=start)
    original.exit()
    clone.exit()

    details = [
        f"t={t}: original={a.values.as_dict() if a else None} clone={b.values.as_dict() if b else None}"
        for t, a, b in zip(after, got_a, got_b)
        if not _outputs_equal(a, b)
    ]
    return CheckReport("clone", not details, details)


def move_test(
    factory: Callable[[], Model],
    initial: LabeledValues | None,
    parameters: LabeledValues,
    times: Sequence[float],
    sandbox: Sandbox,
    seed: int = 0,
) -> CheckReport:
    times = [float(t) for t in times]
    path = SeedPath((seed,))

    def run_with_moves(tag: str, move: bool) -> list[ModelOutput | None]:
        model = factory()
        box = sandbox.descend(f"move-{tag}-0")
        model.place(box)
        model.reseed(path.spawn(0))
        model.init(initial, parameters)
        outputs = []
        for step, time in enumerate(times, start=1):
            if move and step > 1:
                model.write()
                new_box = sandbox.descend(f"move-{tag}-{step - 1}")
                box.rename_to(new_box)
                box = new_box
                model.place(box)
                model.read()
            model.reseed(path.spawn(step))
            outputs.append(model.run(float(time)))
        model.exit()
        return outputs

    stationary = run_with_moves("still", move=False)
    moved = run_with_moves("roam", move=True)
    details = [
        f"t={t}: stationary={a.values.as_dict() if a else None} moved={b.values.as_dict() if b else None}"
        for t, a, b in zip(times, stationary, moved)
        if not _outputs_equal(a, b)
    ]
    return CheckReport("move", not details, details)


def reseed_test(
    factory: Callable[[], Model],
    initial: LabeledValues | None,
    parameters: LabeledValues,
    times: Sequence[float],
    sandbox: Sandbox | None = None,
    seed: int = 0,
) -> CheckReport:
    times = [float(t) for t in times]
    path = SeedPath((seed,))

    def run_once(tag: str) -> list[ModelOutput | None]:
        model = factory()
        model.place(sandbox.descend(f"reseed-{tag}") if sandbox else None)
        model.reseed(path.spawn(0))
        model.init(initial, parameters)
        outputs = _drive(model, times, path)
        model.exit()
        return outputs

    first = run_once("a")
    second = run_once("b")
    details = [
        f"t={t}: first={a.values.as_dict() if a else None} second={b.values.as_dict() if b else None}"
        for t, a, b in zip(times, first, second)
        if not _outputs_equal(a, b)
    ]
    return CheckReport("reseed", not details, details)


def run_model_checks(
    factory: Callable[[], Model],
    initial: LabeledValues | None,
    parameters: LabeledValues,
    times: Sequence[float],
    sandbox: Sandbox,
    seed: int = 0,
) -> list[CheckReport]:
    """Clone, move and reseed checks on a fixed time grid."""
    times = [float(t) for t in times]
    clone_at = times[len(times) // 2 - 1] if len(times) > 1 else times[0]
    return [
        clone_test(factory, initial, parameters, times, clone_at, sandbox, seed),
        move_test(factory, initial, parameters, times, sandbox, seed),
        reseed_test(factory, initial, parameters, times, sandbox, seed),
    ]
