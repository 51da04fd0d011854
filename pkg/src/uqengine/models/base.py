"""Model interface contract.

A model evolves a (possibly stochastic) state forward in time and
returns labeled outputs at requested times. The framework installs the
ambient context (sandbox, seed path, random stream, verbosity) before
``init`` and before every ``run`` call; cloning goes through the
``save``/``load`` byte-sequence serialization plus optional sandbox
statefiles.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass, field

import numpy as np

from uqengine.core import LabeledValues, Sandbox, SeedPath, rng_reseed
from uqengine.distributions import Distribution

__all__ = ["Model", "ModelOutput", "ModelState", "initial_resolve"]

# context attributes owned by the framework, never part of the model state
_AMBIENT = ("sandbox", "seed", "rng", "verbosity", "diagnostics")


@dataclass(frozen=True)
class ModelOutput:
    """Labeled model output at one time."""

    time: float
    values: LabeledValues


@dataclass
class ModelState:
    """Serialized model snapshot: instance bytes plus sandbox statefiles."""

    instance: bytes
    statefiles: dict[str, bytes] = field(default_factory=dict)

    def nbytes(self) -> int:
        return len(self.instance) + sum(len(b) for b in self.statefiles.values())


class Model:
    """Base model class; subclasses implement at least ``run``.

    ``run`` calls occur at strictly increasing times. A model restored
    via ``load`` does not execute ``init`` again and, driven with
    identical seeds, must reproduce the original outputs exactly.
    """

    # sandbox files carrying model state (wildcards allowed); configured
    statefiles: tuple[str, ...] = ()
    # non-serializable instance attribute names, skipped by save()
    ignore: tuple[str, ...] = ()

    sandbox: Sandbox | None = None
    seed: SeedPath = SeedPath((0,))
    rng: np.random.Generator = np.random.default_rng(0)
    verbosity: int = 0
    diagnostics = None

    def configure(self, **options) -> None:
        """Set shared component options (statefiles, templatedir, ...)."""
        for key, value in options.items():
            if key == "statefiles":
                self.statefiles = tuple(value) if value else ()
            elif key == "templatedir":
                if self.sandbox is not None and value is not None:
                    self.sandbox.templatedir = value
                self._templatedir = value
            elif key == "ignore":
                self.ignore = tuple(value) if value else ()
            else:
                setattr(self, key, value)

    # -- framework context ------------------------------------------------

    def place(self, sandbox: Sandbox | None) -> None:
        self.sandbox = sandbox
        templatedir = getattr(self, "_templatedir", None)
        if sandbox is not None and templatedir is not None:
            sandbox.templatedir = templatedir

    def reseed(self, seed: SeedPath) -> None:
        self.seed = seed
        if "rng" in self.__dict__:
            rng_reseed(self.rng, seed.reduced())
        else:
            self.rng = seed.rng()

    # -- lifecycle ---------------------------------------------------------

    def init(self, initial: LabeledValues | None, parameters: LabeledValues) -> None:
        self.initial = initial
        self.parameters = parameters

    def run(self, time: float) -> ModelOutput | None:
        raise NotImplementedError

    def exit(self) -> None:
        pass

    # -- serialization -----------------------------------------------------

    def save(self) -> bytes:
        """Instance state as a byte sequence (ambient attributes excluded)."""
        skip = set(_AMBIENT) | set(self.ignore)
        state = {k: v for k, v in self.__dict__.items() if k not in skip}
        return pickle.dumps(state, protocol=pickle.HIGHEST_PROTOCOL)

    def load(self, data: bytes) -> None:
        try:
            state = pickle.loads(data)
        except Exception as exc:
            raise ValueError(f"corrupt model state: {exc}") from exc
        if not isinstance(state, dict):
            raise ValueError(f"corrupt model state: expected dict, got {type(state).__name__}")
        self.__dict__.update(state)

    # -- sandbox statefiles --------------------------------------------------

    def write(self) -> None:
        """Write statefiles representing the current state to the sandbox."""

    def read(self) -> None:
        """Set the current state by reading statefiles from the sandbox."""

    def save_state(self) -> ModelState:
        """Full snapshot: instance bytes plus any statefile contents."""
        self.write()
        files: dict[str, bytes] = {}
        if self.statefiles and self.sandbox is not None and self.sandbox.exists():
            root = self.sandbox.path()
            for pattern in self.statefiles:
                for path in sorted(root.glob(pattern)):
                    if path.is_file():
                        files[str(path.relative_to(root))] = path.read_bytes()
        return ModelState(self.save(), files)

    def load_state(self, state: ModelState) -> None:
        """Restore a snapshot saved by ``save_state`` (does not call init)."""
        self.load(state.instance)
        if state.statefiles:
            if self.sandbox is None:
                raise ValueError("statefiles present but model has no sandbox")
            for name, content in state.statefiles.items():
                target = self.sandbox.resolve(name)
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_bytes(content)
            self.read()

    # -- helpers -------------------------------------------------------------

    def output(self, values, labels, time: float) -> ModelOutput:
        return ModelOutput(float(time), LabeledValues(labels, values))

    def print(self, message: str, level: int = 1) -> None:
        if self.verbosity >= level:
            print(message)


def initial_resolve(
    spec,
    parameters: LabeledValues,
    rng: np.random.Generator,
) -> tuple[LabeledValues | None, bool]:
    """Concrete initial state for one model instance.

    ``spec`` may be concrete LabeledValues, a Distribution (one draw per
    particle or trajectory, flagged so the draw can be recorded for
    posterior initial-state inference), or a callable of the parameters
    returning either.
    """
    if spec is None:
        return None, False
    if isinstance(spec, ModelState):
        # a stored snapshot to continue from (forecast, sequential updating)
        return spec, False
    if callable(spec) and not isinstance(spec, (Distribution, LabeledValues)):
        spec = spec(parameters)
    if isinstance(spec, Distribution):
        return spec.draw(rng), True
    if isinstance(spec, LabeledValues):
        return spec, False
    if isinstance(spec, dict):
        return LabeledValues.from_dict(spec), False
    raise TypeError(f"unsupported initial state spec: {type(spec).__name__}")
