"""Foundational types shared by every component.

Labeled value vectors, hierarchical seed paths reduced to 64-bit RNG seeds,
and nested sandbox directories. Everything here is immutable after
construction and safe to hand between workers.
"""

from __future__ import annotations

import os
import shutil
import threading
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "LabeledValues",
    "SeedPath",
    "Sandbox",
    "seed_reduce",
    "rng_create",
    "rng_reseed",
    "rng_for",
    "scratch_rng",
]

Scalar = float | int | str

_MASK64 = (1 << 64) - 1

# SplitMix64 increment; offsets the fold per hierarchy level so that
# [3, 1] and [1, 3] reduce to different seeds.
_GAMMA = 0x9E3779B97F4A7C15

# Arbitrary nonzero fold origin (first 16 hex digits of pi's fraction).
_FOLD_INIT = 0x243F6A8885A308D3


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: full-avalanche 64-bit mixing."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


# per-level fold offsets, extended on demand for deep hierarchies
_LEVEL_OFFSETS = tuple(((level + 1) * _GAMMA) & _MASK64 for level in range(16))


def seed_reduce(path: Sequence[int]) -> int:
    """Reduce a hierarchical seed path to one 64-bit unsigned seed.

    Deterministic and order-sensitive: the fold applies the SplitMix64
    avalanche to each level entry offset by a per-level constant, so
    distinct paths collide only with ~2^-64 hash probability.
    """
    if not path:
        raise ValueError("empty seed path")
    state = _FOLD_INIT
    offsets = _LEVEL_OFFSETS
    mask = _MASK64
    for level, entry in enumerate(path):
        entry = int(entry)
        if entry < 0:
            raise ValueError(f"negative seed path entry at level {level}: {entry}")
        offset = (
            offsets[level] if level < 16 else ((level + 1) * _GAMMA) & mask
        )
        z = (state ^ ((entry + offset) & mask)) & mask
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        state = z ^ (z >> 31)
    return state


# streams are PCG64 with a fixed odd increment; the 128-bit state is two
# avalanche rounds of the seed, so state assignment replaces the (much
# slower) SeedSequence construction
_PCG_INC = (_mix64(0x1357_9BDF_2468_ACE0) << 64) | (_mix64(0x0FED_CBA9_8765_4321) | 1)


def _pcg_state(seed: int) -> dict:
    seed = int(seed) & _MASK64
    state = (_mix64(seed) << 64) | _mix64(seed ^ _GAMMA)
    return {
        "bit_generator": "PCG64",
        "state": {"state": state, "inc": _PCG_INC},
        "has_uint32": 0,
        "uinteger": 0,
    }


def rng_create(seed: int) -> np.random.Generator:
    """Deterministic random stream for a 64-bit seed (PCG64)."""
    generator = np.random.Generator(np.random.PCG64())
    generator.bit_generator.state = _pcg_state(seed)
    return generator


_reseed_local = threading.local()


def rng_reseed(generator: np.random.Generator, seed: int) -> np.random.Generator:
    """Reset an existing stream to the state determined by ``seed``."""
    template = getattr(_reseed_local, "template", None)
    if template is None:
        # the state setter consumes the dict synchronously, so one
        # mutable template per thread is safe to reuse
        template = {
            "bit_generator": "PCG64",
            "state": {"state": 0, "inc": _PCG_INC},
            "has_uint32": 0,
            "uinteger": 0,
        }
        _reseed_local.template = template
    seed = int(seed) & _MASK64
    template["state"]["state"] = (_mix64(seed) << 64) | _mix64(seed ^ _GAMMA)
    generator.bit_generator.state = template
    return generator


def rng_for(path: Sequence[int]) -> np.random.Generator:
    """Random stream owned by the component identified by ``path``."""
    return rng_create(seed_reduce(path))


_scratch = threading.local()


def scratch_rng(path: Sequence[int]) -> np.random.Generator:
    """The calling thread's scratch stream, reset to the path's seed.

    For draws consumed immediately: the stream is only valid until the
    next ``scratch_rng`` call on the same thread. Avoids the (much more
    expensive) construction of a fresh bit generator per draw.
    """
    generator = getattr(_scratch, "generator", None)
    if generator is None:
        generator = np.random.Generator(np.random.PCG64(0))
        _scratch.generator = generator
    generator.bit_generator.state = _pcg_state(seed_reduce(path))
    return generator


class SeedPath:
    """Hierarchical seed: one nonnegative integer per component level.

    Levels follow the component nesting convention
    ``(global seed, batch, chain, attempt, replicate, particle, step)``;
    shallow prefixes are valid paths for outer components. Appending a
    level never alters the reduction of any other path, so random
    streams of sibling components stay independent. The fold state is
    cached and extended incrementally on ``spawn``: reducing a child
    path only mixes the appended entries.
    """

    __slots__ = ("_entries", "_fold")

    def __init__(self, entries: Iterable[int] = (0,)):
        entries = tuple(int(e) for e in entries)
        if not entries:
            raise ValueError("empty seed path")
        if any(e < 0 for e in entries):
            raise ValueError(f"seed path entries must be nonnegative: {entries}")
        self._entries = entries
        self._fold = seed_reduce(entries)

    @property
    def entries(self) -> tuple[int, ...]:
        return self._entries

    def spawn(self, *levels: int) -> "SeedPath":
        """Child path with the given level entries appended."""
        mask = _MASK64
        state = self._fold
        level = len(self._entries)
        for value in levels:
            value = int(value)
            if value < 0:
                raise ValueError(f"seed path entries must be nonnegative: {levels}")
            offset = (
                _LEVEL_OFFSETS[level] if level < 16 else ((level + 1) * _GAMMA) & mask
            )
            z = (state ^ ((value + offset) & mask)) & mask
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
            state = z ^ (z >> 31)
            level += 1
        child = SeedPath.__new__(SeedPath)
        child._entries = self._entries + tuple(int(v) for v in levels)
        child._fold = state
        return child

    def reduced(self) -> int:
        """The single 64-bit seed for this path."""
        return self._fold

    def rng(self) -> np.random.Generator:
        return rng_create(self.reduced())

    def __iter__(self) -> Iterator[int]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SeedPath) and self._entries == other._entries

    def __hash__(self) -> int:
        return hash(self._entries)

    def __repr__(self) -> str:
        return f"SeedPath{self._entries}"


def _format_scalar(value: Scalar) -> str:
    if isinstance(value, bool):
        raise TypeError("boolean values are not supported")
    if isinstance(value, (int, np.integer)) and not isinstance(value, np.floating):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        # repr round-trips doubles at up to 17 significant digits
        return repr(float(value))
    if isinstance(value, str):
        if not value or any(c.isspace() for c in value):
            raise ValueError(f"string values must be non-empty and whitespace-free: {value!r}")
        return value
    raise TypeError(f"unsupported value type: {type(value).__name__}")


def _parse_scalar(token: str) -> Scalar:
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token


class LabeledValues:
    """Ordered mapping from string labels to scalar values.

    The carrier for model parameters, model outputs and observation rows.
    Labels are unique and keep their order across the text round-trip.
    """

    __slots__ = ("_labels", "_values", "_index")

    def __init__(self, labels: Iterable[str], values: Iterable[Scalar]):
        labels = tuple(labels)
        values = tuple(values)
        if len(labels) != len(values):
            raise ValueError(f"{len(labels)} labels but {len(values)} values")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels: {labels}")
        self._labels = labels
        self._values = values
        self._index = {label: i for i, label in enumerate(labels)}

    @classmethod
    def from_dict(cls, mapping: Mapping[str, Scalar]) -> "LabeledValues":
        return cls(mapping.keys(), mapping.values())

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    @property
    def values(self) -> tuple[Scalar, ...]:
        return self._values

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __getitem__(self, label: str) -> Scalar:
        try:
            return self._values[self._index[label]]
        except KeyError:
            raise KeyError(f"label not in values: {label!r}") from None

    def get(self, label: str, default: Scalar | None = None) -> Scalar | None:
        i = self._index.get(label)
        return default if i is None else self._values[i]

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self._labels)

    def items(self) -> Iterator[tuple[str, Scalar]]:
        return zip(self._labels, self._values)

    def as_dict(self) -> dict[str, Scalar]:
        return dict(self.items())

    def as_array(self) -> np.ndarray:
        """Values as a float64 vector; raises on string entries."""
        return np.array([float(v) for v in self._values], dtype=np.float64)

    def updated(self, **changes: Scalar) -> "LabeledValues":
        """Copy with the given labels replaced or appended."""
        data = self.as_dict()
        data.update(changes)
        return LabeledValues.from_dict(data)

    def subset(self, labels: Iterable[str]) -> "LabeledValues":
        labels = tuple(labels)
        return LabeledValues(labels, tuple(self[l] for l in labels))

    def to_text(self) -> str:
        """One "name value" pair per line, whitespace-separated."""
        return "".join(f"{l} {_format_scalar(v)}\n" for l, v in self.items())

    @classmethod
    def from_text(cls, text: str) -> "LabeledValues":
        labels: list[str] = []
        values: list[Scalar] = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'name value', got {line!r}")
            labels.append(parts[0])
            values.append(_parse_scalar(parts[1]))
        return cls(labels, values)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, LabeledValues)
            and self._labels == other._labels
            and self._values == other._values
        )

    def __hash__(self) -> int:
        return hash((self._labels, self._values))

    def __repr__(self) -> str:
        inner = ", ".join(f"{l}={v!r}" for l, v in self.items())
        return f"LabeledValues({inner})"


class Sandbox:
    """Isolated working directory resolved from a component hierarchy.

    The root directory contains one nested directory per hierarchy level
    (batch, chain, replicate, particle), so distinct hierarchies resolve
    to distinct paths. Directories are created on first touch; template
    contents are copied in on creation when configured.
    """

    __slots__ = ("root", "hierarchy", "templatedir", "_path")

    def __init__(
        self,
        root: str | Path,
        hierarchy: Sequence[int | str] = (),
        templatedir: str | Path | None = None,
    ):
        self.root = Path(root)
        self.hierarchy = tuple(hierarchy)
        self.templatedir = Path(templatedir) if templatedir is not None else None
        self._path: Path | None = None

    def descend(self, *levels: int | str) -> "Sandbox":
        return Sandbox(self.root, self.hierarchy + levels, self.templatedir)

    def path(self) -> Path:
        """The directory path for this hierarchy (not necessarily created)."""
        if self._path is None:
            if self.hierarchy:
                self._path = self.root.joinpath(*(str(v) for v in self.hierarchy))
            else:
                self._path = self.root
        return self._path

    def exists(self) -> bool:
        return self.path().is_dir()

    def resolve(self, filename: str | None = None) -> Path:
        """Directory path, or a file path inside it; creates the tree.

        Filenames escaping the sandbox directory are rejected.
        """
        directory = self.path()
        if not directory.is_dir():
            directory.mkdir(parents=True, exist_ok=True)
            if self.templatedir is not None and self.templatedir.is_dir():
                shutil.copytree(self.templatedir, directory, dirs_exist_ok=True)
        if filename is None:
            return directory
        candidate = Path(filename)
        if candidate.is_absolute():
            raise ValueError(f"absolute filename not allowed in sandbox: {filename}")
        resolved = (directory / candidate).resolve()
        if not resolved.is_relative_to(directory.resolve()):
            raise ValueError(f"filename escapes sandbox: {filename}")
        return directory / candidate

    def __call__(self, filename: str | None = None) -> Path:
        return self.resolve(filename)

    def remove(self) -> None:
        """Delete this sandbox directory tree if present."""
        shutil.rmtree(self.path(), ignore_errors=True)

    def rename_to(self, other: "Sandbox") -> None:
        """Move this sandbox directory to another hierarchy (same filesystem)."""
        src = self.path()
        dst = other.path()
        if not src.is_dir():
            return
        dst.parent.mkdir(parents=True, exist_ok=True)
        if dst.is_dir():
            shutil.rmtree(dst)
        os.replace(src, dst)

    def copy_to(self, other: "Sandbox") -> None:
        """Replicate this sandbox's contents at another hierarchy."""
        src = self.path()
        if not src.is_dir():
            return
        shutil.copytree(src, other.path(), dirs_exist_ok=True)

    def __repr__(self) -> str:
        return f"Sandbox({self.path()})"
