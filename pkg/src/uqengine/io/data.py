"""Time-indexed observation tables with missing-value support."""

from __future__ import annotations

import io as _io
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np
import pandas as pd

__all__ = ["Dataset"]


class Dataset:
    """Observations at strictly increasing snapshot times.

    Cells may be missing (NaN), but no row and no column may consist of
    missing values only.
    """

    def __init__(self, times: Sequence[float], columns: Mapping[str, Sequence[float]]):
        self.times = np.asarray(times, dtype=np.float64)
        self.columns = {str(k): np.asarray(v, dtype=np.float64) for k, v in columns.items()}
        self._validate()

    def _validate(self) -> None:
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValueError("dataset needs at least one snapshot")
        if not self.columns:
            raise ValueError("dataset needs at least one observed quantity")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        table = np.column_stack([self.columns[label] for label in self.columns])
        if table.shape[0] != self.times.size:
            raise ValueError("column lengths do not match the time axis")
        missing = np.isnan(table)
        if np.any(missing.all(axis=1)):
            rows = np.nonzero(missing.all(axis=1))[0].tolist()
            raise ValueError(f"rows with only missing values: snapshots {rows}")
        if np.any(missing.all(axis=0)):
            bad = [l for l, m in zip(self.columns, missing.all(axis=0)) if m]
            raise ValueError(f"columns with only missing values: {bad}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.columns.keys())

    def __len__(self) -> int:
        return int(self.times.size)

    def rows(self) -> Iterator[tuple[float, dict[str, float]]]:
        """Yield (time, {label: value}) pairs; missing cells are NaN."""
        for i, t in enumerate(self.times):
            yield float(t), {label: float(col[i]) for label, col in self.columns.items()}

    def row(self, i: int) -> dict[str, float]:
        return {label: float(col[i]) for label, col in self.columns.items()}

    def cells(self) -> int:
        """Number of non-missing observation cells."""
        table = np.column_stack([self.columns[label] for label in self.columns])
        return int(np.sum(~np.isnan(table)))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"time": self.times, **self.columns})
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "Dataset":
        if "time" not in frame.columns:
            raise ValueError('dataset needs a time column named "time"')
        labels = [c for c in frame.columns if c != "time"]
        return cls(frame["time"].to_numpy(), {l: frame[l].to_numpy() for l in labels})

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        """Parse a comma- or whitespace-separated file with a header row."""
        text = Path(path).read_text()
        return cls.loads(text)

    @classmethod
    def loads(cls, text: str) -> "Dataset":
        sep = "," if "," in text.splitlines()[0] else r"\s+"
        frame = pd.read_csv(
            _io.StringIO(text),
            sep=sep,
            na_values=["NA", "N/A", "na", "nan", "NaN"],
            comment="#",
            skipinitialspace=True,
        )
        return cls.from_frame(frame)

    def write(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, sep=" ", index=False, na_rep="NA")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.labels != other.labels or not np.array_equal(self.times, other.times):
            return False
        return all(
            np.array_equal(self.columns[l], other.columns[l], equal_nan=True)
            for l in self.labels
        )

    def __repr__(self) -> str:
        return f"Dataset({len(self)} snapshots, labels={list(self.labels)})"
