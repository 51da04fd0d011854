"""Checkpointed inference output store.

Layout of the output directory:

    samples/          parameters-*.csv, predictions-*.dat, infos-*.dat, timings-*.dat
    best/             best parameters and trajectory
    diagnostics/      report tables (metrics, residuals)
    specifications/   configuration snapshot and store format version
    pickup/           sampler continuation state
    states/           final model states per batch (when enabled)
    workers.txt       cumulative worker count

Parameter samples persist as CSV; predictions, infos and timings as
length-prefixed binary records behind a versioned header. Records are
append-only: a store truncated at any checkpoint boundary stays
loadable.
"""

from __future__ import annotations

import csv
import json
import os
import pickle
import time as _time
import warnings
from pathlib import Path
from typing import Any, Iterable

__all__ = ["InferenceStore", "write_records", "read_records", "STORE_MAGIC", "STORE_VERSION"]

STORE_MAGIC = b"UQRC"
STORE_VERSION = 1


def write_records(path: str | Path, records: Iterable[Any], append: bool = False) -> None:
    """Write length-prefixed pickled records behind the versioned header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not (append and path.exists())
    mode = "wb" if fresh else "ab"
    with open(path, mode) as f:
        if fresh:
            f.write(STORE_MAGIC + STORE_VERSION.to_bytes(2, "little"))
        for record in records:
            payload = pickle.dumps(record, protocol=pickle.HIGHEST_PROTOCOL)
            f.write(len(payload).to_bytes(8, "little"))
            f.write(payload)


def read_records(path: str | Path) -> list[Any]:
    """Read records, tolerating a truncated tail (with a warning)."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 6 or data[:4] != STORE_MAGIC:
        raise ValueError(f"not a record store: {path}")
    version = int.from_bytes(data[4:6], "little")
    if version > STORE_VERSION:
        raise ValueError(f"unsupported store version {version} in {path}")
    records = []
    offset = 6
    while offset < len(data):
        if offset + 8 > len(data):
            warnings.warn(f"truncated record header in {path}; keeping {len(records)} records")
            break
        size = int.from_bytes(data[offset : offset + 8], "little")
        offset += 8
        if offset + size > len(data):
            warnings.warn(f"truncated record payload in {path}; keeping {len(records)} records")
            break
        records.append(pickle.loads(data[offset : offset + size]))
        offset += size
    return records


class InferenceStore:
    """Single-writer store for batch records with rate-limited checkpoints."""

    def __init__(self, outputdir: str | Path, checkpoint_interval: float = 600.0):
        self.outputdir = Path(outputdir)
        self.interval = float(checkpoint_interval)
        self._buffer: list[dict] = []
        self._last_flush = _time.monotonic()
        self._labels: tuple[str, ...] | None = None

    # -- setup ------------------------------------------------------------

    def begin(self, specification: dict | None = None, workers: int | None = None) -> None:
        self.outputdir.mkdir(parents=True, exist_ok=True)
        spec_dir = self.outputdir / "specifications"
        spec_dir.mkdir(exist_ok=True)
        (spec_dir / "format.json").write_text(
            json.dumps({"magic": STORE_MAGIC.decode(), "version": STORE_VERSION}, indent=2)
        )
        if specification is not None:
            (spec_dir / "configuration.json").write_text(json.dumps(specification, indent=2))
        if workers is not None:
            (self.outputdir / "workers.txt").write_text(f"{workers}\n")

    # -- appending ------------------------------------------------------------

    def append(self, bundle: dict) -> None:
        """Queue one batch bundle; persisted at the next checkpoint."""
        if self._labels is None and bundle["chains"]:
            self._labels = tuple(bundle["chains"][0]["parameters"].keys())
        self._buffer.append(bundle)

    def checkpoint(self, force: bool = False) -> bool:
        """Flush buffered batches if the minimal interval elapsed."""
        if not self._buffer:
            return False
        if not force and (_time.monotonic() - self._last_flush) < self.interval:
            return False
        self._flush()
        self._last_flush = _time.monotonic()
        return True

    def _flush(self) -> None:
        first = self._buffer[0]["batch"]
        tag = f"{first:06d}"
        samples = self.outputdir / "samples"
        samples.mkdir(parents=True, exist_ok=True)

        with open(samples / f"parameters-{tag}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(
                ["batch", "chain", *self._labels, "logprior", "loglik", "logpost", "accepted"]
            )
            for bundle in self._buffer:
                for chain, record in enumerate(bundle["chains"]):
                    writer.writerow(
                        [
                            bundle["batch"],
                            chain,
                            *[record["parameters"][l] for l in self._labels],
                            record["logprior"],
                            record["loglik"],
                            record["logpost"],
                            int(record["accepted"]),
                        ]
                    )

        write_records(
            samples / f"predictions-{tag}.dat",
            ({"batch": b["batch"], "chains": b.get("predictions")} for b in self._buffer),
        )
        write_records(
            samples / f"infos-{tag}.dat",
            ({"batch": b["batch"], "chains": b.get("infos")} for b in self._buffer),
        )
        write_records(
            samples / f"timings-{tag}.dat",
            ({"batch": b["batch"], "timing": b.get("timings")} for b in self._buffer),
        )
        stateful = [b for b in self._buffer if b.get("states")]
        if stateful:
            write_records(
                self.outputdir / "states" / f"states-{tag}.dat",
                ({"batch": b["batch"], "chains": b["states"]} for b in stateful),
            )

        pickup = self._buffer[-1].get("pickup")
        if pickup is not None:
            self._write_pickup(pickup)
        self._buffer = []

    def _write_pickup(self, pickup: dict) -> None:
        pickup_dir = self.outputdir / "pickup"
        pickup_dir.mkdir(parents=True, exist_ok=True)
        temp = pickup_dir / "pickup.dat.tmp"
        temp.write_bytes(pickle.dumps(pickup, protocol=pickle.HIGHEST_PROTOCOL))
        os.replace(temp, pickup_dir / "pickup.dat")

    def write_best(self, best: dict, trajectory: dict | None = None) -> None:
        best_dir = self.outputdir / "best"
        best_dir.mkdir(parents=True, exist_ok=True)
        payload = {k: v for k, v in best.items() if k != "trajectory"}
        (best_dir / "best.json").write_text(json.dumps(payload, indent=2, default=float))
        if trajectory is not None:
            with open(best_dir / "trajectory.csv", "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["time", *trajectory["labels"]])
                for t, row in zip(trajectory["times"], trajectory["values"]):
                    writer.writerow([t, *row])

    def write_diagnostics(self, name: str, text: str) -> Path:
        diag = self.outputdir / "diagnostics"
        diag.mkdir(parents=True, exist_ok=True)
        path = diag / name
        path.write_text(text)
        return path

    # -- continuation -------------------------------------------------------------

    def truncate_after(self, batch: int) -> None:
        """Drop persisted batches beyond ``batch`` (continuation restart point)."""
        samples = self.outputdir / "samples"
        if not samples.is_dir():
            return
        for path in sorted(samples.glob("parameters-*.csv")):
            self._truncate_csv(path, batch)
        for stem in ("predictions", "infos", "timings"):
            for path in sorted(samples.glob(f"{stem}-*.dat")):
                self._truncate_records(path, batch)
        states = self.outputdir / "states"
        if states.is_dir():
            for path in sorted(states.glob("states-*.dat")):
                self._truncate_records(path, batch)

    @staticmethod
    def _truncate_csv(path: Path, batch: int) -> None:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        if len(rows) <= 1:
            return
        header, body = rows[0], rows[1:]
        kept = [r for r in body if int(r[0]) <= batch]
        if not kept:
            path.unlink()
        elif len(kept) < len(body):
            with open(path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(header)
                writer.writerows(kept)

    @staticmethod
    def _truncate_records(path: Path, batch: int) -> None:
        records = read_records(path)
        kept = [r for r in records if r["batch"] <= batch]
        if not kept:
            path.unlink()
        elif len(kept) < len(records):
            write_records(path, kept)
