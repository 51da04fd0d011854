"""Reconstructed view over an inference output directory."""

from __future__ import annotations

import json
import pickle
from pathlib import Path

import numpy as np
import pandas as pd

from uqengine.io.store import read_records

__all__ = ["Status"]


class Status:
    """Keyed access to parameters, predictions, infos and timings.

    When a pickup record exists, batches beyond it are ignored: they
    belong to work after the last consistent checkpoint and will be
    recomputed on continuation.
    """

    def __init__(self, outputdir: str | Path):
        self.outputdir = Path(outputdir)
        self._pickup = self._load_pickup()
        limit = self._pickup["batch"] if self._pickup else None
        self.parameters = self._load_parameters(limit)
        self._predictions = self._load_keyed("predictions", limit)
        self._infos = self._load_keyed("infos", limit)
        self._timings = self._load_keyed("timings", limit)

    # -- loading ------------------------------------------------------------

    def _load_pickup(self) -> dict | None:
        path = self.outputdir / "pickup" / "pickup.dat"
        if not path.exists():
            return None
        return pickle.loads(path.read_bytes())

    def _load_parameters(self, limit: int | None) -> pd.DataFrame:
        frames = []
        for path in sorted((self.outputdir / "samples").glob("parameters-*.csv")):
            # exact float round-trip; the default parser is off by an ulp
            frames.append(pd.read_csv(path, float_precision="round_trip"))
        if not frames:
            return pd.DataFrame(columns=["batch", "chain"])
        table = pd.concat(frames, ignore_index=True)
        if limit is not None:
            table = table[table["batch"] <= limit]
        return table.sort_values(["batch", "chain"], ignore_index=True)

    def _load_keyed(self, stem: str, limit: int | None) -> dict[int, dict]:
        out: dict[int, dict] = {}
        samples = self.outputdir / "samples"
        if samples.is_dir():
            for path in sorted(samples.glob(f"{stem}-*.dat")):
                for record in read_records(path):
                    if limit is None or record["batch"] <= limit:
                        out[record["batch"]] = record
        return out

    # -- accessors ------------------------------------------------------------

    @property
    def batches(self) -> list[int]:
        return sorted(self._infos.keys())

    @property
    def labels(self) -> list[str]:
        fixed = {"batch", "chain", "logprior", "loglik", "logpost", "accepted"}
        return [c for c in self.parameters.columns if c not in fixed]

    def pickup(self) -> dict | None:
        return self._pickup

    def info(self, key: str, batch: int, chain: int | None = None):
        record = self._infos[batch]["chains"]
        if chain is not None:
            return record[chain].get(key)
        return [entry.get(key) for entry in record]

    def timing(self, batch: int):
        return self._timings[batch]["timing"]

    def prediction(self, batch: int, chain: int, time: float | None = None):
        """Stored posterior trajectory; follows the accepted origin when absent."""
        record = self._predictions[batch]["chains"]
        entry = record[chain] if record else None
        if entry is None:
            origin = self._infos[batch]["chains"][chain].get("origin")
            if origin is None:
                return None
            return self.prediction(origin[0], origin[1], time)
        if time is None:
            return entry
        for t, row in zip(entry["times"], entry["values"]):
            if t == time:
                return dict(zip(entry["labels"], row))
        raise KeyError(f"no prediction at time {time} in batch {batch} chain {chain}")

    def states(self, batch: int):
        states_dir = self.outputdir / "states"
        if not states_dir.is_dir():
            raise FileNotFoundError(
                "no stored model states; run the inference with states enabled"
            )
        for path in sorted(states_dir.glob("states-*.dat")):
            for record in read_records(path):
                if record["batch"] == batch:
                    return record["chains"]
        raise KeyError(f"no states stored for batch {batch}")

    def final_states(self):
        """(batch, states) for the last batch carrying stored model states."""
        states_dir = self.outputdir / "states"
        if not states_dir.is_dir():
            raise FileNotFoundError(
                "no stored model states; run the inference with states enabled"
            )
        latest: tuple[int, list] | None = None
        for path in sorted(states_dir.glob("states-*.dat")):
            for record in read_records(path):
                if latest is None or record["batch"] > latest[0]:
                    latest = (record["batch"], record["chains"])
        if latest is None:
            raise FileNotFoundError("states directory is empty")
        return latest

    def best(self) -> dict | None:
        path = self.outputdir / "best" / "best.json"
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def configuration(self) -> dict | None:
        path = self.outputdir / "specifications" / "configuration.json"
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def chains_array(self, burn: int = 0, thin: int = 1) -> np.ndarray:
        """(chains, kept batches, labels) array of parameter samples."""
        labels = self.labels
        table = self.parameters
        chains = sorted(table["chain"].unique())
        batches = sorted(table["batch"].unique())
        kept = [b for b in batches if b > burn][:: max(thin, 1)]
        out = np.empty((len(chains), len(kept), len(labels)))
        for i, chain in enumerate(chains):
            sub = table[table["chain"] == chain].set_index("batch")
            out[i] = sub.loc[kept, labels].to_numpy()
        return out
