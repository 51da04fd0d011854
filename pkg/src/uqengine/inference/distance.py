"""Distances between observations and simulated outputs (ABC samplers)."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from uqengine.io.data import Dataset
from uqengine.models.base import ModelOutput

__all__ = ["norm_distance"]


def norm_distance(dataset: Dataset, outputs: Sequence[ModelOutput], order: float = 2) -> float:
    """Cell-count-normalized l-norm of (observations - outputs).

    ``order`` is 1, 2 or inf; missing dataset cells are excluded. The
    outputs must cover every snapshot time of the dataset.
    """
    if order not in (1, 2, math.inf):
        raise ValueError(f"order must be 1, 2 or inf: {order}")
    by_time = {out.time: out.values for out in outputs if out is not None}
    diffs: list[float] = []
    for time, row in dataset.rows():
        values = by_time.get(time)
        if values is None:
            raise ValueError(f"no simulated output at snapshot time {time}")
        for label, observed in row.items():
            if observed != observed:  # NaN
                continue
            diffs.append(abs(observed - float(values[label])))
    if not diffs:
        raise ValueError("no overlapping observation cells")
    d = np.asarray(diffs)
    if order == math.inf:
        return float(d.max())
    return float((np.sum(d**order) / d.size) ** (1.0 / order))
