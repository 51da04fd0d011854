"""Posterior residuals and quantile-quantile calibration pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uqengine.core import LabeledValues
from uqengine.io.data import Dataset

__all__ = ["ResidualReport", "residuals_and_qq"]


@dataclass
class ResidualReport:
    times: np.ndarray
    labels: tuple[str, ...]
    residuals: np.ndarray  # (samples*snapshots, labels) dataset - prediction, NaN padded
    qq_theory: np.ndarray  # theoretical quantiles (uniform, via the PIT)
    qq_empirical: np.ndarray  # sorted probability integral transforms

    def qq_slope(self) -> float:
        """Least-squares slope of empirical vs theoretical quantiles."""
        x, y = self.qq_theory, self.qq_empirical
        x = x - x.mean()
        return float(np.dot(x, y) / np.dot(x, x))


def residuals_and_qq(
    dataset: Dataset,
    predictions: list[dict],
    error,
    parameters: list[LabeledValues],
) -> ResidualReport:
    """Residual table and PIT-based QQ pairs over posterior samples.

    ``predictions`` holds one stored trajectory per retained posterior
    sample ({"times", "labels", "values"}); each observation is
    transformed through the marginal CDF of its sample's error
    distribution, so perfect calibration gives a unit-slope QQ line.
    Missing dataset cells are excluded.
    """
    labels = dataset.labels
    residual_rows = []
    pit: list[float] = []
    for prediction, theta in zip(predictions, parameters):
        series = {
            float(t): dict(zip(prediction["labels"], row))
            for t, row in zip(prediction["times"], prediction["values"])
        }
        for time, row in dataset.rows():
            predicted = series.get(time)
            if predicted is None:
                continue
            values = LabeledValues(list(predicted.keys()), list(predicted.values()))
            distribution = error(values, theta)
            residual_row = []
            for label in labels:
                observed = row[label]
                if observed != observed:  # NaN
                    residual_row.append(np.nan)
                    continue
                residual_row.append(observed - predicted[label])
                pit.append(distribution.mcdf(label, observed))
            residual_rows.append(residual_row)
    if not pit:
        raise ValueError("no overlapping observation cells in predictions")
    empirical = np.sort(np.asarray(pit))
    theory = (np.arange(1, empirical.size + 1) - 0.5) / empirical.size
    return ResidualReport(
        times=dataset.times,
        labels=labels,
        residuals=np.asarray(residual_rows),
        qq_theory=theory,
        qq_empirical=empirical,
    )
