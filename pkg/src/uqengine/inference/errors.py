"""Observational error models.

An error model maps a model output prediction and the parameters to a
distribution over the observations; its labels match the dataset
columns, and hyper-parameters (such as an observation noise scale) are
read from the parameters vector.
"""

from __future__ import annotations

import math
from typing import Mapping, Protocol, Sequence

import numpy as np

from uqengine.core import LabeledValues
from uqengine.distributions import Distribution

__all__ = ["ErrorModel", "IndependentNormalError", "row_logdensity", "peak_logdensity"]


class ErrorModel(Protocol):
    def __call__(self, prediction: LabeledValues, parameters: LabeledValues) -> Distribution: ...


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class _IndependentNormal(Distribution):
    """Slim product of label-wise normals centered at a prediction.

    Sits on the particle-filter hot path, so it avoids the generic
    Tensor/Normal object graph and offers the fused row-and-peak
    evaluation the filter needs at every snapshot.
    """

    __slots__ = ("labels", "_means", "_std", "_lognorm")

    def __init__(self, labels, means, std):
        self.labels = labels
        self._means = means
        self._std = std
        self._lognorm = -math.log(std) - _LOG_SQRT_2PI

    def logpdf(self, values: LabeledValues) -> float:
        return sum(self.logmpdf(l, float(values[l])) for l in self.labels)

    def logmpdf(self, label: str, value: float) -> float:
        z = (value - self._means[label]) / self._std
        return self._lognorm - 0.5 * z * z

    def mcdf(self, label: str, value: float) -> float:
        z = (value - self._means[label]) / (self._std * math.sqrt(2.0))
        return 0.5 * math.erfc(-z)

    def intervals(self, alpha: float):
        from scipy.special import ndtri

        half = self._std * float(ndtri((1.0 + alpha) / 2.0))
        return {l: (m - half, m + half) for l, m in self._means.items()}

    def draw(self, rng: np.random.Generator) -> LabeledValues:
        return LabeledValues(
            self.labels,
            [self._means[l] + self._std * float(rng.standard_normal()) for l in self.labels],
        )

    def row_and_peak(self, row: Mapping[str, float]) -> tuple[float, float]:
        """(log-density of the observation row, log-density at the peak).

        Missing cells are skipped; both terms share the per-cell
        normalization constant.
        """
        logw = 0.0
        peak = 0.0
        lognorm = self._lognorm
        std = self._std
        for label, value in row.items():
            if value != value:  # NaN
                continue
            z = (value - self._means[label]) / std
            logw += lognorm - 0.5 * z * z
            peak += lognorm
        return logw, peak


class IndependentNormalError:
    """Independent Gaussian noise per observed label, centered at the prediction.

    ``scale`` is either a parameter label (the noise standard deviation
    as an uncertain hyper-parameter) or a fixed number.
    """

    def __init__(self, labels: Sequence[str], scale: str | float):
        self.labels = tuple(labels)
        self.scale = scale

    def __call__(self, prediction: LabeledValues, parameters: LabeledValues) -> _IndependentNormal:
        std = float(parameters[self.scale]) if isinstance(self.scale, str) else float(self.scale)
        if std <= 0:
            raise ValueError(f"observation noise scale must be positive: {std}")
        return _IndependentNormal(
            self.labels, {l: float(prediction[l]) for l in self.labels}, std
        )


def row_logdensity(distribution: Distribution, row: Mapping[str, float]) -> float:
    """Joint log-density of one observation row; missing cells are skipped."""
    total = 0.0
    for label, value in row.items():
        if value != value:  # NaN
            continue
        lp = distribution.logmpdf(label, value)
        if lp == float("-inf"):
            return float("-inf")
        total += lp
    return total


def peak_logdensity(
    distribution: Distribution,
    prediction: LabeledValues,
    row: Mapping[str, float],
) -> float:
    """Log-density of the prediction under its own error distribution.

    Evaluated over the labels observed in ``row``; this is the
    normalizer of the fitscore.
    """
    total = 0.0
    for label, value in row.items():
        if value != value:
            continue
        lp = distribution.logmpdf(label, float(prediction[label]))
        if lp == float("-inf"):
            return float("-inf")
        total += lp
    return total
