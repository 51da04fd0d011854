"""Built-in walk models on a one-dimensional line."""

from __future__ import annotations

import math

from uqengine.core import LabeledValues
from uqengine.models.base import Model, ModelOutput

__all__ = ["Randomwalk", "Straightwalk"]

# tolerance for hitting a snapshot time exactly after float step division
_TIME_EPS = 1e-9


class Randomwalk(Model):
    """Stochastic walk: every dt the position moves by dt*mu + sqrt(dt)*sigma*xi.

    Parameters are the drift ``mu`` and the volatility ``sigma``; the
    initial state carries ``position`` and ``time``. The model state
    coincides with the model output. The default dt of 0.1 keeps
    integer snapshot times on the step grid; a final shortened step
    lands exactly on the requested time.
    """

    def __init__(self, dt: float = 0.1):
        if dt <= 0:
            raise ValueError(f"dt must be positive: {dt}")
        self.dt = float(dt)

    def init(self, initial: LabeledValues, parameters: LabeledValues) -> None:
        self.t = float(initial["time"])
        self.position = float(initial["position"])
        self.mu = float(parameters["mu"])
        self.sigma = float(parameters["sigma"])

    def run(self, time: float) -> ModelOutput | None:
        time = float(time)
        span = time - self.t
        if span < -_TIME_EPS:
            return None
        if span > _TIME_EPS:
            steps = int(math.floor(span / self.dt + _TIME_EPS))
            remainder = span - steps * self.dt
            position = self.position
            if steps > 0:
                noise = self.rng.standard_normal(steps)
                position += self.dt * self.mu * steps
                position += math.sqrt(self.dt) * self.sigma * float(noise.sum())
            if remainder > _TIME_EPS:
                position += remainder * self.mu
                position += math.sqrt(remainder) * self.sigma * float(self.rng.standard_normal())
            self.position = position
            self.t = time
        return self.output([self.position], ["position"], time)


class Straightwalk(Model):
    """Deterministic linear motion: position = start + mu * elapsed time."""

    def init(self, initial: LabeledValues, parameters: LabeledValues) -> None:
        self.t0 = float(initial["time"])
        self.start = float(initial["position"])
        self.mu = float(parameters["mu"])

    def run(self, time: float) -> ModelOutput | None:
        time = float(time)
        if time < self.t0 - _TIME_EPS:
            return None
        return self.output([self.start + self.mu * (time - self.t0)], ["position"], time)
