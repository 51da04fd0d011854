"""Stochastic input processes for use inside model classes."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["OrnsteinUhlenbeck"]


class OrnsteinUhlenbeck:
    """Standard (zero-mean, unit-variance) OU process with correlation length tau.

    ``evaluate`` advances the process to the requested time using the
    exact transition kernel
    ``x_t = x_prev * exp(-d/tau) + sqrt(1 - exp(-2 d/tau)) * xi``,
    so the result is independent of how the time axis is partitioned.
    """

    def __init__(self, tau: float):
        if tau <= 0:
            raise ValueError(f"correlation length must be positive: {tau}")
        self.tau = float(tau)
        self.t: float | None = None
        self.x: float | None = None

    def evaluate(self, time: float, rng: np.random.Generator) -> float:
        time = float(time)
        if self.t is None:
            self.x = float(rng.standard_normal())
        else:
            delta = time - self.t
            if delta < 0:
                raise ValueError(f"time moved backwards: {self.t} -> {time}")
            if delta > 0:
                decay = math.exp(-delta / self.tau)
                self.x = self.x * decay + math.sqrt(1.0 - decay * decay) * float(
                    rng.standard_normal()
                )
        self.t = time
        return self.x
