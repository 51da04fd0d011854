"""Joint and univariate probability distributions.

Provides the joint-distribution contract (log-density, marginals, draws,
support intervals), the Tensor product of independent univariates, and
the Truncate / Concentrate / Transform wrappers. Densities of the
built-in univariates are hand-coded: they sit on the hot path of the
particle filter, where frozen scipy distributions are too slow.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import ndtri

from uqengine.core import LabeledValues

__all__ = [
    "Distribution",
    "DrawUnavailable",
    "Univariate",
    "Uniform",
    "Normal",
    "Lognormal",
    "Exponential",
    "Delta",
    "Truncate",
    "Concentrate",
    "Transform",
    "Tensor",
    "Empirical",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
NEGINF = float("-inf")


class DrawUnavailable(RuntimeError):
    """Raised by distributions that cannot produce samples."""


class Distribution:
    """Joint probability object over labeled values.

    Invalid values yield pdf 0 and logpdf -inf rather than raising, and
    draws land inside the support with probability one.
    """

    labels: tuple[str, ...] = ()

    def logpdf(self, values: LabeledValues) -> float:
        raise NotImplementedError

    def pdf(self, values: LabeledValues) -> float:
        lp = self.logpdf(values)
        return math.exp(lp) if lp > NEGINF else 0.0

    def logmpdf(self, label: str, value: float) -> float:
        raise NotImplementedError

    def mpdf(self, label: str, value: float) -> float:
        lp = self.logmpdf(label, value)
        return math.exp(lp) if lp > NEGINF else 0.0

    def mcdf(self, label: str, value: float) -> float:
        """Marginal cumulative distribution (where available)."""
        raise NotImplementedError

    def intervals(self, alpha: float) -> dict[str, tuple[float, float]]:
        """Central support interval of mass ``alpha`` per marginal."""
        raise NotImplementedError

    def draw(self, rng: np.random.Generator) -> LabeledValues:
        raise DrawUnavailable(f"draw not available for {type(self).__name__}")


class Univariate:
    """Continuous (or atomic) scalar distribution component."""

    def logpdf(self, x: float) -> float:
        raise NotImplementedError

    def pdf(self, x: float) -> float:
        lp = self.logpdf(x)
        return math.exp(lp) if lp > NEGINF else 0.0

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def ppf(self, q: float) -> float:
        raise NotImplementedError

    def draw(self, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        return (NEGINF, math.inf)

    def interval(self, alpha: float) -> tuple[float, float]:
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1]: {alpha}")
        return (self.ppf((1.0 - alpha) / 2.0), self.ppf((1.0 + alpha) / 2.0))


class Uniform(Univariate):
    def __init__(self, lo: float, hi: float):
        if not lo < hi:
            raise ValueError(f"uniform needs lo < hi, got [{lo}, {hi}]")
        self.lo = float(lo)
        self.hi = float(hi)
        self._logdensity = -math.log(self.hi - self.lo)

    def logpdf(self, x: float) -> float:
        return self._logdensity if self.lo <= x <= self.hi else NEGINF

    def cdf(self, x: float) -> float:
        if x <= self.lo:
            return 0.0
        if x >= self.hi:
            return 1.0
        return (x - self.lo) / (self.hi - self.lo)

    def ppf(self, q: float) -> float:
        return self.lo + q * (self.hi - self.lo)

    def draw(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.lo, self.hi))

    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def __repr__(self) -> str:
        return f"Uniform({self.lo}, {self.hi})"


class Normal(Univariate):
    def __init__(self, mean: float, std: float):
        if std <= 0:
            raise ValueError(f"normal needs std > 0, got {std}")
        self.mean = float(mean)
        self.std = float(std)
        self._lognorm = -math.log(self.std) - _LOG_SQRT_2PI

    def logpdf(self, x: float) -> float:
        z = (x - self.mean) / self.std
        return self._lognorm - 0.5 * z * z

    def cdf(self, x: float) -> float:
        return 0.5 * math.erfc(-(x - self.mean) / (self.std * math.sqrt(2.0)))

    def ppf(self, q: float) -> float:
        return self.mean + self.std * float(ndtri(q))

    def draw(self, rng: np.random.Generator) -> float:
        return self.mean + self.std * float(rng.standard_normal())

    def __repr__(self) -> str:
        return f"Normal({self.mean}, {self.std})"


class Lognormal(Univariate):
    """exp(N(mu, sigma)): mu and sigma are the log-scale parameters."""

    def __init__(self, mu: float, sigma: float):
        if sigma <= 0:
            raise ValueError(f"lognormal needs sigma > 0, got {sigma}")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self._lognorm = -math.log(self.sigma) - _LOG_SQRT_2PI

    def logpdf(self, x: float) -> float:
        if x <= 0:
            return NEGINF
        z = (math.log(x) - self.mu) / self.sigma
        return self._lognorm - math.log(x) - 0.5 * z * z

    def cdf(self, x: float) -> float:
        if x <= 0:
            return 0.0
        return 0.5 * math.erfc(-(math.log(x) - self.mu) / (self.sigma * math.sqrt(2.0)))

    def ppf(self, q: float) -> float:
        return math.exp(self.mu + self.sigma * float(ndtri(q)))

    def draw(self, rng: np.random.Generator) -> float:
        return math.exp(self.mu + self.sigma * float(rng.standard_normal()))

    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def __repr__(self) -> str:
        return f"Lognormal({self.mu}, {self.sigma})"


class Exponential(Univariate):
    def __init__(self, scale: float):
        if scale <= 0:
            raise ValueError(f"exponential needs scale > 0, got {scale}")
        self.scale = float(scale)

    def logpdf(self, x: float) -> float:
        if x < 0:
            return NEGINF
        return -math.log(self.scale) - x / self.scale

    def cdf(self, x: float) -> float:
        return 0.0 if x <= 0 else 1.0 - math.exp(-x / self.scale)

    def ppf(self, q: float) -> float:
        return -self.scale * math.log1p(-q)

    def draw(self, rng: np.random.Generator) -> float:
        return float(rng.exponential(self.scale))

    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def __repr__(self) -> str:
        return f"Exponential({self.scale})"


class Delta(Univariate):
    """Point mass; logpdf is the log of the mass (0 at the atom)."""

    def __init__(self, value: float):
        self.value = float(value)

    def logpdf(self, x: float) -> float:
        return 0.0 if x == self.value else NEGINF

    def cdf(self, x: float) -> float:
        return 1.0 if x >= self.value else 0.0

    def ppf(self, q: float) -> float:
        return self.value

    def draw(self, rng: np.random.Generator) -> float:
        return self.value

    def support(self) -> tuple[float, float]:
        return (self.value, self.value)

    def __repr__(self) -> str:
        return f"Delta({self.value})"


class Truncate(Univariate):
    """Tails of a continuous distribution cut at lo and/or hi, renormalized."""

    def __init__(self, base: Univariate, lo: float | None = None, hi: float | None = None):
        self.base = base
        self.lo = NEGINF if lo is None else float(lo)
        self.hi = math.inf if hi is None else float(hi)
        if not self.lo < self.hi:
            raise ValueError(f"truncation window is empty: [{self.lo}, {self.hi}]")
        self._cdf_lo = base.cdf(self.lo) if self.lo > NEGINF else 0.0
        self._cdf_hi = base.cdf(self.hi) if self.hi < math.inf else 1.0
        mass = self._cdf_hi - self._cdf_lo
        if mass <= 0.0:
            raise ValueError(f"zero probability mass in window [{self.lo}, {self.hi}]")
        self._mass = mass
        self._logmass = math.log(mass)

    def logpdf(self, x: float) -> float:
        if x < self.lo or x > self.hi:
            return NEGINF
        return self.base.logpdf(x) - self._logmass

    def cdf(self, x: float) -> float:
        if x <= self.lo:
            return 0.0
        if x >= self.hi:
            return 1.0
        return (self.base.cdf(x) - self._cdf_lo) / self._mass

    def ppf(self, q: float) -> float:
        return self.base.ppf(self._cdf_lo + q * self._mass)

    def draw(self, rng: np.random.Generator) -> float:
        # inverse-CDF sampling keeps the draw inside the window
        return self.ppf(float(rng.uniform()))

    def support(self) -> tuple[float, float]:
        lo, hi = self.base.support()
        return (max(lo, self.lo), min(hi, self.hi))

    def __repr__(self) -> str:
        return f"Truncate({self.base!r}, {self.lo}, {self.hi})"


class Concentrate(Univariate):
    """Tail mass collected into point masses at the cut locations.

    The continuous density inside the window is unchanged; logpdf at a
    cut returns the log of the atom mass there.
    """

    def __init__(self, base: Univariate, lo: float | None = None, hi: float | None = None):
        self.base = base
        self.lo = None if lo is None else float(lo)
        self.hi = None if hi is None else float(hi)
        if self.lo is not None and self.hi is not None and not self.lo < self.hi:
            raise ValueError(f"concentration window is empty: [{self.lo}, {self.hi}]")
        self.mass_lo = base.cdf(self.lo) if self.lo is not None else 0.0
        self.mass_hi = 1.0 - base.cdf(self.hi) if self.hi is not None else 0.0
        if self.mass_lo + self.mass_hi >= 1.0:
            raise ValueError("no continuous mass left inside the window")

    def logpdf(self, x: float) -> float:
        if self.lo is not None:
            if x < self.lo:
                return NEGINF
            if x == self.lo:
                return math.log(self.mass_lo) if self.mass_lo > 0 else self.base.logpdf(x)
        if self.hi is not None:
            if x > self.hi:
                return NEGINF
            if x == self.hi:
                return math.log(self.mass_hi) if self.mass_hi > 0 else self.base.logpdf(x)
        return self.base.logpdf(x)

    def cdf(self, x: float) -> float:
        if self.lo is not None and x < self.lo:
            return 0.0
        if self.hi is not None and x >= self.hi:
            return 1.0
        return self.base.cdf(x)

    def ppf(self, q: float) -> float:
        x = self.base.ppf(q)
        if self.lo is not None and x < self.lo:
            return self.lo
        if self.hi is not None and x > self.hi:
            return self.hi
        return x

    def draw(self, rng: np.random.Generator) -> float:
        # clamping the base draw places exactly the tail mass on each atom
        x = self.base.draw(rng)
        if self.lo is not None and x < self.lo:
            return self.lo
        if self.hi is not None and x > self.hi:
            return self.hi
        return x

    def support(self) -> tuple[float, float]:
        lo, hi = self.base.support()
        if self.lo is not None:
            lo = max(lo, self.lo)
        if self.hi is not None:
            hi = min(hi, self.hi)
        return (lo, hi)

    def __repr__(self) -> str:
        return f"Concentrate({self.base!r}, {self.lo}, {self.hi})"


class Transform(Univariate):
    """Push-forward of a continuous distribution by an invertible map.

    ``pdf_Y(y) = pdf_X(f_inv(y)) * |dfinv_dx(y)|`` by change of variables.
    ``increasing`` states the monotonicity direction of ``f`` on the
    support of the base distribution.
    """

    def __init__(
        self,
        base: Univariate,
        f: Callable[[float], float],
        f_inv: Callable[[float], float],
        dfinv_dx: Callable[[float], float],
        increasing: bool = True,
    ):
        self.base = base
        self.f = f
        self.f_inv = f_inv
        self.dfinv_dx = dfinv_dx
        self.increasing = increasing

    def logpdf(self, y: float) -> float:
        try:
            x = self.f_inv(y)
            jac = abs(self.dfinv_dx(y))
        except (ValueError, ZeroDivisionError, OverflowError):
            return NEGINF
        if jac == 0.0 or not math.isfinite(x):
            return NEGINF
        lp = self.base.logpdf(x)
        return lp + math.log(jac) if lp > NEGINF else NEGINF

    def cdf(self, y: float) -> float:
        try:
            x = self.f_inv(y)
        except (ValueError, OverflowError):
            lo, hi = self.support()
            return 0.0 if y < lo else 1.0
        c = self.base.cdf(x)
        return c if self.increasing else 1.0 - c

    def ppf(self, q: float) -> float:
        q = q if self.increasing else 1.0 - q
        return self.f(self.base.ppf(q))

    def draw(self, rng: np.random.Generator) -> float:
        return self.f(self.base.draw(rng))

    def support(self) -> tuple[float, float]:
        lo, hi = self.base.support()
        a, b = self._edge(lo), self._edge(hi)
        return (min(a, b), max(a, b))

    def _edge(self, x: float) -> float:
        try:
            return self.f(x)
        except (ValueError, OverflowError):
            return math.inf if x > 0 else NEGINF

    def __repr__(self) -> str:
        return f"Transform({self.base!r})"


class Tensor(Distribution):
    """Joint distribution of statistically independent univariates.

    The joint log-density is the sum of the marginal log-densities;
    draws sample each component independently. Components may carry an
    explicit type ("real" or "integer"); integer draws are rounded.
    """

    def __init__(
        self,
        components: Mapping[str, Univariate],
        types: Mapping[str, str] | None = None,
    ):
        self.components = dict(components)
        self.labels = tuple(self.components.keys())
        self.types = dict(types) if types else {}
        for label, kind in self.types.items():
            if label not in self.components:
                raise KeyError(f"typed label has no component: {label!r}")
            if kind not in ("real", "integer"):
                raise ValueError(f"unsupported type for {label!r}: {kind!r}")

    def logpdf(self, values: LabeledValues) -> float:
        total = 0.0
        for label, component in self.components.items():
            if label not in values:
                raise KeyError(f"label not in values: {label!r}")
            lp = component.logpdf(float(values[label]))
            if lp == NEGINF:
                return NEGINF
            total += lp
        return total

    def logmpdf(self, label: str, value: float) -> float:
        try:
            component = self.components[label]
        except KeyError:
            raise KeyError(f"label not in values: {label!r}") from None
        return component.logpdf(float(value))

    def mcdf(self, label: str, value: float) -> float:
        try:
            component = self.components[label]
        except KeyError:
            raise KeyError(f"label not in values: {label!r}") from None
        return component.cdf(float(value))

    def intervals(self, alpha: float) -> dict[str, tuple[float, float]]:
        return {label: c.interval(alpha) for label, c in self.components.items()}

    def draw(self, rng: np.random.Generator) -> LabeledValues:
        values = []
        for label, component in self.components.items():
            x = component.draw(rng)
            if self.types.get(label) == "integer":
                x = int(round(x))
            values.append(x)
        return LabeledValues(self.labels, values)

    def __repr__(self) -> str:
        inner = ", ".join(f"{l}={c!r}" for l, c in self.components.items())
        return f"Tensor({inner})"


class Empirical(Distribution):
    """Bootstrap distribution over stored samples (draw-only).

    Used as the parameters prior when propagating a previously inferred
    posterior; density evaluation is unavailable.
    """

    def __init__(self, samples: Sequence[LabeledValues]):
        samples = list(samples)
        if not samples:
            raise ValueError("empirical distribution needs at least one sample")
        self.samples = samples
        self.labels = samples[0].labels

    def logpdf(self, values: LabeledValues) -> float:
        raise DrawUnavailable("density not available for a bootstrap distribution")

    def logmpdf(self, label: str, value: float) -> float:
        raise DrawUnavailable("density not available for a bootstrap distribution")

    def intervals(self, alpha: float) -> dict[str, tuple[float, float]]:
        lo_q, hi_q = (1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0
        out = {}
        for label in self.labels:
            column = np.array([float(s[label]) for s in self.samples])
            out[label] = (float(np.quantile(column, lo_q)), float(np.quantile(column, hi_q)))
        return out

    def draw(self, rng: np.random.Generator) -> LabeledValues:
        return self.samples[int(rng.integers(len(self.samples)))]

    def draw_index(self, rng: np.random.Generator) -> int:
        return int(rng.integers(len(self.samples)))


def univariate_from_spec(kind: str, args: Iterable[float]) -> Univariate:
    """Build a univariate from a config spec like ``uniform -1 1``."""
    args = [float(a) for a in args]
    kinds: dict[str, Callable[..., Univariate]] = {
        "uniform": Uniform,
        "normal": Normal,
        "lognormal": Lognormal,
        "exponential": Exponential,
        "delta": Delta,
    }
    try:
        factory = kinds[kind.lower()]
    except KeyError:
        raise ValueError(
            f"unknown distribution {kind!r}; expected one of {sorted(kinds)}"
        ) from None
    return factory(*args)
