"""Declarative configuration parsing and validation.

Line-oriented ``key = value`` grammar with dotted component prefixes::

    sampler.method = EMCEE
    sampler.chains = 32
    sampler.samples = 10000
    likelihood.method = PF
    likelihood.particles = 256
    likelihood.lock = 75
    model.method = Randomwalk
    prior.mu = uniform -1 1
    prior.sigma = uniform 5 15
    prior.epsilon = lognormal 1 1
    initial.position = normal 10 2
    initial.time = delta 0
    error.method = normal
    error.scale = epsilon
    dataset.file = datasets/dataset.dat

Unknown keys are rejected with a suggestion; component invariants
(exactly one sampler, likelihood xor distance per sampler family) are
validated up front.
"""

from __future__ import annotations

import difflib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["Config", "ConfigError", "config_parse", "config_parse_text"]

SAMPLER_METHODS = ("EMCEE", "MCMC", "SABC", "MC")
LIKELIHOOD_METHODS = ("PF", "Direct")
DISTANCE_METHODS = ("Norm",)
MODEL_METHODS = ("Randomwalk", "Straightwalk", "External")

_FIXED_KEYS = {
    "seed": int,
    "verbosity": int,
    "informative": "list",
    "sandboxdir": str,
    "trace": ("none", "best", "posterior", "all"),
    "outputdir": str,
    "history": ("none", "best", "posterior", "all"),
    "states": bool,
    "checkpoint": float,
    "sampler.method": SAMPLER_METHODS,
    "sampler.chains": int,
    "sampler.samples": int,
    "sampler.batches": int,
    "sampler.batchsize": int,
    "sampler.stretch": float,
    "sampler.kappa": float,
    "sampler.redraw": float,
    "sampler.reset": int,
    "sampler.workers": int,
    "likelihood.method": LIKELIHOOD_METHODS,
    "likelihood.particles": int,
    "likelihood.min_particles": int,
    "likelihood.adaptive": bool,
    "likelihood.accuracy": float,
    "likelihood.margin": float,
    "likelihood.threshold": float,
    "likelihood.lock": int,
    "likelihood.smoothing": bool,
    "likelihood.workers": int,
    "distance.method": DISTANCE_METHODS,
    "distance.order": str,
    "model.method": MODEL_METHODS,
    "model.dt": float,
    "model.command": str,
    "model.direct": bool,
    "model.statefiles": "list",
    "model.templatedir": str,
    "model.workers": int,
    "dataset.file": str,
    "error.method": ("normal",),
    "error.scale": str,
    "forecast.pastdir": str,
    "forecast.timeset": "floats",
    "forecast.draws": int,
    "synthesize.snapshots": "floats",
    "test.times": "floats",
}

# key families with a free middle segment (replicate name or label)
_PATTERN_KEYS = (
    re.compile(r"^prior\.[A-Za-z_][\w]*$"),
    re.compile(r"^initial\.[A-Za-z_][\w]*$"),
    re.compile(r"^exact\.[A-Za-z_][\w]*$"),
    re.compile(r"^units\.[A-Za-z_][\w]*$"),
    re.compile(r"^dataset\.[A-Za-z_][\w]*\.file$"),
)


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class Config:
    seed: int = 0
    verbosity: int = 1
    informative: tuple[str, ...] = ("performance",)
    sandboxdir: str = "sandbox"
    trace: str = "none"
    outputdir: str = "output"
    history: str = "none"
    states: bool = False
    checkpoint: float = 600.0

    sampler: dict = field(default_factory=dict)
    likelihood: dict = field(default_factory=dict)
    distance: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    error: dict = field(default_factory=dict)
    prior: dict = field(default_factory=dict)  # label -> (kind, args)
    initial: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)  # label -> float
    units: dict = field(default_factory=dict)
    datasets: dict = field(default_factory=dict)  # name -> file path
    forecast: dict = field(default_factory=dict)
    synthesize: dict = field(default_factory=dict)
    test: dict = field(default_factory=dict)
    basedir: Path = field(default_factory=Path)

    @property
    def sampler_method(self) -> str:
        return self.sampler["method"]

    def resolve_path(self, value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else self.basedir / path

    def worker_counts(self) -> dict[str, int]:
        return {
            "sampler": int(self.sampler.get("workers", 0) or 0),
            "likelihood": int(
                (self.likelihood or self.distance).get("workers", 0) or 0
            ),
            "model": int(self.model.get("workers", 0) or 0),
        }


def _parse_bool(value: str, key: str) -> bool:
    low = value.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_value(key: str, raw: str):
    kind = _FIXED_KEYS[key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            return _parse_bool(raw, key)
        if kind is str:
            return raw
        if kind == "list":
            return tuple(raw.replace(",", " ").split())
        if kind == "floats":
            return tuple(float(v) for v in raw.replace(",", " ").split())
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    # enumerated literals
    if raw not in kind:
        raise ConfigError(f"{key}: expected one of {list(kind)}, got {raw!r}")
    return raw


def _suggest(key: str) -> str:
    candidates = list(_FIXED_KEYS) + [
        "prior.<label>",
        "initial.<label>",
        "exact.<label>",
        "units.<label>",
        "dataset.<name>.file",
    ]
    close = difflib.get_close_matches(key, candidates, n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


def _parse_distribution_spec(key: str, raw: str) -> tuple[str, tuple[float, ...]]:
    parts = raw.split()
    if not parts:
        raise ConfigError(f"{key}: empty distribution spec")
    if len(parts) == 1:
        # a bare number is a point value
        try:
            return ("delta", (float(parts[0]),))
        except ValueError:
            raise ConfigError(f"{key}: expected a distribution spec, got {raw!r}") from None
    kind = parts[0].lower()
    try:
        args = tuple(float(v) for v in parts[1:])
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    return (kind, args)


def config_parse_text(text: str, basedir: str | Path = ".") -> Config:
    config = Config(basedir=Path(basedir))
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        _apply(config, key, raw, lineno)
    _validate(config)
    return config


def config_parse(path: str | Path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from exc
    return config_parse_text(text, basedir=path.parent)


def _apply(config: Config, key: str, raw: str, lineno: int) -> None:
    if key in _FIXED_KEYS:
        value = _parse_value(key, raw)
        section, _, option = key.partition(".")
        if not option:
            setattr(config, section, value)
        elif section == "dataset":
            config.datasets["dataset"] = value
        else:
            getattr(config, section)[option] = value
        return
    for pattern in _PATTERN_KEYS:
        if pattern.match(key):
            section, middle = key.split(".", 1)
            if section == "prior":
                config.prior[middle] = _parse_distribution_spec(key, raw)
            elif section == "initial":
                config.initial[middle] = _parse_distribution_spec(key, raw)
            elif section == "exact":
                try:
                    config.exact[middle] = float(raw)
                except ValueError:
                    raise ConfigError(f"line {lineno}: {key}: expected a number") from None
            elif section == "units":
                config.units[middle] = raw
            elif section == "dataset":
                name = middle.rsplit(".", 1)[0]
                config.datasets[name] = raw
            return
    raise ConfigError(f"line {lineno}: unknown key {key!r}{_suggest(key)}")


def _validate(config: Config) -> None:
    if "method" not in config.sampler:
        raise ConfigError("no sampler: set sampler.method")
    method = config.sampler["method"]

    has_likelihood = bool(config.likelihood)
    has_distance = bool(config.distance)
    if has_likelihood and has_distance:
        raise ConfigError("configure either a likelihood or a distance, not both")
    if method in ("EMCEE", "MCMC"):
        if not has_likelihood:
            raise ConfigError(f"sampler {method} requires a likelihood (likelihood.method)")
    elif method == "SABC":
        if not has_distance:
            raise ConfigError("sampler SABC requires a distance (distance.method)")
    elif method == "MC" and has_distance:
        raise ConfigError("sampler MC does not take a distance")
    if has_likelihood and "method" not in config.likelihood:
        raise ConfigError("likelihood options given without likelihood.method")
    if has_distance and "method" not in config.distance:
        raise ConfigError("distance options given without distance.method")

    if config.model and "method" not in config.model:
        raise ConfigError("model options given without model.method")
    if config.model.get("method") == "External" and "command" not in config.model:
        raise ConfigError("External model requires model.command")

    for component, options in (("sampler", config.sampler),
                               ("likelihood", config.likelihood),
                               ("distance", config.distance),
                               ("model", config.model)):
        workers = options.get("workers")
        if workers is not None and workers < 0:
            raise ConfigError(f"{component}.workers must be >= 0, got {workers}")

    order = config.distance.get("order")
    if order is not None and order not in ("1", "2", "inf"):
        raise ConfigError(f"distance.order must be 1, 2 or inf, got {order!r}")

    if method == "SABC":
        if "batchsize" not in config.sampler:
            raise ConfigError("sampler SABC requires sampler.batchsize")
    elif "chains" not in config.sampler:
        raise ConfigError(f"sampler {method} requires sampler.chains")

    kappa = config.sampler.get("kappa")
    if kappa is not None and not 0.0 < kappa <= 1.0:
        raise ConfigError(f"sampler.kappa must be in (0, 1], got {kappa}")


def distance_order(config: Config) -> float:
    raw = config.distance.get("order", "2")
    return math.inf if raw == "inf" else float(raw)
