"""Synthetic cities with a known ground-truth target.

Every city gets a latent log-normal size. Each indicator is a power of that
size times a per-indicator scale, with independent multiplicative noise:

    x_ij = scale_j * size_i ** exponent_j * exp(spread_j * z_ij)

Core indicators track size closely (exponent 1, small spread); common ones
are looser. The target sums ``coefficient * transform(x)`` over the signal
indicators, plus Gaussian noise whose standard deviation is ``noise_sigma``
times the noiseless target's standard deviation.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .exceptions import ConfigError, UnknownFeature
from .schema import Category, FeatureSchema, default_schema

TARGET_SCALE = 1.0e5


class Transform(str, enum.Enum):
    LINEAR = "Linear"
    SQUARE = "Square"
    LOG1P = "Log1p"

    def __call__(self, x):
        if self is Transform.LINEAR:
            return x
        if self is Transform.SQUARE:
            return x * x
        return np.log1p(x)


@dataclass(frozen=True)
class SignalFeature:
    name: str
    coefficient: float
    transform: Transform = Transform.LINEAR

    def __post_init__(self):
        object.__setattr__(self, "transform", Transform(self.transform))
        if not math.isfinite(self.coefficient):
            raise ConfigError(f"coefficient for {self.name!r} must be finite")


@dataclass(frozen=True)
class SynthConfig:
    n_cities: int = 300
    schema: FeatureSchema = field(default_factory=default_schema)
    signal_features: tuple = ()
    noise_sigma: float = 0.05
    seed: int = 0
    size_sigma: float = 1.0
    core_exponent: tuple = (0.9, 1.1)
    core_spread: float = 0.05
    common_exponent: tuple = (0.8, 1.0)
    common_spread: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "signal_features", tuple(
            s if isinstance(s, SignalFeature) else SignalFeature(*s) for s in self.signal_features
        ))
        if self.n_cities < 4:
            raise ConfigError("n_cities must be at least 4")
        if min(self.noise_sigma, self.size_sigma, self.core_spread, self.common_spread) < 0:
            raise ConfigError("noise_sigma, size_sigma and spreads must be non-negative")
        for s in self.signal_features:
            self.schema.index(s.name)


@dataclass(frozen=True)
class GroundTruth:
    signal_features: tuple
    noise_features: tuple
    noise_std: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "noise_std": self.noise_std,
            "signal_features": [
                {"name": s.name, "coefficient": s.coefficient, "transform": s.transform.value}
                for s in self.signal_features
            ],
            "noise_features": list(self.noise_features),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @property
    def signal_names(self) -> list[str]:
        return [s.name for s in self.signal_features]


def _unit_hash(*parts) -> float:
    digest = hashlib.sha256("\x1f".join(map(str, parts)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def feature_scale(name: str) -> float:
    """Typical magnitude of an indicator, between 10 and 1e5; fixed by its name."""
    return 10.0 ** (1.0 + 4.0 * _unit_hash(name, "scale"))


def feature_profile(name: str, category, config: SynthConfig) -> tuple[float, float, float]:
    """``(scale, exponent, spread)`` for one indicator under ``config``."""
    scale = feature_scale(name)
    if Category(category) is Category.CORE:
        (lo, hi), spread = config.core_exponent, config.core_spread
    else:
        (lo, hi), spread = config.common_exponent, config.common_spread
    exponent = lo + (hi - lo) * _unit_hash(name, "exponent")
    return scale, exponent, spread


DEFAULT_SIGNALS = (
    ("Total telecom business", Transform.LINEAR, 1.0),
    ("Number of employees on the job", Transform.LINEAR, 1.0),
    ("Highway passenger volume", Transform.LINEAR, 1.0),
)


def default_config(seed: int = 0, schema: FeatureSchema | None = None, **overrides) -> SynthConfig:
    """300 cities, three core signal indicators, the rest noise, noise_sigma 0.05.

    Coefficients are chosen per indicator scale so each signal term moves
    the target by a comparable amount.
    """
    schema = schema or default_schema()
    signals = []
    for name, transform, weight in DEFAULT_SIGNALS:
        scale = feature_scale(name)
        if transform is Transform.LINEAR:
            c = weight / scale
        elif transform is Transform.SQUARE:
            c = weight / scale**2
        else:
            c = weight
        signals.append(SignalFeature(name, TARGET_SCALE * c, transform))
    kwargs = dict(n_cities=300, schema=schema, signal_features=tuple(signals),
                  noise_sigma=0.05, seed=seed)
    kwargs.update(overrides)
    return SynthConfig(**kwargs)


# Indicators that barely share the size factor. Signals are then separable
# from the rest, at the cost of a harder regression problem.
INDEPENDENT = dict(size_sigma=0.2, core_spread=0.5, common_exponent=(0.0, 0.0), common_spread=0.5)


def _row_stream(seed: int, row: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(row)]))


def generate(config: SynthConfig):
    """Return ``(dataset, ground_truth)``; deterministic in ``config.seed``."""
    schema = config.schema
    for s in config.signal_features:
        if s.name not in schema.names:
            raise UnknownFeature(s.name)
    profiles = np.array([feature_profile(f.name, f.category, config) for f in schema.features])
    scale, exponent, spread = profiles.T

    n, p = config.n_cities, len(schema)
    X = np.empty((n, p))
    eps = np.empty(n)
    for i in range(n):
        rng = _row_stream(config.seed, i)
        size = math.exp(config.size_sigma * rng.standard_normal())
        X[i] = scale * size**exponent * np.exp(spread * rng.standard_normal(p))
        eps[i] = rng.standard_normal()

    clean = np.zeros(n)
    for s in config.signal_features:
        clean = clean + s.coefficient * s.transform(X[:, schema.index(s.name)])
    noise_std = config.noise_sigma * float(np.std(clean)) if config.noise_sigma else 0.0
    y = clean + noise_std * eps if noise_std else clean

    width = len(str(n - 1))
    ids = tuple(f"city{i:0{width}d}" for i in range(n))
    signal = {s.name for s in config.signal_features}
    truth = GroundTruth(
        signal_features=config.signal_features,
        noise_features=tuple(nm for nm in schema.names if nm not in signal),
        noise_std=noise_std,
        seed=config.seed,
    )
    return Dataset(schema, ids, X, y), truth


def stratified_holdout(data: Dataset, n: int) -> list[str]:
    """Pick ``n`` cities spread evenly across the target's quantiles.

    Stands in for a hand-picked hold-out of cities of different sizes. The
    extreme quantiles are skipped so the hold-out stays inside the range
    the remaining cities cover.
    """
    if not 0 < n <= len(data):
        raise ConfigError(f"cannot hold out {n} of {len(data)} cities")
    order = np.argsort(data.y, kind="stable")
    picks = [order[int((k + 0.5) * len(data) / n)] for k in range(n)]
    return [data.city_ids[i] for i in sorted(picks)]
