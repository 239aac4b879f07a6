"""Permutation importance scored by the change in R^2.

A feature's importance is how far R^2 moves when that single column is
shuffled. By default the score is the mean absolute difference over ``L``
shuffles, ``S = mean_l |R0^2 - R_l^2|``; ``mode="drop"`` gives the signed
mean decrease ``R0^2 - mean_l R_l^2`` instead.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .exceptions import ConfigError, EmptySet
from .metrics import r_squared
from .mlp import predict_array

MODES = ("abs", "drop")


def derive_seed(base_seed: int, feature: str, repetition: int) -> int:
    """Seed for one shuffle, independent of feature order and evaluation order."""
    key = f"{int(base_seed)}\x1f{feature}\x1f{int(repetition)}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def permute_column(data: Dataset, feature: str, seed: int) -> Dataset:
    """Copy of ``data`` with one column shuffled; everything else untouched."""
    col = data.column(feature)
    rng = np.random.default_rng(seed)
    return data.with_column(feature, col[rng.permutation(len(col))])


@dataclass(frozen=True)
class PiScore:
    feature: str
    score: float
    repetitions: int
    baseline_r2: float
    permuted_r2s: tuple = field(default=())
    mode: str = "abs"

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "score": self.score,
            "repetitions": self.repetitions,
            "baseline_r2": self.baseline_r2,
            "permuted_r2s": list(self.permuted_r2s),
            "mode": self.mode,
        }


def _score(baseline, permuted, mode):
    permuted = np.asarray(permuted)
    if mode == "abs":
        return float(np.mean(np.abs(baseline - permuted)))
    return float(baseline - np.mean(permuted))


def pi_score(model, data: Dataset, ids, feature: str, L: int = 10, seed: int = 0,
             mode: str = "abs", _baseline=None) -> PiScore:
    """Importance of ``feature`` for ``model`` over the rows in ``ids``.

    Repetition ``l`` (1-based) shuffles the column among those rows using
    ``derive_seed(seed, feature, l)``.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if L < 1:
        raise ConfigError("L must be a positive integer")
    data.schema.index(feature)
    ids = list(ids)
    if not ids:
        raise EmptySet("pi_score needs at least one id")
    sub = data.subset(ids)
    if _baseline is None:
        _baseline = r_squared(sub.y, predict_array(model, sub.X))
    permuted = []
    for rep in range(1, L + 1):
        tainted = permute_column(sub, feature, derive_seed(seed, feature, rep))
        # shuffling keeps each column's range, so the baseline already warned
        permuted.append(r_squared(tainted.y, predict_array(model, tainted.X, warn=False)))
    return PiScore(feature, _score(_baseline, permuted, mode), L, _baseline,
                   tuple(permuted), mode)


@dataclass(frozen=True)
class PiReport:
    scores: tuple
    seed: int
    ids: tuple
    repetitions: int
    mode: str = "abs"

    def __len__(self):
        return len(self.scores)

    def ranking(self) -> list[str]:
        return [s.feature for s in self.scores]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "repetitions": self.repetitions,
            "mode": self.mode,
            "baseline_r2": self.scores[0].baseline_r2 if self.scores else None,
            "ids": list(self.ids),
            "scores": [s.to_dict() for s in self.scores],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def format_table(self, digits: int = 4) -> str:
        width = max([len("Data name")] + [len(s.feature) for s in self.scores])
        lines = [f"{'Data name':<{width}}  PI Score", f"{'-' * width}  --------"]
        lines += [f"{s.feature:<{width}}  {s.score:.{digits}f}" for s in self.scores]
        return "\n".join(lines)


def pi_report(model, data: Dataset, ids=None, features=None, L: int = 10, seed: int = 0,
              mode: str = "abs", n_jobs: int = 1) -> PiReport:
    """Score each feature and sort descending.

    ``ids`` defaults to every city in ``data``; ``features`` defaults to the
    schema's core indicators. Ties keep the requested feature order.
    """
    ids = list(data.city_ids) if ids is None else list(ids)
    features = data.schema.core if features is None else list(features)
    if not features:
        raise ConfigError("pi_report needs at least one feature")
    for f in features:
        data.schema.index(f)
    if not ids:
        raise EmptySet("pi_report needs at least one id")
    sub = data.subset(ids)
    baseline = r_squared(sub.y, predict_array(model, sub.X))

    def one(f):
        return pi_score(model, sub, sub.city_ids, f, L, seed, mode, _baseline=baseline)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            scores = list(pool.map(one, features))
    else:
        scores = [one(f) for f in features]
    order = sorted(range(len(scores)), key=lambda k: (-scores[k].score, k))
    return PiReport(tuple(scores[k] for k in order), int(seed), sub.city_ids, L, mode)
