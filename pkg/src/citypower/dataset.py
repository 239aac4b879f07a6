"""City records, CSV ingestion and the train/validation/testA/testB split."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .exceptions import (
    DimensionMismatch,
    DuplicateCityId,
    EmptyDataset,
    FractionOutOfRange,
    IoError,
    MissingColumn,
    UnknownId,
    UnparseableCell,
    DataError,
)
from .schema import FeatureSchema

ID_COLUMN = "city_id"


def _frozen(a, ndim):
    a = np.array(a, dtype=np.float64)
    if a.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable table of cities: one feature row and one target value each.

    ``X`` and ``y`` are read-only float64 arrays whose row order matches
    ``city_ids``.
    """

    schema: FeatureSchema
    city_ids: tuple
    X: np.ndarray
    y: np.ndarray
    _row: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = tuple(str(c) for c in self.city_ids)
        X = _frozen(self.X, 2) if len(ids) else np.zeros((0, len(self.schema)))
        y = _frozen(self.y, 1) if len(ids) else np.zeros(0)
        if X.shape != (len(ids), len(self.schema)):
            raise DimensionMismatch(
                f"X has shape {X.shape}, expected ({len(ids)}, {len(self.schema)})"
            )
        if y.shape != (len(ids),):
            raise DimensionMismatch(f"y has shape {y.shape}, expected ({len(ids)},)")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataError("dataset contains non-finite values")
        row = {}
        for i, c in enumerate(ids):
            if c in row:
                raise DuplicateCityId(c)
            row[c] = i
        object.__setattr__(self, "city_ids", ids)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "_row", row)

    def __len__(self):
        return len(self.city_ids)

    def __contains__(self, city_id):
        return city_id in self._row

    def rows(self, ids: Iterable[str]) -> np.ndarray:
        """Row indices for ``ids``, in dataset order."""
        out = []
        for c in ids:
            try:
                out.append(self._row[c])
            except KeyError:
                raise UnknownId(c) from None
        return np.array(sorted(set(out)), dtype=np.intp)

    def subset(self, ids: Iterable[str]) -> Dataset:
        idx = self.rows(ids)
        return Dataset(self.schema, tuple(self.city_ids[i] for i in idx), self.X[idx], self.y[idx])

    def with_column(self, feature: str, values) -> Dataset:
        j = self.schema.index(feature)
        X = self.X.copy()
        X[:, j] = values
        return Dataset(self.schema, self.city_ids, X, self.y)

    def column(self, feature: str) -> np.ndarray:
        return self.X[:, self.schema.index(feature)]


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read a city CSV and reorder its columns to match ``schema``.

    Incomplete rows are rejected, never filled in: an empty or non-numeric
    cell raises :class:`UnparseableCell` (rows are 1-based, header excluded).
    Columns not named in the schema are ignored.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataset(f"{path}: no header row")
        header = [h.strip() for h in header]
        if header and header[0].startswith("﻿"):
            header[0] = header[0][1:]
        position = {h: i for i, h in enumerate(header)}
        wanted = [ID_COLUMN, *schema.names, schema.target_name]
        for name in wanted:
            if name not in position:
                raise MissingColumn(name)
        cols = [position[n] for n in wanted]

        ids, X, y = [], [], []
        for lineno, record in enumerate(reader, start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            values = []
            for name, c in zip(wanted, cols):
                cell = record[c].strip() if c < len(record) else ""
                if name == ID_COLUMN:
                    if not cell:
                        raise UnparseableCell(lineno, name, cell)
                    city = cell
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise UnparseableCell(lineno, name, cell) from None
                if not math.isfinite(v):
                    raise UnparseableCell(lineno, name, cell)
                values.append(v)
            ids.append(city)
            X.append(values[:-1])
            y.append(values[-1])

    if not ids:
        raise EmptyDataset(f"{path}: no data rows")
    return Dataset(schema, tuple(ids), np.array(X), np.array(y))


def write_csv(data: Dataset, path) -> None:
    """Write ``data`` in the ingestion format; floats use shortest round-trip repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ID_COLUMN, *data.schema.names, data.schema.target_name])
        for c, xs, t in zip(data.city_ids, data.X, data.y):
            w.writerow([c, *(repr(float(v)) for v in xs), repr(float(t))])


@dataclass(frozen=True)
class SplitPlan:
    train_ids: tuple
    val_ids: tuple
    testA_ids: tuple
    testB_ids: tuple
    seed: int

    GROUPS = ("train", "val", "testA", "testB")

    def ids(self, group: str) -> tuple:
        if group not in self.GROUPS:
            raise KeyError(group)
        return getattr(self, f"{group}_ids")

    def counts(self) -> dict:
        return {g: len(self.ids(g)) for g in self.GROUPS}

    def to_dict(self) -> dict:
        return {"seed": self.seed, "counts": self.counts(), **{g: list(self.ids(g)) for g in self.GROUPS}}

    @classmethod
    def from_dict(cls, doc: dict) -> SplitPlan:
        return cls(*(tuple(doc[g]) for g in cls.GROUPS), seed=int(doc["seed"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> SplitPlan:
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise IoError(f"cannot read split {path}: {exc}") from None
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: malformed split file: {exc}") from None


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(
    data: Dataset,
    testB_ids: Iterable[str],
    val_fraction: float = 0.04,
    testA_fraction: float = 0.04,
    seed: int = 0,
) -> SplitPlan:
    """Hold out ``testB_ids`` and shuffle the rest into train/val/testA.

    With ``n`` remaining rows, validation gets ``round(n * val_fraction)``
    rows and testA ``round(n * testA_fraction)`` (halves round up); training
    takes the remainder. 220 rows at 0.04/0.04 therefore gives 202/9/9.
    """
    if not (0 <= val_fraction < 1 and 0 <= testA_fraction < 1):
        raise FractionOutOfRange(f"fractions must lie in [0, 1): {val_fraction}, {testA_fraction}")
    if val_fraction + testA_fraction >= 1:
        raise FractionOutOfRange(
            f"val_fraction + testA_fraction must be < 1, got {val_fraction + testA_fraction}"
        )
    held = set(testB_ids)
    for c in held:
        if c not in data:
            raise UnknownId(c)
    testB = tuple(c for c in data.city_ids if c in held)
    rest = [c for c in data.city_ids if c not in held]

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(rest))
    shuffled = [rest[i] for i in order]
    n = len(rest)
    n_val = _round_half_up(n * val_fraction)
    n_testA = _round_half_up(n * testA_fraction)
    return SplitPlan(
        train_ids=tuple(shuffled[n_val + n_testA:]),
        val_ids=tuple(shuffled[:n_val]),
        testA_ids=tuple(shuffled[n_val:n_val + n_testA]),
        testB_ids=testB,
        seed=int(seed),
    )


def read_id_file(path) -> list[str]:
    """One city_id per line; blank lines and ``#`` comments skipped."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(f"cannot read id file {path}: {exc}") from None
    return [s for s in (line.strip() for line in lines) if s and not s.startswith("#")]
