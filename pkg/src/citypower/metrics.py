"""Goodness-of-fit statistics reported in physical units."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import EmptySet, LengthMismatch, ZeroVariance
from .mlp import predict


def _pair(y_true, y_pred, min_len):
    a = np.asarray(y_true, dtype=np.float64).ravel()
    b = np.asarray(y_pred, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    if a.size < min_len:
        raise LengthMismatch(f"need at least {min_len} values, got {a.size}")
    return a, b


def sum_squares(y_true, y_pred):
    """``(sse, ssr, sst)``: residual, regression and total sums of squares."""
    y, f = _pair(y_true, y_pred, 1)
    mean = y.mean()
    sse = float(np.sum((y - f) ** 2))
    ssr = float(np.sum((f - mean) ** 2))
    sst = float(np.sum((y - mean) ** 2))
    return sse, ssr, sst


def r_squared(y_true, y_pred) -> float:
    """Coefficient of determination ``1 - SSE/SST``.

    Negative when the predictions are worse than predicting the mean.
    Raises :class:`ZeroVariance` for a constant ``y_true``.
    """
    y, f = _pair(y_true, y_pred, 2)
    sse, _, sst = sum_squares(y, f)
    if sst == 0:
        raise ZeroVariance("y_true is constant; R^2 is undefined")
    return 1.0 - sse / sst


def pearson_r(a, b) -> float:
    """Correlation ``Cov(a, b) / sqrt(Var[a] Var[b])``, clipped to [-1, 1]."""
    a, b = _pair(a, b, 2)
    da = a - a.mean()
    db = b - b.mean()
    va = float(np.dot(da, da))
    vb = float(np.dot(db, db))
    if va == 0 or vb == 0:
        raise ZeroVariance("correlation of a constant vector is undefined")
    r = float(np.dot(da, db)) / math.sqrt(va * vb)
    return min(1.0, max(-1.0, r))


def mae(y_true, y_pred) -> float:
    y, f = _pair(y_true, y_pred, 1)
    return float(np.mean(np.abs(y - f)))


def rmse(y_true, y_pred) -> float:
    y, f = _pair(y_true, y_pred, 1)
    return math.sqrt(float(np.mean((y - f) ** 2)))


@dataclass(frozen=True)
class MetricsReport:
    r_squared: float
    pearson_r: float
    mae: float
    rmse: float
    sse: float
    ssr: float
    sst: float
    n: int

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> MetricsReport:
        sse, ssr, sst = sum_squares(y_true, y_pred)
        return cls(
            r_squared=r_squared(y_true, y_pred),
            pearson_r=pearson_r(y_true, y_pred),
            mae=mae(y_true, y_pred),
            rmse=rmse(y_true, y_pred),
            sse=sse,
            ssr=ssr,
            sst=sst,
            n=int(np.size(y_true)),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def format_table(reports: dict, unit: str = "") -> str:
    """Aligned text table, one column per named report."""
    names = list(reports)
    rows = [
        ("R^2", "r_squared", "{:.4f}"),
        ("R", "pearson_r", "{:.4f}"),
        (f"MAE{f' ({unit})' if unit else ''}", "mae", "{:.6g}"),
        (f"RMSE{f' ({unit})' if unit else ''}", "rmse", "{:.6g}"),
        ("n", "n", "{}"),
    ]
    cells = [["metric", *names]]
    for label, key, fmt in rows:
        cells.append([label, *(fmt.format(getattr(reports[n], key)) for n in names)])
    widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
    lines = []
    for k, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def evaluate(model, data, ids) -> MetricsReport:
    """Predict ``ids`` in physical units and score against their targets."""
    ids = list(ids)
    if not ids:
        raise EmptySet("evaluate needs at least one id")
    pairs = predict(model, data, ids)
    y_true = data.y[data.rows(ids)]
    y_pred = np.array([p for _, p in pairs])
    return MetricsReport.from_predictions(y_true, y_pred)
