"""Static SVG figures: predicted against actual values, and the training curve.

Documents are built with :mod:`xml.etree.ElementTree`, so escaping and
well-formedness come for free. Coordinates are printed with fixed precision
and the only run-dependent content is an optional timestamp in ``<metadata>``.
"""

from __future__ import annotations

import datetime as _dt
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from .exceptions import DataError, IoError

SVG_NS = "http://www.w3.org/2000/svg"
ET.register_namespace("", SVG_NS)

WIDTH, HEIGHT = 640, 480
MARGIN = dict(left=95, right=150, top=50, bottom=60)
COLORS = {"actual": "#1f77b4", "predicted": "#d62728", "train": "#1f77b4", "val": "#2ca02c",
          "best": "#7f7f7f"}


def _el(parent, tag, text=None, **attrs):
    node = ET.SubElement(parent, f"{{{SVG_NS}}}{tag}",
                         {k.rstrip("_").replace("_", "-"): str(v) for k, v in attrs.items()})
    if text is not None:
        node.text = text
    return node


def _num(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.6g}"


class _Frame:
    """Maps data coordinates onto the plot area."""

    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.left, self.top = MARGIN["left"], MARGIN["top"]
        self.w = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return self.left + (x - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        return self.top + self.h - (y - self.y0) / (self.y1 - self.y0) * self.h


def _limits(values, pad=0.05):
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo
    return lo - pad * span, hi + pad * span


def _document(title: str, timestamp):
    root = ET.Element(f"{{{SVG_NS}}}svg", {
        "width": str(WIDTH), "height": str(HEIGHT), "viewBox": f"0 0 {WIDTH} {HEIGHT}",
        "version": "1.1",
    })
    _el(root, "title", title)
    if timestamp is not None:
        _el(root, "metadata", f"generated {timestamp}")
    _el(root, "rect", x=0, y=0, width=WIDTH, height=HEIGHT, fill="white")
    _el(root, "text", title, x=WIDTH / 2, y=28, text_anchor="middle", font_size=16,
        font_family="sans-serif")
    return root


def _axes(root, frame, xticks, yticks, xlabel, ylabel, xfmt=_label, yfmt=_label):
    g = _el(root, "g", id="axes", stroke="black", font_family="sans-serif", font_size=11)
    bottom = frame.top + frame.h
    _el(g, "rect", x=frame.left, y=frame.top, width=frame.w, height=frame.h, fill="none")
    for t in xticks:
        x = _num(frame.px(t))
        _el(g, "line", x1=x, y1=_num(bottom), x2=x, y2=_num(bottom + 5))
        _el(g, "text", xfmt(t), x=x, y=_num(bottom + 18), text_anchor="middle", stroke="none")
    for t in yticks:
        y = _num(frame.py(t))
        _el(g, "line", x1=_num(frame.left - 5), y1=y, x2=_num(frame.left), y2=y)
        _el(g, "text", yfmt(t), x=_num(frame.left - 8), y=y, text_anchor="end",
            dominant_baseline="middle", stroke="none")
    _el(g, "text", xlabel, x=_num(frame.left + frame.w / 2), y=HEIGHT - 15, text_anchor="middle",
        stroke="none", font_size=13)
    cy = _num(frame.top + frame.h / 2)
    _el(g, "text", ylabel, x=16, y=cy, text_anchor="middle", stroke="none", font_size=13,
        transform=f"rotate(-90 16 {cy})")


def _legend(root, entries):
    g = _el(root, "g", id="legend", font_family="sans-serif", font_size=12)
    x = WIDTH - MARGIN["right"] + 15
    for k, (label, color, marker) in enumerate(entries):
        y = MARGIN["top"] + 10 + 20 * k
        if marker == "line":
            _el(g, "line", x1=x, y1=y, x2=x + 20, y2=y, stroke=color, stroke_width=2)
        else:
            _el(g, "circle", cx=x + 10, cy=y, r=4, fill=color)
        _el(g, "text", label, x=x + 26, y=y, dominant_baseline="middle")


def _serialize(root) -> str:
    ET.indent(root)
    return ET.tostring(root, encoding="unicode", xml_declaration=True) + "\n"


def _ticks(lo, hi, n=5):
    """Round-number ticks (1, 2 or 5 times a power of ten) inside [lo, hi]."""
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step)
    return [k * step for k in range(first, math.floor(hi / step) + 1)]


def _now():
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def prediction_svg(city_ids, actual, predicted, unit: str = "", title: str = "Predicted and actual values, test set B",
                   timestamp: bool = True) -> str:
    """Per-city comparison: actual and predicted values against city index.

    A dashed guide joins each pair so the per-city error is visible.
    """
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    city_ids = list(city_ids)
    n = len(city_ids)
    if n == 0 or actual.shape != (n,) or predicted.shape != (n,):
        raise DataError("prediction plot needs matching, non-empty id/actual/predicted lists")
    root = _document(title, _now() if timestamp else None)
    frame = _Frame((0.5, n + 0.5), _limits(np.concatenate([actual, predicted])))
    step = max(1, math.ceil(n / 10))
    _axes(root, frame, list(range(1, n + 1, step)), _ticks(frame.y0, frame.y1), "city index",
          f"value ({unit})" if unit else "value", xfmt=lambda t: str(int(t)))

    guides = _el(root, "g", id="errors", stroke=COLORS["best"], stroke_dasharray="2,2")
    for k in range(n):
        x = _num(frame.px(k + 1))
        _el(guides, "line", x1=x, y1=_num(frame.py(actual[k])), x2=x, y2=_num(frame.py(predicted[k])))
    for name, values in (("actual", actual), ("predicted", predicted)):
        g = _el(root, "g", id=name, fill=COLORS[name])
        for k, (cid, v) in enumerate(zip(city_ids, values)):
            dot = _el(g, "circle", cx=_num(frame.px(k + 1)), cy=_num(frame.py(v)), r=3.5)
            _el(dot, "title", f"{cid}: {name} {v!r}")
    _legend(root, [("actual", COLORS["actual"], "dot"), ("predicted", COLORS["predicted"], "dot")])
    return _serialize(root)


def scatter_svg(city_ids, actual, predicted, unit: str = "", title: str = "Predicted against actual, test set B",
                timestamp: bool = True) -> str:
    """Predicted (y) against actual (x) with the identity line."""
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    city_ids = list(city_ids)
    n = len(city_ids)
    if n == 0 or actual.shape != (n,) or predicted.shape != (n,):
        raise DataError("scatter plot needs matching, non-empty id/actual/predicted lists")
    root = _document(title, _now() if timestamp else None)
    lim = _limits(np.concatenate([actual, predicted]))
    frame = _Frame(lim, lim)
    suffix = f" ({unit})" if unit else ""
    _axes(root, frame, _ticks(*lim), _ticks(*lim), f"actual{suffix}", f"predicted{suffix}")
    _el(root, "line", id="identity", x1=_num(frame.px(lim[0])), y1=_num(frame.py(lim[0])),
        x2=_num(frame.px(lim[1])), y2=_num(frame.py(lim[1])), stroke=COLORS["best"],
        stroke_dasharray="4,3")
    g = _el(root, "g", id="points", fill=COLORS["predicted"])
    for cid, a, p in zip(city_ids, actual, predicted):
        dot = _el(g, "circle", cx=_num(frame.px(a)), cy=_num(frame.py(p)), r=3.5)
        _el(dot, "title", f"{cid}: actual {a!r}, predicted {p!r}")
    _legend(root, [("city", COLORS["predicted"], "dot"), ("y = x", COLORS["best"], "line")])
    return _serialize(root)


def training_curve_svg(trace, title: str = "Best validation performance", timestamp: bool = True) -> str:
    """Training and validation MSE per epoch on a log axis, best epoch marked."""
    train = np.asarray(trace.train_mse, dtype=np.float64)
    val = np.asarray(trace.val_mse, dtype=np.float64)
    if train.size == 0 or train.shape != val.shape:
        raise DataError("training curve needs equal-length, non-empty loss series")
    floor = np.finfo(np.float64).tiny
    logs = np.log10(np.maximum(np.concatenate([train, val]), floor))
    lo, hi = math.floor(logs.min()), math.ceil(logs.max())
    if lo == hi:
        hi += 1
    epochs = train.size - 1
    root = _document(f"{title}: {trace.best_val_mse:.4g} at epoch {trace.best_epoch}",
                     _now() if timestamp else None)
    frame = _Frame((0, max(epochs, 1)), (lo, hi))
    yticks = list(range(lo, hi + 1, max(1, math.ceil((hi - lo) / 8))))
    _axes(root, frame, _ticks(0, max(epochs, 1)) if epochs >= 5 else list(range(epochs + 1)), yticks, f"epoch ({epochs} epochs)",
          "mean squared error", xfmt=lambda t: str(int(round(t))), yfmt=lambda t: f"1e{int(t)}")
    for name, series in (("train", train), ("val", val)):
        pts = " ".join(f"{_num(frame.px(e))},{_num(frame.py(math.log10(max(v, floor))))}"
                       for e, v in enumerate(series))
        _el(root, "polyline", id=name, points=pts, fill="none", stroke=COLORS[name], stroke_width=1.5)
    bx = _num(frame.px(trace.best_epoch))
    _el(root, "line", id="best", x1=bx, y1=_num(frame.top), x2=bx, y2=_num(frame.top + frame.h),
        stroke=COLORS["best"], stroke_dasharray="4,3")
    _el(root, "circle", cx=bx, cy=_num(frame.py(math.log10(max(trace.best_val_mse, floor)))), r=5,
        fill="none", stroke=COLORS["val"], stroke_width=2)
    _legend(root, [("train", COLORS["train"], "line"), ("validation", COLORS["val"], "line"),
                   ("best", COLORS["best"], "line")])
    return _serialize(root)


def write_svg(text: str, path) -> Path:
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
    return path
