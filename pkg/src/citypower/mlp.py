"""Single-hidden-layer regressor: tansig (or purelin) hidden layer, purelin output.

The low-level functions (:func:`forward`, :func:`gradient`, :func:`train`)
work on normalized arrays. :func:`fit_dataset` and :func:`predict` wrap them
with a :class:`~citypower.preprocessing.MinMaxNormalizer` so callers deal in
physical units, and :class:`ShallowMLPRegressor` exposes the same machinery
through the scikit-learn estimator API.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .exceptions import (
    ConfigError,
    DataError,
    DimensionMismatch,
    DivergenceDetected,
    EmptyBatch,
    EmptySet,
    IoError,
)
from .preprocessing import MinMaxNormalizer, fit_normalizer

MODEL_FORMAT = "citypower-mlp"
MODEL_VERSION = 1

_ONE_BELOW = np.nextafter(1.0, 0.0)


class OutOfRangeWarning(UserWarning):
    """Prediction inputs fall outside the range seen during training."""


class Activation(str, enum.Enum):
    TANSIG = "tansig"
    PURELIN = "purelin"


def tansig(x):
    """Symmetric sigmoid ``2 / (1 + exp(-2x)) - 1``.

    Evaluated as ``tanh`` (the same function, without overflow or
    cancellation) and clamped so the result stays strictly inside (-1, 1)
    even where float64 would round to +-1.
    """
    t = np.tanh(np.asarray(x, dtype=np.float64))
    t = np.clip(t, -_ONE_BELOW, _ONE_BELOW)
    return float(t) if t.ndim == 0 else t


def purelin(x):
    x = np.asarray(x, dtype=np.float64)
    return float(x) if x.ndim == 0 else x.copy()


def _activate(z, activation):
    return tansig(z) if activation is Activation.TANSIG else z


def _activation_slope(h, activation):
    # derivative expressed through the activation output
    return 1.0 - h * h if activation is Activation.TANSIG else np.ones_like(h)


@dataclass(frozen=True)
class MlpConfig:
    n_inputs: int = 85
    n_hidden: int = 10
    hidden_activation: Activation = Activation.TANSIG
    learning_rate: float = 0.01
    max_epochs: int = 1000
    patience: int = 6
    init_seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "hidden_activation", Activation(self.hidden_activation))
        except ValueError:
            raise ConfigError(f"unknown activation {self.hidden_activation!r}") from None
        for name in ("n_inputs", "n_hidden", "max_epochs", "patience"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not (isinstance(self.learning_rate, (int, float)) and self.learning_rate > 0
                and math.isfinite(self.learning_rate)):
            raise ConfigError(f"learning_rate must be a positive real, got {self.learning_rate!r}")
        if int(self.init_seed) < 0:
            raise ConfigError("init_seed must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_activation"] = self.hidden_activation.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MlpConfig:
        return cls(**d)


@dataclass(frozen=True)
class Gradient:
    """Partial derivatives of the batch MSE, shaped like the model weights."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float


@dataclass(frozen=True)
class MlpModel:
    W1: np.ndarray  # (n_hidden, n_inputs)
    b1: np.ndarray  # (n_hidden,)
    W2: np.ndarray  # (1, n_hidden)
    b2: float
    hidden_activation: Activation = Activation.TANSIG
    normalizer: MinMaxNormalizer | None = field(default=None, compare=False)
    config: MlpConfig | None = field(default=None, compare=False)
    schema_hash: str | None = None

    def __post_init__(self):
        W1 = np.array(self.W1, dtype=np.float64)
        b1 = np.array(self.b1, dtype=np.float64).reshape(-1)
        W2 = np.array(self.W2, dtype=np.float64).reshape(1, -1)
        if W1.ndim != 2 or b1.shape != (W1.shape[0],) or W2.shape != (1, W1.shape[0]):
            raise DimensionMismatch(
                f"inconsistent weight shapes W1={W1.shape} b1={b1.shape} W2={W2.shape}"
            )
        b2 = float(self.b2)
        if not all(np.isfinite(a).all() for a in (W1, b1, W2)) or not math.isfinite(b2):
            raise DataError("model weights must be finite")
        for a in (W1, b1, W2):
            a.setflags(write=False)
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "W2", W2)
        object.__setattr__(self, "b2", b2)
        object.__setattr__(self, "hidden_activation", Activation(self.hidden_activation))

    @property
    def n_inputs(self) -> int:
        return self.W1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[0]


def init_model(config: MlpConfig) -> MlpModel:
    """Uniform weights in +-1/sqrt(fan_in), drawn from ``config.init_seed``."""
    rng = np.random.default_rng(config.init_seed)
    a1 = 1.0 / math.sqrt(config.n_inputs)
    a2 = 1.0 / math.sqrt(config.n_hidden)
    W1 = rng.uniform(-a1, a1, (config.n_hidden, config.n_inputs))
    b1 = rng.uniform(-a1, a1, config.n_hidden)
    W2 = rng.uniform(-a2, a2, (1, config.n_hidden))
    b2 = rng.uniform(-a2, a2)
    return MlpModel(W1, b1, W2, b2, config.hidden_activation, config=config)


def _as_batch(model, X):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise DimensionMismatch(f"expected {model.n_inputs} inputs, got shape {X.shape}")
    return X, single


def _hidden(model, X):
    return _activate(X @ model.W1.T + model.b1, model.hidden_activation)


def forward(model: MlpModel, x):
    """Network output for one normalized input vector (or a 2-d batch)."""
    X, single = _as_batch(model, x)
    out = purelin(_hidden(model, X) @ model.W2[0] + model.b2)
    return float(out[0]) if single else out


def mse(model: MlpModel, X, y) -> float:
    X, _ = _as_batch(model, X)
    err = forward(model, X) - np.asarray(y, dtype=np.float64)
    with np.errstate(over="ignore"):
        return float(np.mean(err * err))


def gradient(model: MlpModel, X, y) -> Gradient:
    """Backpropagated gradient of ``mean((forward(X) - y)**2)``."""
    X, _ = _as_batch(model, X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = X.shape[0]
    if n == 0:
        raise EmptyBatch("gradient of an empty batch")
    if y.shape[0] != n:
        raise DimensionMismatch(f"{n} inputs but {y.shape[0]} targets")
    H = _hidden(model, X)
    out = H @ model.W2[0] + model.b2
    d_out = 2.0 * (out - y) / n
    d_z1 = np.outer(d_out, model.W2[0]) * _activation_slope(H, model.hidden_activation)
    return Gradient(
        W1=d_z1.T @ X,
        b1=d_z1.sum(axis=0),
        W2=(d_out @ H)[None, :],
        b2=float(d_out.sum()),
    )


class StopReason(str, enum.Enum):
    MAX_EPOCHS = "MaxEpochs"
    EARLY_STOP = "EarlyStop"


@dataclass
class TrainingTrace:
    """Per-epoch losses; entry 0 is the initial (untrained) network."""

    train_mse: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: StopReason = StopReason.MAX_EPOCHS
    init_seed: int | None = None

    @property
    def best_val_mse(self) -> float:
        return self.val_mse[self.best_epoch]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_mse", "val_mse", "best"])
            for i, (t, v) in enumerate(zip(self.train_mse, self.val_mse)):
                w.writerow([i, repr(t), repr(v), int(i == self.best_epoch)])

    @classmethod
    def from_csv(cls, path) -> TrainingTrace:
        trace = cls()
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    trace.train_mse.append(float(row["train_mse"]))
                    trace.val_mse.append(float(row["val_mse"]))
                    if row["best"] == "1":
                        trace.best_epoch = int(row["epoch"])
        except OSError as exc:
            raise IoError(f"cannot read trace {path}: {exc}") from None
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: malformed trace: {exc}") from None
        return trace


def _check_set(name, X, y, n_inputs):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptySet(f"{name} set is empty")
    if X.shape[1] != n_inputs:
        raise DimensionMismatch(f"{name} set has {X.shape[1]} features, config expects {n_inputs}")
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"{name} set: {X.shape[0]} rows but {y.shape[0]} targets")
    return X, y


def train(config: MlpConfig, train_set, val_set, init: MlpModel | None = None):
    """Full-batch gradient descent with validation early stopping.

    ``train_set`` and ``val_set`` are ``(X, y)`` pairs already in normalized
    space. Training stops after ``max_epochs`` updates, or once ``patience``
    consecutive epochs fail to improve on the best validation MSE. The
    returned model holds the weights of the best validation epoch.

    Returns ``(model, trace)``.
    """
    X, y = _check_set("train", *train_set, config.n_inputs)
    Xv, yv = _check_set("validation", *val_set, config.n_inputs)
    model = init if init is not None else init_model(config)
    if (model.n_inputs, model.n_hidden) != (config.n_inputs, config.n_hidden):
        raise DimensionMismatch("initial model does not match config")
    W1, b1, W2, b2 = model.W1.copy(), model.b1.copy(), model.W2.copy(), model.b2
    act = config.hidden_activation
    lr = config.learning_rate

    trace = TrainingTrace(init_seed=config.init_seed)
    best = None
    stale = 0
    for epoch in range(config.max_epochs + 1):
        current = MlpModel(W1, b1, W2, b2, act, config=config)
        t_mse = mse(current, X, y)
        v_mse = mse(current, Xv, yv)
        if not (math.isfinite(t_mse) and math.isfinite(v_mse)):
            raise DivergenceDetected(epoch, t_mse, v_mse)
        trace.train_mse.append(t_mse)
        trace.val_mse.append(v_mse)
        if best is None or v_mse < trace.val_mse[trace.best_epoch]:
            trace.best_epoch = epoch
            best = current
            stale = 0
        elif epoch:
            stale += 1
            if stale >= config.patience:
                trace.stop_reason = StopReason.EARLY_STOP
                break
        if epoch == config.max_epochs:
            break
        g = gradient(current, X, y)
        W1 = W1 - lr * g.W1
        b1 = b1 - lr * g.b1
        W2 = W2 - lr * g.W2
        b2 = b2 - lr * g.b2
        if not (np.isfinite(W1).all() and np.isfinite(W2).all() and math.isfinite(b2)):
            raise DivergenceDetected(epoch + 1, float("nan"), float("nan"))
    return best, trace


def derive_seed(base: int, *parts) -> int:
    """Independent 32-bit seed for a (base, parts...) combination."""
    key = [int(base)] + [int(p) for p in parts]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def train_restarts(config: MlpConfig, train_set, val_set, restarts: int = 1, n_jobs: int = 1):
    """Train ``restarts`` networks from derived seeds; keep the best by validation MSE.

    Returns ``(model, trace, traces)`` where ``traces`` lists every restart.
    Ties go to the earliest restart, so the outcome does not depend on
    ``n_jobs``.
    """
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    configs = [replace(config, init_seed=derive_seed(config.init_seed, k)) for k in range(restarts)]
    if n_jobs > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda c: train(c, train_set, val_set), configs))
    else:
        results = [train(c, train_set, val_set) for c in configs]
    best = min(range(restarts), key=lambda k: (results[k][1].best_val_mse, k))
    model, trace = results[best]
    return model, trace, [t for _, t in results]


def fit_dataset(data, plan, config: MlpConfig | None = None, restarts: int = 1, n_jobs: int = 1):
    """Normalize with training-row ranges, train, and attach the normalizer.

    Returns ``(model, trace)`` with the model predicting in physical units
    via :func:`predict`.
    """
    config = config or MlpConfig(n_inputs=len(data.schema))
    if config.n_inputs != len(data.schema):
        raise ConfigError(
            f"config expects {config.n_inputs} inputs but schema has {len(data.schema)} features"
        )
    if not plan.train_ids:
        raise EmptySet("training set is empty")
    if not plan.val_ids:
        raise EmptySet("validation set is empty")
    norm = fit_normalizer(data, plan.train_ids)

    def scaled(ids):
        idx = data.rows(ids)
        return norm.transform(data.X[idx]), norm.transform_target(data.y[idx])

    model, trace, _ = train_restarts(
        config, scaled(plan.train_ids), scaled(plan.val_ids), restarts, n_jobs
    )
    model = replace(model, normalizer=norm, config=replace(config, init_seed=trace.init_seed),
                    schema_hash=data.schema.fingerprint())
    return model, trace


def _require_normalizer(model):
    if model.normalizer is None or not hasattr(model.normalizer, "target_min_"):
        raise ConfigError("model has no fitted normalizer; train it with fit_dataset")
    return model.normalizer


def predict_array(model: MlpModel, X, warn: bool = True) -> np.ndarray:
    """Physical-unit predictions for a raw feature matrix.

    Emits :class:`OutOfRangeWarning` when rows fall outside the training
    range, unless ``warn`` is false.
    """
    norm = _require_normalizer(model)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise DimensionMismatch(f"expected (n, {model.n_inputs}) features, got {X.shape}")
    if X.shape[0] == 0:
        return np.zeros(0)
    outside = norm.out_of_range(X) if warn else np.zeros(0, dtype=bool)
    if outside.any():
        warnings.warn(
            f"{int(outside.sum())} row(s) lie outside the training feature range; "
            "predictions are extrapolated",
            OutOfRangeWarning,
            stacklevel=3,
        )
    z = forward(model, norm._forward(X, norm.data_min_, norm.data_max_))
    return norm.inverse_transform_target(z)


def predict(model: MlpModel, data, ids) -> list:
    """``(city_id, prediction)`` pairs in physical units, in dataset order."""
    idx = data.rows(ids)
    if len(idx) == 0:
        return []
    y_hat = predict_array(model, data.X[idx])
    return [(data.city_ids[i], float(v)) for i, v in zip(idx, y_hat)]


# ---------------------------------------------------------------- persistence

def model_to_dict(model: MlpModel) -> dict:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "schema_hash": model.schema_hash,
        "config": model.config.to_dict() if model.config else None,
        "hidden_activation": model.hidden_activation.value,
        "weights": {
            "W1": model.W1.tolist(),
            "b1": model.b1.tolist(),
            "W2": model.W2.tolist(),
            "b2": model.b2,
        },
        "normalizer": model.normalizer.to_dict() if model.normalizer is not None else None,
    }
    return doc


def model_from_dict(doc: dict) -> MlpModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError(f"not a model file (format={doc.get('format')!r})")
    if doc.get("version") != MODEL_VERSION:
        raise ConfigError(f"unsupported model version {doc.get('version')!r}")
    try:
        w = doc["weights"]
        norm = doc.get("normalizer")
        cfg = doc.get("config")
        return MlpModel(
            np.array(w["W1"], dtype=np.float64),
            np.array(w["b1"], dtype=np.float64),
            np.array(w["W2"], dtype=np.float64),
            w["b2"],
            doc["hidden_activation"],
            normalizer=MinMaxNormalizer.from_dict(norm) if norm else None,
            config=MlpConfig.from_dict(cfg) if cfg else None,
            schema_hash=doc.get("schema_hash"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed model document: {exc}") from None


def save_model(model: MlpModel, path) -> None:
    # json emits floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> MlpModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read model {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return model_from_dict(doc)


# ------------------------------------------------------------ estimator API

class ShallowMLPRegressor(RegressorMixin, BaseEstimator):
    """scikit-learn wrapper around :func:`train`.

    Features and target are min-max scaled to [-1, 1] on the training rows;
    predictions come back in the target's original units. Early stopping uses
    ``eval_set`` when given to :meth:`fit`, otherwise a seeded
    ``validation_fraction`` of the training rows.

    Parameters
    ----------
    n_hidden : int, default=10
    hidden_activation : {"tansig", "purelin"}, default="tansig"
    learning_rate : float, default=0.01
    max_epochs : int, default=1000
    patience : int, default=6
        Consecutive epochs without a new validation minimum before stopping.
    restarts : int, default=1
        Independent initializations; the best validation run is kept.
    validation_fraction : float, default=0.04
    random_state : int, default=0

    Attributes
    ----------
    model_ : MlpModel
    trace_ : TrainingTrace
    normalizer_ : MinMaxNormalizer
    """

    def __init__(self, n_hidden=10, hidden_activation="tansig", learning_rate=0.01,
                 max_epochs=1000, patience=6, restarts=1, validation_fraction=0.04,
                 random_state=0):
        self.n_hidden = n_hidden
        self.hidden_activation = hidden_activation
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.restarts = restarts
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def fit(self, X, y, eval_set=None):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        if eval_set is None:
            if not 0 < self.validation_fraction < 1:
                raise ValueError("validation_fraction must lie in (0, 1) when eval_set is None")
            rng = np.random.default_rng(self.random_state)
            order = rng.permutation(X.shape[0])
            n_val = max(1, int(math.floor(X.shape[0] * self.validation_fraction + 0.5)))
            if n_val >= X.shape[0]:
                raise ValueError(f"n_samples = {X.shape[0]} is too few to hold out a validation set")
            X_val, y_val = X[order[:n_val]], y[order[:n_val]]
            X, y = X[order[n_val:]], y[order[n_val:]]
        else:
            X_val, y_val = eval_set
            X_val = np.asarray(X_val, dtype=np.float64)
            y_val = np.asarray(y_val, dtype=np.float64).ravel()

        self.normalizer_ = MinMaxNormalizer().fit(X, y)
        config = MlpConfig(
            n_inputs=X.shape[1],
            n_hidden=self.n_hidden,
            hidden_activation=self.hidden_activation,
            learning_rate=self.learning_rate,
            max_epochs=self.max_epochs,
            patience=self.patience,
            init_seed=self.random_state,
        )
        model, trace, _ = train_restarts(
            config,
            (self.normalizer_.transform(X), self.normalizer_.transform_target(y)),
            (self.normalizer_.transform(X_val), self.normalizer_.transform_target(y_val)),
            self.restarts,
        )
        self.model_ = replace(model, normalizer=self.normalizer_)
        self.trace_ = trace
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return predict_array(self.model_, X)
