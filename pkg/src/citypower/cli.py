"""Command-line pipeline: gen, split, train, eval, pi, report.

Commands compose through files only. Every flag can also come from a JSON
config file (``--config``) whose keys are the flag names with dashes or
underscores; flags given on the command line win.

On failure a JSON object ``{"error", "message", "exit_code"}`` is written to
stderr and the process exits with the error class's code: 2 for config, 3 for
I/O, 4 for data and 5 for training errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from .dataset import SplitPlan, load_csv, read_id_file, split, write_csv
from .exceptions import CityPowerError, ConfigError, IoError
from .metrics import evaluate, format_table
from .mlp import MlpConfig, TrainingTrace, fit_dataset, load_model, predict, save_model
from .permimp import pi_report
from .report import prediction_svg, scatter_svg, training_curve_svg, write_svg
from .schema import default_schema, load_schema, save_schema
from . import synthgen

DEFAULTS = {
    "data": None,
    "schema": None,
    "model": None,
    "split": None,
    "trace": None,
    "out": ".",
    "seed": 0,
    "testb_ids": None,
    "testb_size": 49,
    "val_fraction": 0.04,
    "testa_fraction": 0.04,
    "n_cities": 300,
    "noise_sigma": 0.05,
    "hidden": 10,
    "activation": "tansig",
    "lr": 0.01,
    "max_epochs": 1000,
    "patience": 6,
    "restarts": 1,
    "jobs": 1,
    "pi_reps": 10,
    "pi_features": None,
    "pi_group": "all",
    "pi_mode": "abs",
    "no_timestamp": False,
}


# ---------------------------------------------------------------- settings

class Settings(dict):
    """Merged flags: command line over config file over defaults."""

    def __getattr__(self, name):
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name) from None

    def path(self, key, required=True, must_exist=True):
        value = self[key]
        if value is None:
            if required:
                raise ConfigError(f"--{key.replace('_', '-')} is required")
            return None
        p = Path(value)
        if must_exist and not p.exists():
            raise IoError(f"--{key.replace('_', '-')}: {p} does not exist")
        return p

    def out_dir(self) -> Path:
        out = Path(self.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create {out}: {exc}") from None
        return out


def _read_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    out = {}
    for key, value in doc.items():
        norm = key.lstrip("-").replace("-", "_")
        if norm not in DEFAULTS:
            raise ConfigError(f"{path}: unknown setting {key!r}")
        out[norm] = value
    # relative paths in a config file are relative to the file
    base = Path(path).parent
    for key in ("data", "schema", "model", "split", "trace", "testb_ids", "out"):
        if isinstance(out.get(key), str) and not Path(out[key]).is_absolute():
            out[key] = str(base / out[key])
    return out


def resolve(args: argparse.Namespace) -> Settings:
    merged = dict(DEFAULTS)
    if args.config:
        merged.update(_read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            merged[key] = value
    if isinstance(merged["pi_features"], str):
        merged["pi_features"] = [f.strip() for f in merged["pi_features"].split(",") if f.strip()]
    return Settings(merged)


def _schema(s: Settings):
    p = s.path("schema", required=False)
    return load_schema(p) if p else default_schema()


def _data(s: Settings):
    schema = _schema(s)
    return load_csv(s.path("data"), schema)


def _model_for(s: Settings, data):
    model = load_model(s.path("model"))
    if model.schema_hash != data.schema.fingerprint():
        raise ConfigError("model was trained on a different schema (schema hash mismatch)")
    return model


def _mlp_config(s: Settings, n_inputs: int) -> MlpConfig:
    return MlpConfig(n_inputs=n_inputs, n_hidden=int(s.hidden), hidden_activation=s.activation,
                     learning_rate=float(s.lr), max_epochs=int(s.max_epochs),
                     patience=int(s.patience), init_seed=int(s.seed))


def _write_json(doc, path: Path) -> Path:
    try:
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
    return path


# ---------------------------------------------------------------- commands

def cmd_gen(s: Settings) -> list[Path]:
    """Synthetic cities, their ground truth, a schema copy and a testB id file."""
    schema = _schema(s)
    cfg = synthgen.default_config(seed=int(s.seed), schema=schema, n_cities=int(s.n_cities),
                                  noise_sigma=float(s.noise_sigma))
    data, truth = synthgen.generate(cfg)
    out = s.out_dir()
    write_csv(data, out / "cities.csv")
    truth.save(out / "ground_truth.json")
    save_schema(schema, out / "schema.json")
    ids = synthgen.stratified_holdout(data, min(int(s.testb_size), len(data) // 4))
    (out / "testb_ids.txt").write_text("\n".join(ids) + "\n", encoding="utf-8")
    return [out / "cities.csv", out / "ground_truth.json", out / "schema.json", out / "testb_ids.txt"]


def cmd_split(s: Settings) -> list[Path]:
    data = _data(s)
    testb = read_id_file(s.path("testb_ids")) if s.testb_ids else []
    plan = split(data, testb, float(s.val_fraction), float(s.testa_fraction), int(s.seed))
    path = s.out_dir() / "split.json"
    plan.save(path)
    print(json.dumps(plan.counts()))
    return [path]


def cmd_train(s: Settings) -> list[Path]:
    data = _data(s)
    plan = SplitPlan.load(s.path("split"))
    config = _mlp_config(s, len(data.schema))
    model, trace = fit_dataset(data, plan, config, restarts=int(s.restarts), n_jobs=int(s.jobs))
    out = s.out_dir()
    save_model(model, out / "model.json")
    trace.to_csv(out / "trace.csv")
    print(f"best validation MSE {trace.best_val_mse!r} at epoch {trace.best_epoch} "
          f"({trace.stop_reason.value}, init seed {trace.init_seed})")
    return [out / "model.json", out / "trace.csv"]


def cmd_eval(s: Settings) -> list[Path]:
    data = _data(s)
    model = _model_for(s, data)
    plan = SplitPlan.load(s.path("split"))
    reports = {g: evaluate(model, data, plan.ids(g)) for g in SplitPlan.GROUPS if plan.ids(g)}
    path = _write_json({g: r.to_dict() for g, r in reports.items()}, s.out_dir() / "metrics.json")
    print(format_table(reports, unit=data.schema.target_unit))
    return [path]


def cmd_pi(s: Settings) -> list[Path]:
    data = _data(s)
    model = _model_for(s, data)
    if s.pi_group == "all":
        ids = None
    elif s.pi_group in SplitPlan.GROUPS:
        ids = SplitPlan.load(s.path("split")).ids(s.pi_group)
    else:
        raise ConfigError(f"--pi-group must be 'all' or one of {SplitPlan.GROUPS}")
    rep = pi_report(model, data, ids=ids, features=s.pi_features, L=int(s.pi_reps),
                    seed=int(s.seed), mode=s.pi_mode, n_jobs=int(s.jobs))
    path = _write_json(rep.to_dict(), s.out_dir() / "pi.json")
    print(rep.format_table())
    return [path]


def cmd_report(s: Settings) -> list[Path]:
    data = _data(s)
    model = _model_for(s, data)
    plan = SplitPlan.load(s.path("split"))
    ids = plan.ids("testB")
    if not ids:
        raise ConfigError("the split has no testB cities to plot")
    trace_path = s.path("trace", required=False) or s.path("model").with_name("trace.csv")
    trace = TrainingTrace.from_csv(trace_path)
    pairs = predict(model, data, ids)
    actual = data.y[data.rows(ids)]
    predicted = [p for _, p in pairs]
    stamp = not s.no_timestamp
    unit = data.schema.target_unit
    out = s.out_dir()
    return [
        write_svg(prediction_svg(ids, actual, predicted, unit, timestamp=stamp), out / "testb_comparison.svg"),
        write_svg(scatter_svg(ids, actual, predicted, unit, timestamp=stamp), out / "testb_scatter.svg"),
        write_svg(training_curve_svg(trace, timestamp=stamp), out / "training_curve.svg"),
    ]


COMMANDS = {
    "gen": (cmd_gen, "generate a synthetic city dataset"),
    "split": (cmd_split, "split cities into train/val/testA/testB"),
    "train": (cmd_train, "train the network and keep the best-validation restart"),
    "eval": (cmd_eval, "score the model on every split group"),
    "pi": (cmd_pi, "permutation importance of features"),
    "report": (cmd_report, "SVG figures for testB predictions and the training curve"),
}


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # defaults are None so unset flags fall through to the config file
    add = common.add_argument
    add("--config", help="JSON file with default values for any flag")
    add("--data", help="city CSV")
    add("--schema", help="schema JSON (default: built-in 85-feature schema)")
    add("--model", help="model JSON")
    add("--split", help="split JSON")
    add("--trace", help="training trace CSV (report; default: next to the model)")
    add("--out", help="output directory")
    add("--seed", type=int)
    add("--testb-ids", dest="testb_ids", help="file with one testB city_id per line")
    add("--testb-size", dest="testb_size", type=int, help="gen: cities written to testb_ids.txt")
    add("--val-fraction", dest="val_fraction", type=float)
    add("--testa-fraction", dest="testa_fraction", type=float)
    add("--n-cities", dest="n_cities", type=int)
    add("--noise-sigma", dest="noise_sigma", type=float)
    add("--hidden", type=int)
    add("--activation", choices=["tansig", "purelin"])
    add("--lr", type=float)
    add("--max-epochs", dest="max_epochs", type=int)
    add("--patience", type=int)
    add("--restarts", type=int)
    add("--jobs", type=int, help="threads for restarts and PI")
    add("--pi-reps", dest="pi_reps", type=int)
    add("--pi-features", dest="pi_features", help="comma-separated feature names")
    add("--pi-group", dest="pi_group", help="rows scored by PI: all, train, val, testA or testB")
    add("--pi-mode", dest="pi_mode", choices=["abs", "drop"])
    add("--no-timestamp", dest="no_timestamp", action="store_true", default=None)

    parser = argparse.ArgumentParser(prog="citypower", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_, description=help_)
    return parser


def _fail(exc: CityPowerError) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    print(json.dumps(doc), file=sys.stderr)
    return exc.exit_code


def _show_warning(message, category, *_args, **_kwargs):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = resolve(args)
        with warnings.catch_warnings():
            warnings.showwarning = _show_warning
            written = COMMANDS[args.command][0](settings)
    except CityPowerError as exc:
        return _fail(exc)
    except OSError as exc:
        return _fail(IoError(str(exc)))
    for p in written:
        print(f"wrote {p}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
