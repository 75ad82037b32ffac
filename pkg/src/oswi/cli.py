"""Command-line drivers: calibrate, bifurcate, propagate, train, sweep-lr, fetch.

Exit codes: 0 success, 2 bad configuration, 3 dataset or network I/O.
Option precedence: command-line flag > ``--config`` JSON > built-in default.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import data as _data
from .activations import format_spec, omega, parse_spec
from .calibration import calibrate, lr_band, negative_rate_curve, sigma_star
from .dynamics import bifurcation_scan, iterate, solve_xi
from .errors import DatasetError, OSWIError
from .experiments import (DESK_HIDDEN, DESK_WIDTH, PAPER_HIDDEN, PAPER_WIDTH, learnable_window,
                          lr_grid, prepare, sweep_lr)
from .initializers import PROPOSED, SCHEMES, InitScheme
from .network import MLP, TrainConfig, fit, mlp_config
from .propagation import PositiveConstant, UniformSym, ffnn_chain, scalar_chain, spread_vs_p_sweep

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


class ConfigError(Exception):
    pass


# --- output helpers -----------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    return str(x)


def dumps(obj, indent=2, _level=0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_, float, np.floating)):
        return fmt(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(str(obj))


def write_csv(path: Path, header, rows):
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit(result: dict, as_json: bool, out=None):
    out = out or sys.stdout
    if as_json:
        out.write(dumps(result) + "\n")
        return
    width = max((len(k) for k in result), default=0)
    for k, v in result.items():
        if isinstance(v, (dict, list)):
            v = dumps(v, indent=0).replace("\n", " ")
        else:
            v = fmt(v)
        out.write(f"{k.ljust(width)}  {v}\n")


# --- option handling ----------------------------------------------------------

COMMON = {"seed": 0, "json": False, "paper_scale": False, "out": None}

DEFAULTS = {
    "calibrate": {"p": 0.3, "depth": 20, "activation": "tanh", "omega": None},
    "bifurcate": {"activation": "tanh", "a": None, "a_min": 0.5, "a_max": 2.0, "a_steps": 16,
                  "x0": 0.1, "n": 200, "relative": True},
    "propagate": {"activation": "tanh", "mode": "ffnn", "init": PROPOSED, "p": 0.3, "depth": 1000,
                  "width": 2000, "chains": 20000, "x0": 0.1, "x0_dist": "const", "bins": 50,
                  "sweep_p": None, "method": "auto"},
    "train": {"activation": "tanh", "init": PROPOSED, "p": 0.3, "hidden": DESK_HIDDEN,
              "width": DESK_WIDTH, "lr": None, "epochs": 5, "batch_size": 128, "subset": 1000,
              "val_fraction": 0.15, "val_from_full": False, "batch_norm": False,
              "dataset": "mnist", "data_dir": None, "dump_weights": None},
    "sweep-lr": {"activation": "tanh", "alphas": [0.01, 1.0, 100.0], "inits": list(SCHEMES),
                 "lr_min_exp": -9, "lr_max_exp": 0, "p": 0.3, "hidden": DESK_HIDDEN,
                 "width": DESK_WIDTH, "epochs": 1, "subset": 1000, "dataset": "mnist",
                 "data_dir": None, "val_from_full": False},
    "fetch": {"dataset": "mnist", "dir": None, "mirror": None, "manifest": None, "timeout": 60.0},
}

PAPER_SCALE = {
    "propagate": {"depth": 10_000, "width": 20_000},
    "train": {"hidden": PAPER_HIDDEN, "width": PAPER_WIDTH},
    "sweep-lr": {"hidden": PAPER_HIDDEN, "width": PAPER_WIDTH},
}


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="oswi", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--seed", type=int)
    common.add_argument("--json", action="store_true", help="single JSON object on stdout")
    common.add_argument("--config", help="JSON file of option defaults")
    common.add_argument("--paper-scale", action="store_true", dest="paper_scale",
                        help="full-size settings (slow)")
    common.add_argument("--out", help="output directory for CSV/JSON files")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, argument_default=S)

    p = add("calibrate", "sigma* and learning-rate band")
    p.add_argument("--p", type=float)
    p.add_argument("--depth", type=int)
    p.add_argument("--activation")
    p.add_argument("--omega", type=float, help="override the activation's omega")

    p = add("bifurcate", "iterate x -> f(a x) over a range of gains")
    p.add_argument("--activation")
    p.add_argument("--a", type=_floats, help="comma-separated gains")
    p.add_argument("--a-min", type=float, dest="a_min")
    p.add_argument("--a-max", type=float, dest="a_max")
    p.add_argument("--a-steps", type=int, dest="a_steps")
    p.add_argument("--absolute", action="store_false", dest="relative",
                   help="gains are absolute, not multiples of omega")
    p.add_argument("--x0", type=float)
    p.add_argument("--n", type=int)

    p = add("propagate", "negative rate and last-layer spread")
    p.add_argument("--activation")
    p.add_argument("--mode", choices=["scalar", "ffnn"])
    p.add_argument("--init", choices=SCHEMES)
    p.add_argument("--p", type=float)
    p.add_argument("--depth", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--x0", type=float)
    p.add_argument("--x0-dist", choices=["const", "uniform"], dest="x0_dist")
    p.add_argument("--bins", type=int)
    p.add_argument("--method", choices=["auto", "dense", "marginal"])
    p.add_argument("--sweep-p", type=_floats, dest="sweep_p",
                   help="comma-separated p values for a spread-vs-p sweep")

    for name, help_ in (("train", "train one MLP"), ("sweep-lr", "learnable-LR grid")):
        p = add(name, help_)
        p.add_argument("--activation")
        p.add_argument("--p", type=float)
        p.add_argument("--hidden", type=int, help="number of hidden layers")
        p.add_argument("--width", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--subset", type=int, help="training subset size before the split")
        p.add_argument("--dataset", choices=sorted(_data.MIRRORS))
        p.add_argument("--data-dir", dest="data_dir")
        p.add_argument("--val-from-full", action="store_true", dest="val_from_full",
                       help="validate on the full test split instead of a held-out 15%%")
        if name == "train":
            p.add_argument("--init", choices=SCHEMES)
            p.add_argument("--lr", type=float, help="default: 1e-3 * omega")
            p.add_argument("--batch-size", type=int, dest="batch_size")
            p.add_argument("--val-fraction", type=float, dest="val_fraction")
            p.add_argument("--batch-norm", action="store_true", dest="batch_norm")
            p.add_argument("--dump-weights", dest="dump_weights",
                           help="directory for an OSWI checkpoint of the trained net")
        else:
            p.add_argument("--alphas", type=_floats)
            p.add_argument("--inits", type=lambda s: s.split(","))
            p.add_argument("--lr-min-exp", type=int, dest="lr_min_exp")
            p.add_argument("--lr-max-exp", type=int, dest="lr_max_exp")

    p = add("fetch", "download MNIST or Fashion-MNIST")
    p.add_argument("--dataset", choices=sorted(_data.MIRRORS))
    p.add_argument("--dir")
    p.add_argument("--mirror", action="append", help="base URL; repeatable")
    p.add_argument("--manifest", help="checksum manifest (default: <dir>/<dataset>/checksums.json)")
    p.add_argument("--timeout", type=float)
    return parser


def resolve(command: str, cli: dict) -> dict:
    opts = dict(COMMON) | dict(DEFAULTS[command])
    config_path = cli.pop("config", None)
    file_opts = {}
    if config_path:
        try:
            file_opts = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(file_opts, dict):
            raise ConfigError("config file must hold a JSON object")
        file_opts = {k.replace("-", "_"): v for k, v in file_opts.items()}
        unknown = set(file_opts) - set(opts)
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    if cli.get("paper_scale", file_opts.get("paper_scale", False)):
        opts |= PAPER_SCALE.get(command, {})
    opts |= file_opts
    opts |= cli
    return opts


# --- subcommands --------------------------------------------------------------

def _spec(text):
    try:
        return parse_spec(text)
    except (ValueError, OSWIError) as exc:
        raise ConfigError(f"bad activation {text!r}: {exc}") from exc


def _outdir(opts, name):
    path = Path(opts["out"] or f"oswi-{name}")
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_calibrate(o):
    spec = _spec(o["activation"])
    w = o["omega"] if o["omega"] is not None else omega(spec)
    res = calibrate(o["p"], o["depth"], w).to_dict()
    return {"activation": format_spec(spec)} | res


def cmd_bifurcate(o):
    spec = _spec(o["activation"])
    w = omega(spec)
    if o["a"] is not None:
        gains = list(o["a"])
    else:
        if o["a_steps"] < 1:
            raise ConfigError("a_steps must be positive")
        gains = list(np.linspace(o["a_min"], o["a_max"], o["a_steps"]))
    if o["relative"]:
        gains = [g * w for g in gains]
    if o["n"] < 1 or any(not g > 0 for g in gains):
        raise ConfigError("need n >= 1 and positive gains")
    out = _outdir(o, "bifurcate")
    long_rows = []
    for a in gains:
        trace = iterate(spec, a, o["x0"], o["n"])
        long_rows += [(a, i, v) for i, v in enumerate(trace.values)]
    scan = bifurcation_scan(spec, gains, o["x0"], o["n"])
    marks = []
    for a, _, _ in scan:
        fp = solve_xi(spec, a)
        marks += [(a, x, fp.regime) for x in fp.points]
    write_csv(out / "bifurcation.csv", ["a", "n", "x_n"], long_rows)
    write_csv(out / "fixedpoints.csv", ["a", "x", "regime"], marks)
    summary = {"activation": format_spec(spec), "omega": w, "x0": o["x0"], "n": o["n"],
               "final": [{"a": a, "x_n": x, "xi_a": xi} for a, x, xi in scan]}
    (out / "summary.json").write_text(dumps(summary) + "\n", encoding="utf-8")
    return summary


def cmd_propagate(o):
    spec = _spec(o["activation"])
    w = omega(spec)
    depth = o["depth"]
    if depth < 1 or o["width"] < 1 or o["chains"] < 1 or o["bins"] < 2:
        raise ConfigError("depth, width, chains must be positive and bins >= 2")
    s = sigma_star(o["p"], depth, w)
    out = _outdir(o, "propagate")
    if o["mode"] == "scalar":
        trace = scalar_chain(spec, s, depth, o["chains"], o["x0"], o["seed"], o["bins"])
    else:
        scheme = InitScheme.proposed(s, w, o["seed"]) if o["init"] == PROPOSED \
            else InitScheme(o["init"], o["seed"])
        x0 = PositiveConstant(o["x0"]) if o["x0_dist"] == "const" else UniformSym(abs(o["x0"]))
        trace = ffnn_chain(spec, scheme, o["width"], depth, x0, method=o["method"], bins=o["bins"])
    theory = negative_rate_curve(s, depth, w)
    write_csv(out / "negrate.csv", ["depth", "empirical", "theory"],
              [(j + 1, trace.negative_rate_per_depth[j], theory[j]) for j in range(depth)])
    counts, edges = trace.histogram()
    write_csv(out / "lastlayer.csv", ["bin_left", "bin_right", "count"],
              [(edges[i], edges[i + 1], int(c)) for i, c in enumerate(counts)])
    write_csv(out / "values.csv", ["index", "value"], enumerate(trace.last_layer_values))
    summary = {
        "activation": format_spec(spec), "mode": o["mode"],
        "init": o["init"] if o["mode"] == "ffnn" else "scalar",
        "omega": w, "p": o["p"], "depth": depth, "sigma_star": s,
        "final_negative_rate": float(trace.negative_rate_per_depth[-1]),
        "theory_negative_rate": float(theory[-1]),
        "spread": trace.spread,
        "max_abs_last": float(np.max(np.abs(trace.last_layer_values))),
    }
    if o["sweep_p"]:
        x0 = PositiveConstant(o["x0"]) if o["x0_dist"] == "const" else UniformSym(abs(o["x0"]))
        rows = spread_vs_p_sweep(spec, depth, o["width"], o["sweep_p"], o["bins"], o["seed"], x0,
                                 o["method"])
        write_csv(out / "spread.csv", ["p", "sigma_star", "spread"], rows)
        summary["spread_vs_p"] = [{"p": p, "sigma_star": si, "spread": sp} for p, si, sp in rows]
    (out / "summary.json").write_text(dumps(summary) + "\n", encoding="utf-8")
    return summary


def _datasets(o):
    ds = _data.load_dataset(o["dataset"], "train", o["data_dir"])
    val = _data.load_dataset(o["dataset"], "test", o["data_dir"]) if o["val_from_full"] else None
    return ds, val


def cmd_train(o):
    spec = _spec(o["activation"])
    w = omega(spec)
    lr = o["lr"] if o["lr"] is not None else 1e-3 * w
    tcfg = TrainConfig(lr=lr, epochs=o["epochs"], batch_size=o["batch_size"],
                       val_fraction=o["val_fraction"])
    ds, val = _datasets(o)
    train_set, val_set = prepare(ds, o["subset"], o["seed"], tcfg.val_fraction, val)
    cfg = mlp_config(spec, o["init"], o["hidden"], o["width"], train_set.images.shape[1],
                     int(ds.labels.max()) + 1, o["p"], o["seed"], o["batch_norm"])
    net = MLP(cfg)
    report = fit(net, tcfg, train_set, val_set, f"{format_spec(spec)}/{o['init']}")
    out = _outdir(o, "train")
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    result = {"activation": format_spec(spec), "init": o["init"], "omega": w, "lr": lr,
              "lr_band": list(lr_band(w)), "train_size": len(train_set),
              "val_size": len(val_set)} | report.to_dict()
    (out / "report.json").write_text(dumps(result) + "\n", encoding="utf-8")
    if o["dump_weights"]:
        net.save(o["dump_weights"])
    return result


def cmd_sweep_lr(o):
    base = _spec(o["activation"])
    bad = set(o["inits"]) - set(SCHEMES)
    if bad:
        raise ConfigError(f"unknown init schemes {sorted(bad)}")
    if o["lr_min_exp"] > o["lr_max_exp"]:
        raise ConfigError("lr_min_exp must not exceed lr_max_exp")
    ds, val = _datasets(o)
    rows = sweep_lr(ds, o["alphas"], o["inits"], lr_grid(o["lr_min_exp"], o["lr_max_exp"]),
                    o["subset"], o["hidden"], o["width"], o["epochs"], o["seed"], o["p"], base, val)
    out = _outdir(o, "sweep-lr")
    write_csv(out / "grid.csv", ["alpha", "omega", "init", "lr", "val_acc", "learned"],
              [(r.alpha, r.omega, r.init, r.lr, r.val_acc, r.learned) for r in rows])
    windows = []
    for alpha in o["alphas"]:
        w = omega(base.scaled(alpha))
        for kind in o["inits"]:
            win = learnable_window(rows, float(alpha), kind)
            windows.append({"alpha": alpha, "omega": w, "init": kind,
                            "window": list(win) if win else None,
                            "band": list(lr_band(w))})
    result = {"activation": format_spec(base), "windows": windows}
    (out / "windows.json").write_text(dumps(result) + "\n", encoding="utf-8")
    return result


def cmd_fetch(o):
    paths = _data.fetch(o["dataset"], o["dir"], o["mirror"], o["manifest"], o["timeout"])
    return {"dataset": o["dataset"], "files": [str(p) for p in paths]}


COMMANDS = {
    "calibrate": cmd_calibrate,
    "bifurcate": cmd_bifurcate,
    "propagate": cmd_propagate,
    "train": cmd_train,
    "sweep-lr": cmd_sweep_lr,
    "fetch": cmd_fetch,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    cli = vars(args)
    command = cli.pop("command")
    try:
        opts = resolve(command, cli)
        if opts["paper_scale"]:
            warnings.warn("--paper-scale: full-size settings, expect long runtimes", stacklevel=1)
        result = COMMANDS[command](opts)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, OSWIError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    emit(result, opts["json"])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
