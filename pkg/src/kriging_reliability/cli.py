"""Command-line front end.

Exit codes: 0 on success, 1 for usage, parameter, input or I/O errors, 2 when
a factorization or power-function evaluation breaks down numerically.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import functools
import json
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import svg
from .designs import Design, halton_points
from .errors import ConditioningError, ConfigError, KrigingError
from .experiments import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    jsonable,
    preset,
    run_experiment,
    test_function_gramacy,
    write_result,
)
from .gp import (
    FitConfig,
    PredictionBand,
    confidence_band,
    fit,
    power_function,
    power_values_precise,
)
from .kernels import KernelSpec, correlation
from .reliability import ReliabilityReport, pointwise_ratios, ratio_metric

__all__ = ["build_parser", "load_config", "main", "parse_and_dispatch", "save_config"]

HELP_WIDTH = 80

KERNEL_DEFAULTS = {"family": "matern", "nu": 3.5, "dim": 1, "kappa": None, "mu_gw": None}
FIT_DEFAULTS = {"mu_c": 0.0, "mu_alpha": 0.0, "sigma2": "mle", "sigma2_value": None,
                "beta": 0.05, "jitter": 1e-8}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _formatter(prog):
    return argparse.HelpFormatter(prog, width=HELP_WIDTH)


# --- configuration files ------------------------------------------------------


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read an experiment configuration; absent keys keep the ``base`` values."""
    data = _read_json_object(path)
    return ExperimentConfig.from_dict(data, base)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(jsonable(config.to_dict()), indent=2, sort_keys=True) + "\n")


def _read_json_object(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a JSON object")
    return data


def _resolve(args, defaults: dict) -> dict:
    """Merge flag values over the ``--config`` file over ``defaults``."""
    file_values = {}
    if args.config:
        file_values = _read_json_object(args.config)
        for key in file_values:
            if key not in defaults:
                raise ConfigError(key, "unknown configuration key")
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else file_values.get(key, default)
    return out


def _kernel(values: dict) -> KernelSpec:
    fam = values["family"]
    try:
        if fam == "matern":
            return KernelSpec.matern(float(values["nu"]), int(values["dim"]))
        return KernelSpec.wendland(values["kappa"], values["mu_gw"], int(values["dim"]))
    except TypeError as exc:
        raise ConfigError("kernel", str(exc)) from exc


def _fit_config(values: dict) -> FitConfig:
    return FitConfig(
        mu_c=float(values["mu_c"]), mu_alpha=float(values["mu_alpha"]), sigma2=values["sigma2"],
        sigma2_value=values["sigma2_value"], beta=float(values["beta"]), jitter=float(values["jitter"]),
    )


# --- output helpers -----------------------------------------------------------


@contextlib.contextmanager
def atomic_directory(target, overwrite: bool = False):
    """Yield a scratch directory that replaces ``target`` only on success."""
    target = Path(target)
    if target.exists() and not overwrite:
        raise UsageError(f"output directory {target} exists; pass --overwrite to replace it")
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    os.chmod(tmp, 0o755)
    if target.exists():
        old = target.with_name(f".{target.name}.old-{os.getpid()}")
        target.rename(old)
        tmp.rename(target)
        shutil.rmtree(old, ignore_errors=True)
    else:
        tmp.rename(target)


def _read_points(path, d: int | None = None) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or any(h.strip() != f"x{i + 1}" for i, h in enumerate(header)):
            raise ConfigError("eval", f"{path}: expected header x1[,x2,...]")
        rows = [[float(v) for v in row] for row in reader if row]
    pts = np.array(rows, dtype=float).reshape(-1, len(header))
    if d is not None and pts.shape[1] != d:
        raise ConfigError("eval", f"{path}: points have dimension {pts.shape[1]}, expected {d}")
    return pts


def _read_data(path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in (next(reader, None) or [])]
        d = len(header) - 1
        if d < 1 or header[-1] != "y" or header[:-1] != [f"x{i + 1}" for i in range(d)]:
            raise ConfigError("data", f"{path}: expected header x1[,x2,...],y")
        rows = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    rows = rows.reshape(-1, d + 1)
    return rows[:, :d], rows[:, d]


def _eval_points(args, d: int) -> np.ndarray:
    if args.eval:
        return _read_points(args.eval, d)
    return halton_points(args.eval_halton, d)


def _load_model(path):
    data = _read_json_object(path)
    try:
        kernel = KernelSpec.from_dict(data["kernel"])
        config = FitConfig(**data["fit"])
        points = np.array(data["points"], dtype=float)
        y = np.array(data["y"], dtype=float)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), f"missing from model file {path}") from exc
    except TypeError as exc:
        raise ConfigError("fit", str(exc)) from exc
    return fit(Design(points), y, kernel, config)


def _model_record(model) -> dict:
    return {
        "kernel": model.kernel.to_dict(),
        "fit": {
            "mu_c": model.config.mu_c, "mu_alpha": model.config.mu_alpha,
            "sigma2": model.config.sigma2, "sigma2_value": model.config.sigma2_value,
            "beta": model.config.beta, "jitter": model.config.jitter,
        },
        "points": model.design.points.tolist(),
        "y": model.y.tolist(),
        "n": model.n,
        "mu_hat": model.mu_hat,
        "jitter_used": model.jitter_used,
        "sigma2_hat": model.sigma2_hat,
        "dual_weights": model.dual_weights.tolist(),
    }


# --- subcommands --------------------------------------------------------------


def _cmd_kernel_eval(args) -> int:
    values = _resolve(args, KERNEL_DEFAULTS)
    kernel = _kernel(values)
    vals = np.atleast_1d(correlation(np.array(args.r, dtype=float), kernel))
    for v in vals:
        print(f"{v:.15g}")
    if args.out:
        with atomic_directory(args.out, args.overwrite) as tmp:
            with (tmp / "values.csv").open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["r", "value"])
                for r, v in zip(args.r, vals):
                    writer.writerow([repr(float(r)), repr(float(v))])
    return 0


def _cmd_fit(args) -> int:
    values = _resolve(args, {**KERNEL_DEFAULTS, **FIT_DEFAULTS})
    kernel = _kernel(values)
    config = _fit_config(values)
    points, y = _read_data(args.data)
    model = fit(Design(points), y, kernel, config)
    record = _model_record(model)
    print(json.dumps({k: record[k] for k in ("n", "mu_hat", "jitter_used", "sigma2_hat")}))
    if args.out:
        with atomic_directory(args.out, args.overwrite) as tmp:
            (tmp / "model.json").write_text(json.dumps(jsonable(record), indent=2) + "\n")
    return 0


def _cmd_predict(args) -> int:
    model = _load_model(args.model)
    band = confidence_band(model, _eval_points(args, model.design.d))
    if not args.out:
        tmp = Path(tempfile.mkdtemp())
        try:
            band.to_csv(tmp / "band.csv")
            sys.stdout.write((tmp / "band.csv").read_text())
        finally:
            shutil.rmtree(tmp)
        return 0
    with atomic_directory(args.out, args.overwrite) as tmp:
        band.to_csv(tmp / "band.csv")
        if model.design.d == 1:
            svg.emit_svg_panel(band, tmp / "band.svg", title="Prediction band", xlabel="x", ylabel="f")
    return 0


def _cmd_power(args) -> int:
    model = _load_model(args.model)
    pts = _eval_points(args, model.design.d)
    if args.precise:
        if model.mu_hat > 0:
            raise ConfigError("precise", "extended precision covers interpolation only (mu_c = 0)")
        p2 = power_values_precise(model.design, model.kernel, pts, args.neighbors, args.dps)
    else:
        p2 = power_function(model, pts)
    print(f"sup_power {math.sqrt(float(p2.max())):.15g}")
    if args.out:
        d = pts.shape[1]
        with atomic_directory(args.out, args.overwrite) as tmp:
            with (tmp / "power.csv").open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([*(["x"] if d == 1 else [f"x{i + 1}" for i in range(d)]), "power"])
                for x, v in zip(pts, p2):
                    writer.writerow([*(repr(float(c)) for c in x), repr(float(v))])
    return 0


def _truth_values(args, band: PredictionBand) -> np.ndarray:
    if args.truth:
        with Path(args.truth).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["f"]:
                raise ConfigError("truth", f"{args.truth}: expected a single column named f")
            return np.array([float(row[0]) for row in reader if row])
    if band.eval_points.shape[1] != 1:
        raise ConfigError("test_function", "the built-in test function is one-dimensional")
    return test_function_gramacy(band.eval_points[:, 0])


def _cmd_reliability(args) -> int:
    p = math.inf if args.p in ("inf", "Infinity") else float(args.p)
    if args.n and len(args.n) != len(args.band):
        raise UsageError("--n needs one size per --band file")
    results = []
    for path in args.band:
        band = PredictionBand.from_csv(path)
        truth = _truth_values(args, band)
        ratios = pointwise_ratios(truth - band.means, band.widths)
        results.append({
            "band": str(path),
            "p": p,
            "E": ratio_metric(truth, band, p),
            "max_ratio": float(ratios.max()),
            "coverage": float(np.mean((band.lower <= truth) & (truth <= band.upper))),
            "infinite_ratio_count": int(np.isinf(ratios).sum()),
        })
    for res in results:
        print(json.dumps(jsonable(res), sort_keys=True))
    if args.out:
        with atomic_directory(args.out, args.overwrite) as tmp:
            (tmp / "reliability.json").write_text(json.dumps(jsonable(results), indent=2, sort_keys=True) + "\n")
            if args.n:
                report = ReliabilityReport(p, [(n, r["E"]) for n, r in zip(args.n, results)])
                report.write(tmp / "report.csv", tmp / "report.json")
                svg.emit_svg_panel(report, tmp / "report.svg", title="E against n", log=True)
    return 0


_EXPERIMENT_FLAGS = ("n_list", "replicates", "beta", "p", "jitter", "noise_sd", "eval_points")


def _cmd_experiment(args) -> int:
    base = preset(args.kind)
    config = load_config(args.config, base) if args.config else base
    overrides = {k: getattr(args, k) for k in _EXPERIMENT_FLAGS if getattr(args, k) is not None}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if overrides.get("p") in ("inf", "Infinity"):
        overrides["p"] = "inf"
    elif "p" in overrides:
        overrides["p"] = float(overrides["p"])
    config = ExperimentConfig.from_dict(overrides, config)
    if not args.out:
        raise UsageError("experiment needs --out DIR")
    result = run_experiment(args.kind, config, args.workers)
    with atomic_directory(args.out, args.overwrite) as tmp:
        write_result(result, tmp)
    flags = result.summary.get("flags", {})
    for name, ok in flags.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0


# --- parser -------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("shared options")
    g.add_argument("--config", metavar="PATH", help="JSON file of option values (flags take precedence)")
    g.add_argument("--out", metavar="DIR", help="output directory, written atomically")
    g.add_argument("--seed", metavar="U64", type=_u64, help="master random seed")
    g.add_argument("--overwrite", action="store_true", help="replace an existing output directory")
    g.add_argument("--workers", type=int, default=1, metavar="N", help="worker processes (default 1)")
    return p


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _kernel_flags() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("kernel")
    g.add_argument("--family", choices=["matern", "generalized-wendland"], help="correlation family (default matern)")
    g.add_argument("--nu", type=float, help="Matérn smoothness, must exceed dim/2 (default 3.5)")
    g.add_argument("--dim", type=int, help="input dimension (default 1)")
    g.add_argument("--kappa", type=float, help="generalized Wendland shape kappa > 0")
    g.add_argument("--mu-gw", dest="mu_gw", type=float, help="generalized Wendland exponent")
    return p


def _fit_flags() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("fit")
    g.add_argument("--mu-c", dest="mu_c", type=float, help="regularization constant c in c*n^alpha (default 0)")
    g.add_argument("--mu-alpha", dest="mu_alpha", type=float, help="regularization exponent alpha < 1 (default 0)")
    g.add_argument("--sigma2", choices=["mle", "constant", "unscaled"], help="variance estimate (default mle)")
    g.add_argument("--sigma2-value", dest="sigma2_value", type=float, help="variance for --sigma2 constant")
    g.add_argument("--beta", type=float, help="band level parameter in (0, 1) (default 0.05)")
    g.add_argument("--jitter", type=float, help="initial diagonal jitter (default 1e-8)")
    return p


def _eval_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("evaluation points")
    ex = g.add_mutually_exclusive_group()
    ex.add_argument("--eval", metavar="CSV", help="points with header x1[,x2,...]")
    ex.add_argument("--eval-halton", dest="eval_halton", type=int, default=500, metavar="N",
                    help="use the first N Halton points (default 500)")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    kernel = _kernel_flags()
    fitp = _fit_flags()
    parser = _Parser(prog="kriging-reliability", formatter_class=_formatter,
                     description="Kriging bands and their reliability diagnostics.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("kernel-eval", parents=[common, kernel], formatter_class=_formatter,
                       help="evaluate a correlation function", description="Print correlation values at lags.")
    p.add_argument("--r", type=float, nargs="+", required=True, metavar="LAG", help="nonnegative lags")
    p.set_defaults(func=_cmd_kernel_eval)

    p = sub.add_parser("fit", parents=[common, kernel, fitp], formatter_class=_formatter,
                       help="fit a kriging model", description="Fit a model and write model.json.")
    p.add_argument("--data", required=True, metavar="CSV", help="observations with header x1[,x2,...],y")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", parents=[common], formatter_class=_formatter,
                       help="write a prediction band", description="Evaluate the band of a fitted model.")
    p.add_argument("--model", required=True, metavar="JSON", help="model.json written by fit")
    _eval_flags(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("power", parents=[common], formatter_class=_formatter,
                       help="evaluate the power function", description="Evaluate the squared power function.")
    p.add_argument("--model", required=True, metavar="JSON", help="model.json written by fit")
    _eval_flags(p)
    p.add_argument("--precise", action="store_true", help="extended-precision local evaluation")
    p.add_argument("--neighbors", type=int, default=16, help="nearest design points used by --precise")
    p.add_argument("--dps", type=int, default=40, help="decimal digits used by --precise")
    p.set_defaults(func=_cmd_power)

    p = sub.add_parser("reliability", parents=[common], formatter_class=_formatter,
                       help="score prediction bands", description="Ratio metric and coverage of bands.")
    p.add_argument("--band", required=True, nargs="+", metavar="CSV", help="band.csv files written by predict")
    p.add_argument("--truth", metavar="CSV", help="true values, one column named f (default: built-in test function)")
    p.add_argument("--p", default="4", help="exponent of the ratio metric, >= 2 or inf (default 4)")
    p.add_argument("--n", type=int, nargs="+", help="design size of each band; adds a log-log report")
    p.set_defaults(func=_cmd_reliability)

    p = sub.add_parser("experiment", formatter_class=_formatter, help="run an experiment",
                       description="Run one of the packaged experiments.")
    kinds = p.add_subparsers(dest="kind", metavar="KIND", parser_class=_Parser)
    kinds.required = True
    for kind in EXPERIMENT_KINDS:
        k = kinds.add_parser(kind, parents=[common], formatter_class=_formatter,
                             help=f"{kind} experiment", description=f"Run the {kind} experiment.")
        g = k.add_argument_group("overrides")
        g.add_argument("--n-list", dest="n_list", type=int, nargs="+", metavar="N", help="design sizes")
        g.add_argument("--replicates", type=int, help="replicates per cell")
        g.add_argument("--eval-points", dest="eval_points", type=int, help="number of Halton evaluation points")
        g.add_argument("--beta", type=float, help="band level parameter")
        g.add_argument("--p", help="ratio-metric exponent")
        g.add_argument("--jitter", type=float, help="initial diagonal jitter")
        g.add_argument("--noise-sd", dest="noise_sd", type=float, help="observation noise standard deviation")
        k.set_defaults(func=_cmd_experiment)
    return parser


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConditioningError as exc:
        params = {k: v for k, v in vars(args).items() if k != "func"}
        print(f"conditioning error: {exc}", file=sys.stderr)
        print(f"parameters: {json.dumps(jsonable(params), sort_keys=True)}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (KrigingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
