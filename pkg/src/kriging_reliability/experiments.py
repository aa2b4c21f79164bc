"""Experiment drivers: deterministic reproduction, regularization sweep, GP baseline.

Every driver returns an :class:`ExperimentResult` holding tables (column names
plus rows), a flat summary with the checked properties, and the resolved
configuration. :func:`write_result` turns it into a directory of CSV, JSON and
SVG files. Random streams are derived from ``master_seed`` and the cell indices
only, so output does not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve

from . import svg
from .designs import grid_design, halton_design, halton_points, uniform_random_design
from .errors import ConfigError, ParameterError
from .gp import (
    FitConfig,
    build_correlation_matrix,
    conditional_factor,
    confidence_band,
    cross_correlation,
    factorize,
    fit,
    sup_power,
    sup_power_precise,
)
from .kernels import KernelSpec, normal_quantile
from .reliability import ReliabilityReport, loglog_slope, pointwise_ratios, ratio_metric

__all__ = [
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "ExperimentResult",
    "EdgeWitness",
    "cauchy_density",
    "estimate_reference_norm_constant",
    "preset",
    "run_deterministic_experiment",
    "run_experiment",
    "run_gp_baseline",
    "run_power_rate_study",
    "run_stochastic_experiment",
    "test_function_gramacy",
    "write_result",
]

EXPERIMENT_KINDS = ("deterministic", "stochastic", "gp-baseline", "power-rate")
TEST_FUNCTIONS = ("auto", "gramacy", "witness")
# replicates handled by one worker task; fixed so results ignore the worker count
_CHUNK = 10


# --- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved parameters of one experiment run.

    ``alpha_list=None`` means ``{0, d/(2 nu + d), 0.5, 0.8}`` and
    ``mu_const=None`` means ``noise_sd**2``. ``test_function="auto"`` uses the
    Gramacy-type function for the deterministic run and the unit-norm edge
    witness for the stochastic one.
    """

    kernel: KernelSpec = field(default_factory=lambda: KernelSpec.matern(3.5, 1))
    n_list: tuple[int, ...] = tuple(range(40, 401, 20))
    eval_points: int = 500
    jitter: float = 1e-8
    beta: float = 0.05
    p: float = 4.0
    noise_sd: float = 0.0
    alpha_list: tuple[float, ...] | None = None
    mu_const: float | None = None
    replicates: int = 50
    master_seed: int = 12345
    grid_endpoints: bool = True
    reference_points: int = 1000
    test_function: str = "auto"
    witness_excess: float = 0.1
    witness_terms: int = 2000
    witness_norm: float = 1.0
    p_list: tuple[float, ...] = (2.0, 4.0)
    gp_variance: float = 1.0
    power_neighbors: int = 16
    power_dps: int = 40

    def __post_init__(self):
        def fail(key, msg):
            raise ConfigError(key, msg)

        if not isinstance(self.kernel, KernelSpec):
            fail("kernel", "must be a KernelSpec")
        ns = tuple(int(n) for n in self.n_list)
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
            fail("n_list", "must be a nonempty strictly increasing list of positive sizes")
        object.__setattr__(self, "n_list", ns)
        if self.eval_points < 1:
            fail("eval_points", "must be positive")
        if not self.jitter >= 0:
            fail("jitter", "must be nonnegative")
        if not 0 < self.beta < 1:
            fail("beta", f"must lie in (0, 1), got {self.beta}")
        if not (self.p == math.inf or self.p >= 2):
            fail("p", "must be >= 2 or inf")
        if not self.noise_sd >= 0:
            fail("noise_sd", "must be nonnegative")
        if self.alpha_list is not None:
            alphas = tuple(float(a) for a in self.alpha_list)
            if not alphas or any(not a < 1 for a in alphas):
                fail("alpha_list", "every alpha must be < 1")
            object.__setattr__(self, "alpha_list", alphas)
        if self.mu_const is not None and not self.mu_const >= 0:
            fail("mu_const", "must be nonnegative")
        if int(self.replicates) < 1:
            fail("replicates", "must be at least 1")
        if not 0 <= int(self.master_seed) < 2**64:
            fail("master_seed", "must be an unsigned 64-bit integer")
        if self.reference_points < 2:
            fail("reference_points", "must be at least 2")
        if self.test_function not in TEST_FUNCTIONS:
            fail("test_function", f"must be one of {TEST_FUNCTIONS}")
        if not self.witness_excess > 0:
            fail("witness_excess", "must be positive")
        if self.witness_terms < 1:
            fail("witness_terms", "must be positive")
        if not self.witness_norm > 0:
            fail("witness_norm", "must be positive")
        ps = tuple(float(v) for v in self.p_list)
        if not ps or any(not v >= 2 for v in ps):
            fail("p_list", "entries must be >= 2")
        object.__setattr__(self, "p_list", ps)
        if not self.gp_variance > 0:
            fail("gp_variance", "must be positive")
        if self.power_neighbors < 2:
            fail("power_neighbors", "must be at least 2")
        if self.power_dps < 16:
            fail("power_dps", "must be at least 16")

    @property
    def alphas(self) -> tuple[float, ...]:
        if self.alpha_list is not None:
            return self.alpha_list
        d, nu = self.kernel.dim, self.kernel.smoothness
        return (0.0, d / (2 * nu + d), 0.5, 0.8)

    @property
    def mu_c(self) -> float:
        return self.noise_sd**2 if self.mu_const is None else float(self.mu_const)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["kernel"] = self.kernel.to_dict()
        for key in ("n_list", "alpha_list", "p_list"):
            if out[key] is not None:
                out[key] = list(out[key])
        if out["p"] == math.inf:
            out["p"] = "inf"
        return out

    @classmethod
    def from_dict(cls, data: dict, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        """Overlay ``data`` on ``base`` (the defaults when omitted)."""
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        values = {}
        for key, value in data.items():
            try:
                values[key] = _coerce(key, value)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(key, str(exc)) from exc
        base = base or cls()
        try:
            return dataclasses.replace(base, **values)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(next(iter(values), "config"), str(exc)) from exc


_INT_KEYS = {"eval_points", "replicates", "master_seed", "reference_points", "witness_terms",
             "power_neighbors", "power_dps"}
_FLOAT_KEYS = {"jitter", "beta", "p", "noise_sd", "mu_const", "witness_excess", "witness_norm",
               "gp_variance"}


def _number(value, kind):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError(f"expected a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _coerce(key: str, value):
    if key == "kernel":
        if isinstance(value, KernelSpec):
            return value
        if not isinstance(value, dict):
            raise TypeError("expected an object")
        return KernelSpec.from_dict(value)
    if key == "p" and value in ("inf", "Infinity"):
        return math.inf
    if key == "mu_const" and value is None:
        return None
    if key in _INT_KEYS:
        return _number(value, int)
    if key in _FLOAT_KEYS:
        return _number(value, float)
    if key == "grid_endpoints":
        if not isinstance(value, bool):
            raise TypeError("expected true or false")
        return value
    if key == "test_function":
        if not isinstance(value, str):
            raise TypeError("expected a string")
        return value
    if key == "alpha_list" and value is None:
        return None
    if not isinstance(value, (list, tuple)):
        raise TypeError("expected a list")
    return tuple(_number(v, int if key == "n_list" else float) for v in value)


def preset(kind: str) -> ExperimentConfig:
    """Default configuration of each experiment kind."""
    if kind == "deterministic":
        return ExperimentConfig()
    if kind == "stochastic":
        return ExperimentConfig(
            kernel=KernelSpec.matern(2.5, 1), n_list=(100, 200, 400, 800),
            noise_sd=0.1, replicates=50,
        )
    if kind == "gp-baseline":
        return ExperimentConfig(n_list=(50, 100, 200), replicates=200)
    if kind == "power-rate":
        return ExperimentConfig()
    raise ParameterError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}")


# --- test functions -----------------------------------------------------------


def cauchy_density(x, m: float, s: float):
    """Cauchy density with location ``m`` and scale ``s``."""
    if not s > 0:
        raise ParameterError(f"spread must be positive, got {s}")
    z = (np.asarray(x, dtype=float) - m) / s
    out = 1.0 / (np.pi * s * (1.0 + z * z))
    return out if out.ndim else float(out)


def test_function_gramacy(x):
    """``sin(4x) - 0.02 * cauchy(x; 1.57, 0.05)`` on ``[0, 1]``."""
    x = np.asarray(x, dtype=float)
    out = np.sin(4.0 * x) - 0.02 * cauchy_density(x, 1.57, 0.05)
    return out if np.ndim(out) else float(out)


class EdgeWitness:
    """Cosine series whose smoothness sits just above the native space order.

    ``g(t) = scale * sum_k k^{-(nu + 1/2 + excess)} cos(pi k t + phi_k)`` with
    golden-ratio phases. Its Sobolev norm of order ``nu`` is finite but only
    barely, so it behaves like a hard member of the native space. Points in
    ``d > 1`` dimensions are mapped to the mean of their coordinates.
    """

    def __init__(self, smoothness: float, excess: float = 0.1, terms: int = 2000, scale: float = 1.0):
        self.smoothness = smoothness
        self.excess = excess
        self.terms = terms
        self.scale = scale
        k = np.arange(1, terms + 1, dtype=float)
        self._freq = np.pi * k
        self._phase = 2.0 * np.pi * np.mod(k * 0.6180339887498949, 1.0)
        self._amp = k ** (-(smoothness + 0.5 + excess))

    def scaled(self, scale: float) -> "EdgeWitness":
        return EdgeWitness(self.smoothness, self.excess, self.terms, scale)

    def __call__(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        t = arr.mean(axis=1) if arr.ndim == 2 else arr.ravel()
        out = np.empty(t.shape)
        for start in range(0, t.size, 256):
            block = t[start:start + 256]
            out[start:start + 256] = np.cos(np.outer(block, self._freq) + self._phase) @ self._amp
        return self.scale * out


def _reference_grid(m_points: int, d: int):
    per_axis = max(2, round(m_points ** (1.0 / d)))
    return grid_design(per_axis**d, d)


def estimate_reference_norm_constant(f, kernel: KernelSpec, m_points: int = 1000,
                                     jitter: float = 1e-8) -> float:
    """``2 * Y^T R^{-1} Y`` for ``f`` observed on a grid of ``m_points`` points.

    Half of this value estimates the squared native norm of ``f`` from below.
    """
    if m_points < 2:
        raise ParameterError("m_points must be at least 2")
    ref = _reference_grid(m_points, kernel.dim)
    y = np.asarray(f(ref.points if kernel.dim > 1 else ref.points[:, 0]), dtype=float).ravel()
    L, _ = factorize(build_correlation_matrix(ref, kernel), 0.0, jitter)
    return float(2.0 * y @ cho_solve((L, True), y, check_finite=False))


def _as_input(points: np.ndarray):
    return points[:, 0] if points.shape[1] == 1 else points


def _resolve_function(config: ExperimentConfig, default: str):
    name = default if config.test_function == "auto" else config.test_function
    if name == "gramacy":
        if config.kernel.dim != 1:
            raise ParameterError("the Gramacy-type test function is one-dimensional")
        return name, test_function_gramacy, None
    raw = EdgeWitness(config.kernel.smoothness, config.witness_excess, config.witness_terms)
    norm2 = estimate_reference_norm_constant(raw, config.kernel, config.reference_points, config.jitter) / 2
    scale = math.sqrt(config.witness_norm / norm2)
    return name, raw.scaled(scale), scale


def _build_function(config: ExperimentConfig, scale):
    if scale is None:
        return test_function_gramacy
    return EdgeWitness(config.kernel.smoothness, config.witness_excess, config.witness_terms, scale)


# --- results ------------------------------------------------------------------


@dataclass
class Table:
    columns: list[str]
    rows: list[list]

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


@dataclass
class ExperimentResult:
    kind: str
    config: ExperimentConfig
    tables: dict[str, Table]
    summary: dict
    reports: dict[str, ReliabilityReport] = field(default_factory=dict)
    plots: list[dict] = field(default_factory=list)


def _parallel_map(func, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def _inversions(values) -> int:
    return sum(1 for a, b in zip(values, values[1:]) if b <= a)


# --- deterministic case -------------------------------------------------------


def run_deterministic_experiment(config: ExperimentConfig | None = None, workers: int = 1) -> ExperimentResult:
    """Interpolate on grids and score the band under three variance choices.

    Panels: 1 and 2 use the likelihood estimate ``Y^T R^{-1} Y / n``, panel 3
    the constant ``C = 2 Y~^T R~^{-1} Y~`` from a reference grid, panel 4 the
    unscaled ``Y^T R^{-1} Y``.
    """
    config = config or preset("deterministic")
    if config.noise_sd != 0:
        raise ParameterError("the deterministic experiment needs noise_sd = 0")
    name, f, scale = _resolve_function(config, "gramacy")
    C = estimate_reference_norm_constant(f, config.kernel, config.reference_points, config.jitter)
    cfg = config.to_dict()
    rows = _parallel_map(_deterministic_cell, [(cfg, scale, C, n) for n in config.n_list], workers)

    ns = list(config.n_list)
    mle_E = [r["mle"]["E"] for r in rows]
    report = ReliabilityReport(config.p, list(zip(ns, mle_E)), rows[-1]["mle"]["ratios"])
    bound = 1.0 / (2.0 * normal_quantile(1 - config.beta / 2))
    l3 = [r["constant"]["max_ratio"] for r in rows]
    l4 = [r["unscaled"]["max_ratio"] for r in rows]
    l4_big = [v for n, v in zip(ns, l4) if n >= 100]
    l4_fit = _safe_slope(ns, l4)
    e4_fit = _safe_slope(ns, [r["unscaled"]["E"] for r in rows])
    s2n = [r["mle"]["sigma2"] * n for n, r in zip(ns, rows)]

    tables = {
        "panel1": Table(["n", "E", "sigma2_hat", "coverage"],
                        [[n, r["mle"]["E"], r["mle"]["sigma2"], r["mle"]["coverage"]] for n, r in zip(ns, rows)]),
        "panel3": Table(["n", "E", "max_ratio", "coverage"],
                        [[n, r["constant"]["E"], r["constant"]["max_ratio"], r["constant"]["coverage"]]
                         for n, r in zip(ns, rows)]),
        "panel4": Table(["n", "E", "max_ratio", "coverage", "sigma2_hat"],
                        [[n, r["unscaled"]["E"], r["unscaled"]["max_ratio"], r["unscaled"]["coverage"],
                          r["unscaled"]["sigma2"]] for n, r in zip(ns, rows)]),
        "fit": Table(["n", "jitter_used", "sigma2_hat_times_n", "max_abs_error"],
                     [[n, r["jitter"], s, r["max_err"]] for n, r, s in zip(ns, rows, s2n)]),
    }
    summary = {
        "test_function": name,
        "constant_C": C,
        "native_norm_sq_estimate": C / 2,
        "panel2_slope": report.slope,
        "panel2_intercept": report.intercept,
        "panel2_r2": report.r2,
        "infinite_ratio_count": report.infinite_ratio_count,
        "panel1_inversions": _inversions(mle_E),
        "panel3_bound": bound,
        "panel3_max_ratio": max(l3),
        "panel4_max_ratio_n_ge_100": max(l4_big) if l4_big else None,
        "panel4_max_ratio_slope": l4_fit,
        "panel4_E_slope": e4_fit,
        "max_sigma2_hat_times_n": max(s2n),
        "flags": {
            "panel2_slope_in_1.3_1.8": report.slope is not None and 1.3 <= report.slope <= 1.8,
            "panel2_slope_at_least_1": report.slope is not None and report.slope >= 1.0,
            "panel1_increasing": _inversions(mle_E) <= 1,
            "panel3_bounded": max(l3) <= bound + 1e-6,
            "panel4_bounded": all(v <= 1.0 for v in l4_big) and (l4_fit is None or l4_fit <= 0.1),
            "sigma2_decay": all(s <= (C / 2) * (1 + 1e-6) for s in s2n),
        },
    }
    plots = [
        {"table": "panel1", "x": "n", "y": "E", "title": "Panel 1: E under the MLE variance"},
        {"report": "panel2", "title": "Panel 2: log E against log n", "log": True},
        {"table": "panel3", "x": "n", "y": "max_ratio", "title": "Panel 3: sup ratio, constant variance"},
        {"table": "panel4", "x": "n", "y": "max_ratio", "title": "Panel 4: sup ratio, unscaled variance"},
    ]
    return ExperimentResult("deterministic", config, tables, summary, {"panel2": report}, plots)


def _safe_slope(ns, values):
    pairs = [(n, v) for n, v in zip(ns, values) if 0 < v < math.inf]
    return loglog_slope(*zip(*pairs))[0] if len(pairs) >= 3 else None


def _deterministic_cell(task):
    cfg, scale, C, n = task
    config = ExperimentConfig.from_dict(cfg)
    f = _build_function(config, scale)
    kernel = config.kernel
    design = grid_design(n, kernel.dim, config.grid_endpoints)
    y = f(_as_input(design.points))
    xe = halton_points(config.eval_points, kernel.dim)
    fe = f(_as_input(xe))
    R = build_correlation_matrix(design, kernel)
    cross = cross_correlation(xe, design.points, kernel)
    out = {}
    for mode, value in (("mle", None), ("constant", C), ("unscaled", None)):
        fc = FitConfig(sigma2=mode, sigma2_value=value, beta=config.beta, jitter=config.jitter)
        model = fit(design, y, kernel, fc, corr=R)
        band = confidence_band(model, xe, cross=cross)
        ratios = pointwise_ratios(fe - band.means, band.widths)
        out[mode] = {
            "E": ratio_metric(fe, band, config.p),
            "max_ratio": float(ratios.max()),
            "coverage": float(np.mean((band.lower <= fe) & (fe <= band.upper))),
            "sigma2": model.sigma2_hat,
            "ratios": ratios,
        }
        out["jitter"] = model.jitter_used
        out["max_err"] = float(np.abs(fe - band.means).max())
    return out


# --- stochastic case ----------------------------------------------------------


def run_stochastic_experiment(config: ExperimentConfig | None = None, workers: int = 1) -> ExperimentResult:
    """Sweep the regularization exponent on noisy data from random designs.

    For each ``n`` and replicate one uniform design and one noise vector are
    drawn and shared by every ``alpha``, so differences between exponents are
    not blurred by independent sampling noise. Errors and ratios are averaged
    over the Halton evaluation set; the ratio uses the band half-width.
    """
    config = config or preset("stochastic")
    if config.mu_c <= 0:
        raise ParameterError("the stochastic experiment needs noise_sd > 0 or a positive mu_const")
    name, _, scale = _resolve_function(config, "witness")
    cfg = config.to_dict()
    tasks = [
        (cfg, scale, i, start, min(start + _CHUNK, config.replicates))
        for i in range(len(config.n_list))
        for start in range(0, config.replicates, _CHUNK)
    ]
    chunks = _parallel_map(_stochastic_chunk, tasks, workers)
    # cells[(alpha index, n index)] -> list of per-replicate tuples
    cells: dict[tuple[int, int], list] = {}
    for (_, _, i, _, _), chunk in zip(tasks, chunks):
        for per_alpha in chunk:
            for a, vals in enumerate(per_alpha):
                cells.setdefault((a, i), []).append(vals)

    alphas = config.alphas
    rows = []
    stats: dict[int, dict[str, list[float]]] = {}
    for a, alpha in enumerate(alphas):
        for i, n in enumerate(config.n_list):
            arr = np.array(cells[(a, i)], dtype=float)
            mean = arr.mean(axis=0)
            se = arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0]) if arr.shape[0] > 1 else np.zeros(5)
            stats_row = [float(v) for k in range(4) for v in (mean[k], se[k])]
            rows.append([alpha, n, *stats_row, int(arr[:, 4].sum())])
            s = stats.setdefault(a, {"err": [], "ratio": [], "errmax": []})
            s["err"].append(mean[0])
            s["ratio"].append(mean[1])
            s["errmax"].append(mean[3])

    d, nu = config.kernel.dim, config.kernel.smoothness
    a_star = d / (2 * nu + d)
    slopes = {a: _safe_slope(config.n_list, s["err"]) for a, s in stats.items()}
    summary = {
        "test_function": name,
        "witness_scale": scale,
        "mu_const": config.mu_c,
        "optimal_alpha": a_star,
        "optimal_error_slope": -2 * nu / (2 * nu + d),
        "error_slopes": {_alpha_key(alphas[a]): v for a, v in slopes.items()},
        "ratio_slopes": {_alpha_key(alphas[a]): _safe_slope(config.n_list, s["ratio"]) for a, s in stats.items()},
        "sup_error_slopes": {_alpha_key(alphas[a]): _safe_slope(config.n_list, s["errmax"])
                             for a, s in stats.items()},
        "flags": {},
    }
    flags = summary["flags"]
    if config.noise_sd == 0:
        # noiseless data: the squared sup error decays at least like this power of n
        rate = 1 - d / (2 * nu)
        bounds = {a: max((alpha - 1) * rate, -rate) for a, alpha in enumerate(alphas)}
        summary["noise_free_bound_slopes"] = {_alpha_key(alphas[a]): b for a, b in bounds.items()}
        for a, b in bounds.items():
            got = summary["sup_error_slopes"][_alpha_key(alphas[a])]
            flags[f"alpha_{_alpha_key(alphas[a])}_noise_free_decay"] = got is not None and got <= b + 0.25
    idx = {round(alpha, 12): a for a, alpha in enumerate(alphas)}
    star = idx.get(round(a_star, 12))
    if star is not None:
        last = [stats[a]["err"][-1] for a in range(len(alphas))]
        flags["optimal_alpha_smallest_error"] = int(np.argmin(last)) == star
        if slopes[star] is not None:
            flags["optimal_error_slope_within_0.25"] = abs(slopes[star] + 2 * nu / (2 * nu + d)) <= 0.25
        big = idx.get(0.8)
        if big is not None and slopes[big] is not None and slopes[star] is not None:
            flags["alpha_0.8_slope_shallower_by_0.1"] = slopes[big] >= slopes[star] + 0.1
    if 0.8 in idx:
        r = stats[idx[0.8]]["ratio"]
        flags["alpha_0.8_ratio_increasing"] = all(b > a for a, b in zip(r, r[1:]))
    if 0.0 in idx:
        r = stats[idx[0.0]]["ratio"]
        flags["alpha_0_ratio_within_x2"] = max(r) <= 2 * min(r)

    columns = ["alpha", "n", "err2_mean", "err2_se", "ratio2_mean", "ratio2_se",
               "width2_mean", "width2_se", "errmax2_mean", "errmax2_se", "infinite_ratio_count"]
    plots = [
        {"table": "stochastic", "x": "n", "y": "err2_mean", "group": "alpha", "log": True,
         "title": "Mean squared L2 error"},
        {"table": "stochastic", "x": "n", "y": "ratio2_mean", "group": "alpha", "log": True,
         "title": "Mean squared L2 ratio"},
    ]
    return ExperimentResult("stochastic", config, {"stochastic": Table(columns, rows)}, summary, {}, plots)


def _alpha_key(alpha: float) -> str:
    return f"{alpha:.6g}"


def _stochastic_chunk(task):
    cfg, scale, i, start, stop = task
    config = ExperimentConfig.from_dict(cfg)
    kernel = config.kernel
    f = _build_function(config, scale)
    n = config.n_list[i]
    xe = halton_points(config.eval_points, kernel.dim)
    fe = f(_as_input(xe))
    out = []
    for rep in range(start, stop):
        rng = np.random.default_rng(np.random.SeedSequence([config.master_seed, i, rep]))
        design = uniform_random_design(n, kernel.dim, rng=rng)
        y = f(_as_input(design.points)) + config.noise_sd * rng.standard_normal(n)
        R = build_correlation_matrix(design, kernel)
        cross = cross_correlation(xe, design.points, kernel)
        per_alpha = []
        for alpha in config.alphas:
            fc = FitConfig(mu_c=config.mu_c, mu_alpha=alpha, beta=config.beta, jitter=config.jitter)
            band = confidence_band(fit(design, y, kernel, fc, corr=R), xe, cross=cross)
            err = fe - band.means
            ratios = pointwise_ratios(err, band.half_widths)
            finite = np.isfinite(ratios)
            per_alpha.append((
                float(np.mean(err**2)),
                float(np.mean(ratios[finite] ** 2)) if finite.any() else math.inf,
                float(np.mean(band.widths**2)),
                float(np.max(err**2)),
                int((~finite).sum()),
            ))
        out.append(per_alpha)
    return out


# --- Gaussian-process baseline ------------------------------------------------


def run_gp_baseline(config: ExperimentConfig | None = None, workers: int = 1) -> ExperimentResult:
    """Ratio metric when the data really are a GP path and the band uses the true variance.

    Values at the design are drawn from ``N(0, sigma2 (R + jitter I))`` and the
    evaluation values from the exact conditional law given them. The band
    uses ``sigma2`` itself, so ``E^{1/p}`` should stay flat in ``n``.
    """
    config = config or preset("gp-baseline")
    if config.noise_sd != 0:
        raise ParameterError("the GP baseline needs noise_sd = 0")
    cfg = config.to_dict()
    tasks = [
        (cfg, i, start, min(start + _CHUNK, config.replicates))
        for i in range(len(config.n_list))
        for start in range(0, config.replicates, _CHUNK)
    ]
    chunks = _parallel_map(_baseline_chunk, tasks, workers)
    per_n: dict[int, list] = {}
    for (_, i, _, _), chunk in zip(tasks, chunks):
        per_n.setdefault(i, []).extend(chunk)

    rows = []
    by_p: dict[float, list[float]] = {}
    for i, n in enumerate(config.n_list):
        arr = np.array(per_n[i], dtype=float)
        for j, p in enumerate(config.p_list):
            mean = float(arr[:, j].mean())
            se = float(arr[:, j].std(ddof=1) / math.sqrt(arr.shape[0])) if arr.shape[0] > 1 else 0.0
            root = mean ** (1.0 / p)
            rows.append([n, p, root, mean, se, float(arr[:, -1].mean())])
            by_p.setdefault(p, []).append(root)
    spread = {f"{p:g}": (max(v) / min(v) if min(v) > 0 else math.inf) for p, v in by_p.items()}
    flags = {f"p{key}_spread_below_1.5": s < 1.5 for key, s in spread.items()}
    flags.update({f"p{p:g}_finite_positive": all(0 < x < math.inf for x in v) for p, v in by_p.items()})
    summary = {"gp_variance": config.gp_variance, "spread": spread, "flags": flags}
    columns = ["n", "p", "E_root", "E_mean", "E_se", "coverage_mean"]
    plots = [{"table": "gp_baseline", "x": "n", "y": "E_root", "group": "p",
              "title": "E^(1/p) with the true variance"}]
    return ExperimentResult("gp-baseline", config, {"gp_baseline": Table(columns, rows)}, summary, {}, plots)


def _baseline_chunk(task):
    cfg, i, start, stop = task
    config = ExperimentConfig.from_dict(cfg)
    kernel = config.kernel
    n = config.n_list[i]
    design = grid_design(n, kernel.dim, config.grid_endpoints) if kernel.dim == 1 else halton_design(n, kernel.dim)
    xe = halton_points(config.eval_points, kernel.dim)
    fc = FitConfig(sigma2="constant", sigma2_value=config.gp_variance, beta=config.beta, jitter=config.jitter)
    R = build_correlation_matrix(design, kernel)
    # zero data give the factor and band; the band does not depend on the data
    base = fit(design, np.zeros(n), kernel, fc, corr=R)
    cross = cross_correlation(xe, design.points, kernel)
    band0 = confidence_band(base, xe, cross=cross)
    factor = conditional_factor(base, xe)
    sd = math.sqrt(config.gp_variance)
    out = []
    for rep in range(start, stop):
        rng = np.random.default_rng(np.random.SeedSequence([config.master_seed, i, rep]))
        y = sd * (base.chol @ rng.standard_normal(n))
        model = fit(design, y, kernel, fc, corr=R)
        means = cross @ model.dual_weights
        truth = means + sd * (factor @ rng.standard_normal(factor.shape[1]))
        band = dataclasses.replace(band0, means=means)
        vals = [ratio_metric(truth, band, p) for p in config.p_list]
        vals.append(float(np.mean((band.lower <= truth) & (truth <= band.upper))))
        out.append(vals)
    return out


# --- power-function rate ------------------------------------------------------


def run_power_rate_study(config: ExperimentConfig | None = None, workers: int = 1) -> ExperimentResult:
    """Decay of the sup power function over one-dimensional grids.

    The supremum is probed at eight points inside the first and last grid
    cells, where the power function peaks. Values are computed in extended
    precision on the nearest ``power_neighbors`` design points; a
    double-precision column with jitter is kept for comparison.
    """
    config = config or preset("power-rate")
    if config.kernel.dim != 1:
        raise ParameterError("the power-rate study runs on one-dimensional grids")
    cfg = config.to_dict()
    rows = _parallel_map(_power_cell, [(cfg, n) for n in config.n_list], workers)
    ns = list(config.n_list)
    precise = [r[1] for r in rows]
    slope, intercept, r2 = loglog_slope(ns, precise) if len(ns) >= 3 else (None, None, None)
    target = -config.kernel.smoothness / config.kernel.dim + 0.5
    summary = {
        "slope": slope,
        "intercept": intercept,
        "r2": r2,
        "predicted_slope": target,
        "double_precision_slope": _safe_slope(ns, [r[2] for r in rows]),
        "flags": {"slope_within_0.4": slope is not None and abs(slope - target) <= 0.4},
    }
    table = Table(["n", "sup_power", "sup_power_double"], [list(r) for r in rows])
    plots = [{"table": "power_rate", "x": "n", "y": "sup_power", "log": True,
              "title": "Sup power function against n"}]
    return ExperimentResult("power-rate", config, {"power_rate": table}, summary, {}, plots)


def boundary_cell_probes(design, count: int = 8) -> list[tuple[Fraction]]:
    """``count`` midpoints of equal slices of the first and last cells of a 1-d grid."""
    m = design.levels
    den = m - 1 if design.endpoints else m + 1
    lo = Fraction(0 if design.endpoints else 1, den)
    width = Fraction(1, den)
    first = [lo + width * Fraction(2 * i + 1, 2 * count) for i in range(count)]
    return [(t,) for t in first] + [(1 - t,) for t in first]


def _power_cell(task):
    cfg, n = task
    config = ExperimentConfig.from_dict(cfg)
    design = grid_design(n, 1, config.grid_endpoints)
    probes = boundary_cell_probes(design)
    precise = sup_power_precise(design, config.kernel, probes, config.power_neighbors, config.power_dps)
    model = fit(design, np.zeros(n), config.kernel, FitConfig(jitter=config.jitter))
    double = sup_power(model, np.array([[float(p[0])] for p in probes]))
    return n, precise, double


# --- dispatch and output ------------------------------------------------------

_RUNNERS = {
    "deterministic": run_deterministic_experiment,
    "stochastic": run_stochastic_experiment,
    "gp-baseline": run_gp_baseline,
    "power-rate": run_power_rate_study,
}


def run_experiment(kind: str, config: ExperimentConfig | None = None, workers: int = 1) -> ExperimentResult:
    if kind not in _RUNNERS:
        raise ParameterError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}")
    return _RUNNERS[kind](config or preset(kind), workers)


def jsonable(obj):
    """Replace non-finite floats by strings and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_result(result: ExperimentResult, directory) -> Path:
    """Write ``config.json``, one CSV per table, ``summary.json`` and SVG panels."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(jsonable(result.config.to_dict()), indent=2, sort_keys=True) + "\n")
    for name, table in result.tables.items():
        with (out / f"{name}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([_cell(v) for v in row])
    for name, report in result.reports.items():
        report.write(out / f"{name}.csv", out / f"{name}.json")
    summary = {"kind": result.kind, **result.summary}
    (out / "summary.json").write_text(json.dumps(jsonable(summary), indent=2, sort_keys=True) + "\n")
    for k, spec in enumerate(result.plots, start=1):
        if "report" in spec:
            name = spec["report"]
            rep = result.reports[name]
            svg.emit_svg_panel(rep, out / f"{name}.svg", title=spec["title"], log=True)
            continue
        table = result.tables[spec["table"]]
        series = _series(table, spec)
        fname = spec["table"] if sum(1 for s in result.plots if s.get("table") == spec["table"]) == 1 \
            else f"{spec['table']}_{spec['y']}"
        svg.emit_svg_panel(series, out / f"{fname}.svg", title=spec["title"],
                           xlabel=spec["x"], ylabel=spec["y"], log=spec.get("log", False))
    return out


def _series(table: Table, spec: dict):
    xs = table.column(spec["x"])
    ys = table.column(spec["y"])
    if "group" not in spec:
        return {"": list(zip(xs, ys))}
    groups: dict[str, list] = {}
    for g, x, y in zip(table.column(spec["group"]), xs, ys):
        groups.setdefault(f"{spec['group']}={g:.4g}", []).append((x, y))
    return groups
