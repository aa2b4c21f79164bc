"""Error-to-width ratio metrics, coverage and log-log rate fits."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, ParameterError

__all__ = [
    "ReliabilityReport",
    "acp",
    "coverage_rate",
    "loglog_slope",
    "pointwise_ratios",
    "ratio_metric",
]


def _pair(true_values, means) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(true_values, dtype=float).ravel()
    b = np.asarray(means, dtype=float).ravel()
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.size} true values vs {b.size} band points")
    return a, b


def pointwise_ratios(errors, widths) -> np.ndarray:
    """``|err| / width`` with ``0/0 = 0`` and ``+inf`` where only the width vanishes."""
    err, wid = _pair(np.abs(errors), widths)
    if (wid < 0).any():
        raise InputError("widths must be nonnegative")
    out = np.zeros_like(err)
    pos = wid > 0
    out[pos] = err[pos] / wid[pos]
    out[~pos & (err > 0)] = np.inf
    return out


def ratio_metric(true_values, band, p: float = 4) -> float:
    """Mean of ``(|f - mean| / full width)^p``, or the maximum ratio for ``p = inf``.

    ``band`` is a :class:`~kriging_reliability.gp.PredictionBand` (or anything
    with ``means`` and ``widths``). A nonzero error at a zero-width point makes
    the result ``inf``; callers can count those with :func:`pointwise_ratios`.
    """
    if not (p == math.inf or p >= 2):
        raise ParameterError(f"p must be >= 2 or inf, got {p}")
    truth, means = _pair(true_values, band.means)
    ratios = pointwise_ratios(truth - means, band.widths)
    if ratios.size == 0:
        raise InputError("no evaluation points")
    if p == math.inf:
        return float(ratios.max())
    return float(np.mean(ratios**p))


def coverage_rate(true_values, band) -> float:
    """Fraction of points with ``lo <= f(x) <= hi``."""
    truth, lo = _pair(true_values, band.lower)
    hi = np.asarray(band.upper, dtype=float).ravel()
    if truth.size == 0:
        raise InputError("no evaluation points")
    return float(np.mean((lo <= truth) & (truth <= hi)))


def acp(true_values_at_design, band_at_design) -> float:
    """Average coverage over the design points themselves.

    This is the empirical counterpart of the average coverage probability; for
    a noiseless interpolant it is 1 because the band collapses onto the data.
    """
    return coverage_rate(true_values_at_design, band_at_design)


def loglog_slope(ns, values) -> tuple[float, float, float]:
    """Least-squares fit ``log E = slope * log n + intercept``.

    Returns ``(slope, intercept, r2)``; ``r2`` is 1 when ``E`` is exactly
    constant, since there is nothing left to explain.
    """
    x = np.asarray(ns, dtype=float).ravel()
    y = np.asarray(values, dtype=float).ravel()
    if x.shape != y.shape:
        raise InputError("ns and values differ in length")
    if x.size < 3:
        raise InputError("a slope needs at least three points")
    if not (np.isfinite(y).all() and (y > 0).all() and (x > 0).all()):
        raise InputError("values must be finite and positive")
    lx, ly = np.log(x), np.log(y)
    mx, my = lx.mean(), ly.mean()
    sxx = np.sum((lx - mx) ** 2)
    if sxx == 0:
        raise InputError("ns must not all be equal")
    slope = float(np.sum((lx - mx) * (ly - my)) / sxx)
    intercept = float(my - slope * mx)
    ss_tot = float(np.sum((ly - my) ** 2))
    ss_res = float(np.sum((ly - intercept - slope * lx) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


@dataclass
class ReliabilityReport:
    """Ratio metric ``E`` per design size and its log-log trend.

    Rows with an infinite ``E`` stay in ``rows`` but are left out of the fit.
    """

    p: float
    rows: list[tuple[int, float]]
    ratio_samples: np.ndarray | None = None
    slope: float | None = field(default=None, init=False)
    intercept: float | None = field(default=None, init=False)
    r2: float | None = field(default=None, init=False)
    infinite_ratio_count: int = field(default=0, init=False)

    def __post_init__(self):
        self.rows = sorted((int(n), float(e)) for n, e in self.rows)
        if any(e < 0 or math.isnan(e) for _, e in self.rows):
            raise InputError("E values must be nonnegative")
        finite = [(n, e) for n, e in self.rows if math.isfinite(e) and e > 0]
        self.infinite_ratio_count = sum(1 for _, e in self.rows if math.isinf(e))
        if len(finite) >= 3:
            self.slope, self.intercept, self.r2 = loglog_slope(*zip(*finite))

    @property
    def ns(self) -> list[int]:
        return [n for n, _ in self.rows]

    @property
    def values(self) -> list[float]:
        return [e for _, e in self.rows]

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "infinite_ratio_count": self.infinite_ratio_count,
        }

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "E", "log_n", "log_E"])
            for n, e in self.rows:
                log_e = math.log(e) if 0 < e < math.inf else (math.inf if e > 0 else -math.inf)
                writer.writerow([n, repr(e), repr(math.log(n)), repr(log_e)])

    def write(self, csv_path, json_path=None) -> None:
        """Write the table and, next to it, the one-line JSON summary."""
        self.to_csv(csv_path)
        json_path = Path(json_path) if json_path else Path(csv_path).with_suffix(".json")
        json_path.write_text(json.dumps(self.summary(), sort_keys=True) + "\n")
