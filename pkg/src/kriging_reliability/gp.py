"""Simple-kriging fits, power functions and pointwise confidence bands.

A fit solves ``(R + (mu + jitter) I) w = Y`` once through a Cholesky factor;
predictions are ``r(x)^T w`` and the band half-width at ``x`` is

    q_{1-beta/2} * sqrt(sigma2_hat * (1 - r(x)^T (R + (mu + jitter) I)^{-1} r(x)))

where ``sigma2_hat`` is chosen by :attr:`FitConfig.sigma2`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist, squareform

from .designs import Design, halton_points
from .errors import ConditioningError, InputError, ModeError, ParameterError
from .kernels import KernelSpec, correlation, correlation_mp, normal_quantile

__all__ = [
    "DEFAULT_JITTER",
    "MAX_JITTER",
    "FitConfig",
    "FittedModel",
    "KernelExpansion",
    "PredictionBand",
    "build_correlation_matrix",
    "confidence_band",
    "cross_correlation",
    "factorize",
    "fit",
    "native_norm_sq_of_interpolant",
    "power_function",
    "power_values_precise",
    "predict_mean",
    "rkhs_function_from_coefficients",
    "sample_conditional_path",
    "sample_gp_path",
    "sup_power",
    "sup_power_precise",
]

DEFAULT_JITTER = 1e-8
MAX_JITTER = 1e-4
# power values in [-POWER_SLACK, 0) are clamped to 0; anything lower is a failure
POWER_SLACK = 1e-8

SIGMA2_MODES = ("mle", "constant", "unscaled")


@dataclass(frozen=True)
class FitConfig:
    """How to regularize the fit and which variance estimate scales the band.

    The regularization is ``mu_hat = mu_c * n**mu_alpha``; ``mu_c = 0`` gives
    interpolation. ``sigma2`` selects ``"mle"`` (``Y^T w / n``), ``"constant"``
    (``sigma2_value``) or ``"unscaled"`` (``Y^T w``).
    """

    mu_c: float = 0.0
    mu_alpha: float = 0.0
    sigma2: str = "mle"
    sigma2_value: float | None = None
    beta: float = 0.05
    jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        if self.mu_c < 0:
            raise ParameterError(f"mu_c must be nonnegative, got {self.mu_c}")
        if not self.mu_alpha < 1:
            raise ParameterError(f"mu_alpha must be < 1, got {self.mu_alpha}")
        if self.sigma2 not in SIGMA2_MODES:
            raise ParameterError(f"sigma2 must be one of {SIGMA2_MODES}, got {self.sigma2!r}")
        if self.sigma2 == "constant" and not (self.sigma2_value and self.sigma2_value > 0):
            raise ParameterError("constant sigma2 mode needs sigma2_value > 0")
        if not 0 < self.beta < 1:
            raise ParameterError(f"beta must lie in (0, 1), got {self.beta}")
        if self.jitter < 0:
            raise ParameterError("jitter must be nonnegative")

    def mu_hat(self, n: int) -> float:
        return 0.0 if self.mu_c == 0 else float(self.mu_c * n**self.mu_alpha)


@dataclass(frozen=True, eq=False)
class FittedModel:
    design: Design
    y: np.ndarray
    kernel: KernelSpec
    config: FitConfig
    mu_hat: float
    jitter_used: float
    chol: np.ndarray
    dual_weights: np.ndarray
    sigma2_hat: float

    @property
    def n(self) -> int:
        return self.design.n


@dataclass(frozen=True, eq=False)
class PredictionBand:
    eval_points: np.ndarray
    means: np.ndarray
    half_widths: np.ndarray
    power_values: np.ndarray

    @property
    def lower(self) -> np.ndarray:
        return self.means - self.half_widths

    @property
    def upper(self) -> np.ndarray:
        return self.means + self.half_widths

    @property
    def widths(self) -> np.ndarray:
        return 2.0 * self.half_widths

    def to_csv(self, path) -> None:
        d = self.eval_points.shape[1]
        xcols = ["x"] if d == 1 else [f"x{i + 1}" for i in range(d)]
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([*xcols, "mean", "lo", "hi", "power"])
            for x, m, lo, hi, pw in zip(
                self.eval_points, self.means, self.lower, self.upper, self.power_values
            ):
                writer.writerow([*(repr(float(v)) for v in x), repr(float(m)),
                                 repr(float(lo)), repr(float(hi)), repr(float(pw))])

    @classmethod
    def from_csv(cls, path) -> "PredictionBand":
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[-4:] != ["mean", "lo", "hi", "power"]:
                raise InputError(f"{path}: expected columns x...,mean,lo,hi,power")
            rows = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        rows = rows.reshape(-1, len(header))
        d = len(header) - 4
        lo, hi = rows[:, d + 1], rows[:, d + 2]
        return cls(rows[:, :d], rows[:, d], (hi - lo) / 2.0, rows[:, d + 3])


def _as_points(x, d: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, 1) if d == 1 else pts.reshape(1, -1)
    if pts.shape[1] != d:
        raise InputError(f"expected points of dimension {d}, got shape {pts.shape}")
    if np.isnan(pts).any():
        raise InputError("evaluation points contain NaN")
    return pts


def build_correlation_matrix(design: Design | np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """Exactly symmetric ``R_jk = psi(|x_j - x_k|)`` with unit diagonal."""
    pts = design.points if isinstance(design, Design) else np.atleast_2d(design)
    if pts.shape[0] == 1:
        return np.ones((1, 1))
    R = squareform(correlation(pdist(pts), kernel))
    np.fill_diagonal(R, 1.0)
    return R


def cross_correlation(x: np.ndarray, centers: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """``(m, n)`` matrix of correlations between rows of ``x`` and ``centers``."""
    return correlation(cdist(x, centers), kernel)


def factorize(R: np.ndarray, mu_hat: float = 0.0, jitter: float = DEFAULT_JITTER,
              max_jitter: float = MAX_JITTER) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``R + (mu_hat + jitter) I``.

    On failure the jitter is raised tenfold (starting from ``DEFAULT_JITTER``
    when it was zero) up to ``max_jitter``. Returns ``(L, jitter_used)``.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise InputError("correlation matrix must be square")
    if not np.array_equal(R, R.T):
        raise InputError("correlation matrix must be symmetric")
    n = R.shape[0]
    eye = np.eye(n)
    level = jitter
    while True:
        try:
            L = linalg.cholesky(R + (mu_hat + level) * eye, lower=True, check_finite=False)
            if np.all(np.isfinite(L)):
                return L, level
        except linalg.LinAlgError:
            pass
        level = level * 10.0 if level > 0 else DEFAULT_JITTER
        if level > max_jitter * (1 + 1e-9):
            raise ConditioningError(
                f"correlation matrix of the {n}-point design is not positive definite "
                f"with jitter up to {max_jitter:g} (mu_hat={mu_hat:g})"
            )


def fit(design: Design, y, kernel: KernelSpec, config: FitConfig | None = None, *,
        corr: np.ndarray | None = None) -> FittedModel:
    """Factorize ``R + (mu_hat + jitter) I`` and solve for the dual weights.

    ``corr`` may carry a precomputed correlation matrix of ``design`` so that
    several fits on one design share it.
    """
    config = config or FitConfig()
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != design.n:
        raise InputError(f"got {y.shape[0]} observations for {design.n} design points")
    if not np.isfinite(y).all():
        raise InputError("observations must be finite")
    if design.d != kernel.dim:
        raise InputError(f"design dimension {design.d} does not match kernel dim {kernel.dim}")
    R = build_correlation_matrix(design, kernel) if corr is None else corr
    mu = config.mu_hat(design.n)
    L, used = factorize(R, mu, config.jitter)
    w = linalg.cho_solve((L, True), y, check_finite=False)
    quad = float(y @ w)
    if config.sigma2 == "mle":
        s2 = quad / design.n
    elif config.sigma2 == "unscaled":
        s2 = quad
    else:
        s2 = float(config.sigma2_value)
    y.setflags(write=False)
    w.setflags(write=False)
    return FittedModel(design, y, kernel, config, mu, used, L, w, max(s2, 0.0))


def predict_mean(model: FittedModel, x) -> np.ndarray:
    pts = _as_points(x, model.design.d)
    return cross_correlation(pts, model.design.points, model.kernel) @ model.dual_weights


def _power_from_cross(model: FittedModel, r: np.ndarray) -> np.ndarray:
    v = linalg.solve_triangular(model.chol, r.T, lower=True, check_finite=False)
    p2 = 1.0 - np.einsum("ij,ij->j", v, v)
    if (p2 < -POWER_SLACK).any():
        raise ConditioningError(
            f"power function reached {p2.min():.3g} on a {model.n}-point design"
        )
    return np.clip(p2, 0.0, None)


def power_function(model: FittedModel, x) -> np.ndarray:
    """Squared power function ``1 - r(x)^T (R + (mu + jitter) I)^{-1} r(x)``."""
    pts = _as_points(x, model.design.d)
    return _power_from_cross(model, cross_correlation(pts, model.design.points, model.kernel))


def default_probes(design: Design, count: int = 512) -> np.ndarray:
    """Halton points plus midpoints between each design point and its nearest neighbour."""
    probes = [halton_points(count, design.d)]
    if design.n > 1:
        if design.d == 1:
            x = np.sort(design.points[:, 0])
            probes.append(((x[1:] + x[:-1]) / 2.0)[:, None])
        else:
            _, idx = cKDTree(design.points).query(design.points, k=2)
            probes.append((design.points + design.points[idx[:, 1]]) / 2.0)
    return np.vstack(probes)


def sup_power(model: FittedModel, probes=None) -> float:
    """Largest power-function value ``sqrt(P^2)`` over a probe set.

    This is a lower bound of the supremum over the whole domain.
    """
    pts = default_probes(model.design) if probes is None else _as_points(probes, model.design.d)
    if pts.shape[0] == 0:
        raise InputError("probe set is empty")
    return float(np.sqrt(power_function(model, pts).max()))


def confidence_band(model: FittedModel, eval_points, *, cross: np.ndarray | None = None) -> PredictionBand:
    """Means, half-widths and power values at ``eval_points``.

    ``cross`` may carry the precomputed ``(m, n)`` cross-correlation matrix.
    """
    pts = _as_points(eval_points, model.design.d)
    r = cross_correlation(pts, model.design.points, model.kernel) if cross is None else cross
    means = r @ model.dual_weights
    p2 = _power_from_cross(model, r)
    q = normal_quantile(1.0 - model.config.beta / 2.0)
    half = q * np.sqrt(model.sigma2_hat * p2)
    return PredictionBand(pts, means, half, p2)


def native_norm_sq_of_interpolant(model: FittedModel) -> float:
    """``Y^T R^{-1} Y``, the squared native norm of the interpolant."""
    if model.mu_hat > 0:
        raise ModeError("native norm of the interpolant needs an interpolating fit (mu_hat = 0)")
    return float(model.y @ model.dual_weights)


class KernelExpansion:
    """Callable ``x -> sum_i c_i psi(x - z_i)``."""

    def __init__(self, centers: np.ndarray, coeffs: np.ndarray, kernel: KernelSpec):
        self.centers = centers
        self.coeffs = coeffs
        self.kernel = kernel

    def __call__(self, x) -> np.ndarray:
        pts = _as_points(x, self.centers.shape[1])
        return cross_correlation(pts, self.centers, self.kernel) @ self.coeffs

    def gram(self) -> np.ndarray:
        return build_correlation_matrix(self.centers, self.kernel)


def rkhs_function_from_coefficients(centers, coeffs, kernel: KernelSpec):
    """Kernel expansion and its exact squared native norm ``c^T R_z c``."""
    z = _as_points(centers, kernel.dim)
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.shape[0] != z.shape[0]:
        raise InputError("need one coefficient per center")
    if np.unique(z, axis=0).shape[0] != z.shape[0]:
        raise InputError("centers must be distinct")
    func = KernelExpansion(z, c, kernel)
    return func, float(c @ func.gram() @ c)


def sample_gp_path(points, kernel: KernelSpec, sigma2: float, seed=None, *,
                   jitter: float = DEFAULT_JITTER, rng=None) -> np.ndarray:
    """Joint draw of ``Z ~ GP(0, sigma2 psi)`` at ``points`` via Cholesky."""
    if not sigma2 > 0:
        raise ParameterError("sigma2 must be positive")
    pts = points.points if isinstance(points, Design) else _as_points(points, kernel.dim)
    if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
        raise InputError("sampling points must be distinct")
    L, _ = factorize(build_correlation_matrix(pts, kernel), 0.0, jitter)
    rng = rng if rng is not None else np.random.default_rng(seed)
    return np.sqrt(sigma2) * (L @ rng.standard_normal(pts.shape[0]))


def conditional_factor(model: FittedModel, eval_points) -> np.ndarray:
    """Square root of the conditional correlation of the process at ``eval_points``.

    The observations are treated as values of the process plus a nugget of
    size ``mu_hat + jitter``, so the marginal variances are the power values.
    Negative eigenvalues from round-off are dropped.
    """
    pts = _as_points(eval_points, model.design.d)
    r = cross_correlation(pts, model.design.points, model.kernel)
    v = linalg.solve_triangular(model.chol, r.T, lower=True, check_finite=False)
    cov = build_correlation_matrix(pts, model.kernel) - v.T @ v
    vals, vecs = linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_conditional_path(model: FittedModel, eval_points, sigma2: float, rng,
                            factor: np.ndarray | None = None) -> np.ndarray:
    """Draw the process at ``eval_points`` given the fitted observations."""
    if factor is None:
        factor = conditional_factor(model, eval_points)
    means = predict_mean(model, eval_points)
    return means + np.sqrt(sigma2) * (factor @ rng.standard_normal(factor.shape[1]))


# --- extended precision -------------------------------------------------------


def _exact_coordinates(design: Design) -> list[tuple[Fraction, ...]]:
    if design.kind == "grid" and design.levels:
        den = design.levels - 1 if design.endpoints else design.levels + 1
        return [tuple(Fraction(round(v * den), den) for v in row) for row in design.points]
    return [tuple(Fraction(float(v)) for v in row) for row in design.points]


def _forward_substitute(L, b):
    k = len(b)
    out = [mpmath.mpf(0)] * k
    for i in range(k):
        acc = b[i]
        for j in range(i):
            acc -= L[i, j] * out[j]
        out[i] = acc / L[i, i]
    return out


def power_values_precise(design: Design, kernel: KernelSpec, probes, neighbors: int = 16,
                         dps: int = 40) -> np.ndarray:
    """Interpolation power function ``P^2(x)`` in ``dps``-digit arithmetic.

    Only the ``neighbors`` design points nearest to each probe enter the
    computation. Dropping points can only increase the power function, so the
    result is an upper bound of the full-design value; the gap closes quickly
    as ``neighbors`` grows. Grid designs are handled on exact rational
    coordinates, and probes given as :class:`fractions.Fraction` stay exact.
    No jitter or regularization is used.
    """
    coords = _exact_coordinates(design)
    probe_list = [tuple(Fraction(v) for v in np.atleast_1d(p)) for p in probes]
    if not probe_list:
        raise InputError("probe set is empty")
    float_probes = np.array([[float(v) for v in p] for p in probe_list])
    k = min(neighbors, design.n)
    _, nearest = cKDTree(design.points).query(float_probes, k=k)
    nearest = np.asarray(nearest).reshape(len(probe_list), k)

    kernel_cache: dict[Fraction, mpmath.mpf] = {}
    factor_cache: dict[tuple[int, ...], mpmath.matrix] = {}

    def psi(a, b):
        d2 = sum((ai - bi) ** 2 for ai, bi in zip(a, b))
        if d2 not in kernel_cache:
            kernel_cache[d2] = correlation_mp(mpmath.sqrt(mpmath.mpf(d2.numerator) / d2.denominator), kernel)
        return kernel_cache[d2]

    out = np.empty(len(probe_list))
    with mpmath.workdps(dps):
        for i, (probe, idx) in enumerate(zip(probe_list, nearest)):
            window = tuple(sorted(int(j) for j in idx))
            if window not in factor_cache:
                R = mpmath.matrix(k, k)
                for a in range(k):
                    for b in range(a, k):
                        R[a, b] = R[b, a] = psi(coords[window[a]], coords[window[b]])
                try:
                    factor_cache[window] = mpmath.cholesky(R)
                except ValueError as exc:
                    raise ConditioningError(
                        f"local correlation matrix not positive definite at {dps} digits"
                    ) from exc
            L = factor_cache[window]
            r = [psi(probe, coords[j]) for j in window]
            v = _forward_substitute(L, r)
            p2 = 1 - mpmath.fsum(vi * vi for vi in v)
            out[i] = max(float(p2), 0.0)
    return out


def sup_power_precise(design: Design, kernel: KernelSpec, probes, neighbors: int = 16,
                      dps: int = 40) -> float:
    """``max sqrt(P^2)`` over ``probes`` computed by :func:`power_values_precise`."""
    return float(np.sqrt(power_values_precise(design, kernel, probes, neighbors, dps).max()))
