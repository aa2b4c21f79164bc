"""Stationary correlation functions and the special functions behind them.

Two isotropic families are supported:

* Matérn, in the reparametrized form with the scale fixed so that the
  spectral density is proportional to ``(1 + |w|^2)^(-nu)``::

      psi(r) = r^s K_s(r) / (Gamma(s) 2^(s-1)),   s = nu - d/2

* generalized Wendland, compactly supported on ``[0, 1)``::

      psi(r) = 1/B(2k, mu+1) * int_r^1 u (u^2 - r^2)^(k-1) (1-u)^mu du

Every function here is pure; array arguments are evaluated elementwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from statistics import NormalDist

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import DomainError, InputError, ParameterError

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "bessel_k",
    "correlation",
    "correlation_mp",
    "generalized_wendland_corr",
    "matern_corr",
    "matern_spectral_density",
    "normal_cdf",
    "normal_quantile",
]

# Below this lag the Matérn value is returned as exactly 1 (r^s K_s(r) is 0*inf).
SMALL_LAG = 1e-10

_STANDARD_NORMAL = NormalDist()


class KernelFamily(str, enum.Enum):
    MATERN = "matern"
    GENERALIZED_WENDLAND = "generalized-wendland"


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of an isotropic correlation function on ``R^dim``.

    ``nu`` is the Sobolev smoothness of the Matérn native space (the Bessel
    order is ``nu - dim/2``). ``kappa`` and ``mu_gw`` parametrize the
    generalized Wendland family and are ignored for Matérn.
    """

    family: KernelFamily = KernelFamily.MATERN
    nu: float | None = 3.5
    dim: int = 1
    kappa: float | None = None
    mu_gw: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ParameterError(f"dim must be a positive integer, got {self.dim!r}")
        if self.family is KernelFamily.MATERN:
            if self.nu is None or not math.isfinite(self.nu):
                raise ParameterError("Matérn kernel requires a finite nu")
            if self.nu <= self.dim / 2:
                raise ParameterError(
                    f"Matérn smoothness must satisfy nu > d/2; got nu={self.nu}, d={self.dim}"
                )
        else:
            if self.kappa is None or self.mu_gw is None:
                raise ParameterError("generalized Wendland kernel requires kappa and mu_gw")
            if not self.kappa > 0:
                raise ParameterError(f"kappa must be positive, got {self.kappa}")
            bound = (self.dim + 1) / 2 + self.kappa
            if self.mu_gw < bound:
                raise ParameterError(
                    f"mu_gw must be >= (d+1)/2 + kappa = {bound}, got {self.mu_gw}"
                )

    @classmethod
    def matern(cls, nu: float, dim: int = 1) -> "KernelSpec":
        return cls(KernelFamily.MATERN, nu=nu, dim=dim)

    @classmethod
    def wendland(cls, kappa: float, mu_gw: float, dim: int = 1) -> "KernelSpec":
        return cls(KernelFamily.GENERALIZED_WENDLAND, nu=None, dim=dim, kappa=kappa, mu_gw=mu_gw)

    @property
    def bessel_order(self) -> float:
        """Order ``nu - d/2`` of the Bessel function in the Matérn form."""
        if self.family is not KernelFamily.MATERN:
            raise ParameterError("bessel_order is defined for Matérn kernels only")
        return self.nu - self.dim / 2

    @property
    def smoothness(self) -> float:
        """Sobolev order of the native space.

        For generalized Wendland this is ``kappa + (d+1)/2``, the decay
        exponent of its spectral density.
        """
        if self.family is KernelFamily.MATERN:
            return float(self.nu)
        return float(self.kappa + (self.dim + 1) / 2)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["family"] = self.family.value
        if self.family is KernelFamily.MATERN:
            del out["kappa"], out["mu_gw"]
        else:
            del out["nu"]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        data = dict(data)
        family = KernelFamily(data.pop("family", KernelFamily.MATERN))
        if family is KernelFamily.MATERN:
            data.setdefault("nu", 3.5)
        else:
            data.setdefault("nu", None)
        return cls(family=family, **data)


def _as_lags(r) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if np.isnan(arr).any():
        raise InputError("lag contains NaN")
    if (arr < 0).any():
        raise DomainError("lags must be nonnegative")
    return arr


def _half_integer_k(m: int, r: np.ndarray) -> np.ndarray:
    # K_{m+1/2}(r) = sqrt(pi/(2r)) e^{-r} sum_k (m+k)!/(k!(m-k)!) (2r)^{-k}
    total = np.zeros_like(r)
    inv = 1.0 / (2.0 * r)
    for k in range(m, -1, -1):
        coef = math.factorial(m + k) / (math.factorial(k) * math.factorial(m - k))
        total = total * inv + coef
    return np.sqrt(np.pi / (2.0 * r)) * np.exp(-r) * total


def bessel_k(order: float, r) -> np.ndarray | float:
    """Modified Bessel function of the second kind ``K_order(r)``.

    Half-integer orders use the terminating closed-form sum; all other
    orders go through :func:`scipy.special.kv`.

    Raises
    ------
    DomainError
        If any ``r <= 0`` or ``order < 0``.
    """
    if order < 0:
        raise DomainError(f"order must be nonnegative, got {order}")
    arr = np.asarray(r, dtype=float)
    if np.isnan(arr).any():
        raise InputError("argument contains NaN")
    if (arr <= 0).any():
        raise DomainError("bessel_k requires r > 0")
    twice = 2.0 * order
    if twice == round(twice) and int(round(twice)) % 2 == 1:
        out = _half_integer_k(int(round(order - 0.5)), arr)
    else:
        out = special.kv(order, arr)
    return out if out.ndim else float(out)


def matern_corr(r, spec: KernelSpec):
    """Matérn correlation at lag(s) ``r``; exactly 1 below ``SMALL_LAG``."""
    if spec.family is not KernelFamily.MATERN:
        raise ParameterError("matern_corr requires a Matérn KernelSpec")
    lags = _as_lags(r)
    s = spec.bessel_order
    out = np.ones_like(lags)
    far = lags >= SMALL_LAG
    if far.any():
        x = lags[far]
        log_norm = math.lgamma(s) + (s - 1.0) * math.log(2.0)
        out[far] = np.exp(s * np.log(x) - log_norm) * bessel_k(s, x)
    return out if out.ndim else float(out)


def _wendland_scalar(h: float, kappa: float, mu: float, norm: float) -> float:
    if h >= 1.0:
        return 0.0
    # weight (u-h)^(kappa-1) (1-u)^mu is handled exactly by QUADPACK's 'alg' rule
    val, _ = integrate.quad(
        lambda u: u * (u + h) ** (kappa - 1.0),
        h,
        1.0,
        weight="alg",
        wvar=(kappa - 1.0, mu),
        epsabs=1e-12,
        epsrel=1e-12,
        limit=200,
    )
    return val / norm


def generalized_wendland_corr(r, spec: KernelSpec):
    """Generalized Wendland correlation, identically 0 for ``r >= 1``."""
    if spec.family is not KernelFamily.GENERALIZED_WENDLAND:
        raise ParameterError("generalized_wendland_corr requires a generalized Wendland spec")
    lags = _as_lags(r)
    norm = special.beta(2.0 * spec.kappa, spec.mu_gw + 1.0)
    uniq, inverse = np.unique(lags.ravel(), return_inverse=True)
    vals = np.array([_wendland_scalar(h, spec.kappa, spec.mu_gw, norm) for h in uniq])
    vals[uniq == 0.0] = 1.0
    out = np.clip(vals[inverse].reshape(lags.shape), 0.0, 1.0)
    return out if out.ndim else float(out)


def correlation(r, spec: KernelSpec):
    """Evaluate the correlation function selected by ``spec.family``."""
    if spec.family is KernelFamily.MATERN:
        return matern_corr(r, spec)
    return generalized_wendland_corr(r, spec)


def correlation_mp(r: mpmath.mpf, spec: KernelSpec) -> mpmath.mpf:
    """Arbitrary-precision correlation at a single lag, at the current mp precision."""
    r = mpmath.mpf(r)
    if r == 0:
        return mpmath.mpf(1)
    if spec.family is KernelFamily.MATERN:
        s = mpmath.mpf(spec.nu) - mpmath.mpf(spec.dim) / 2
        return r**s * mpmath.besselk(s, r) / (mpmath.gamma(s) * mpmath.power(2, s - 1))
    if r >= 1:
        return mpmath.mpf(0)
    kappa = mpmath.mpf(spec.kappa)
    mu = mpmath.mpf(spec.mu_gw)
    val = mpmath.quad(lambda u: u * (u * u - r * r) ** (kappa - 1) * (1 - u) ** mu, [r, 1])
    return val / mpmath.beta(2 * kappa, mu + 1)


def matern_spectral_density(w, spec: KernelSpec):
    """Spectral density of the Matérn correlation at frequency magnitude ``w``.

    With the scale fixed as in :func:`matern_corr` this is
    ``pi^(-d/2) Gamma(nu)/Gamma(nu - d/2) (1 + w^2)^(-nu)``, normalised so that
    ``psi(h) = int exp(i w.h) f(w) dw``.
    """
    if spec.family is not KernelFamily.MATERN:
        raise ParameterError("spectral density is implemented for Matérn kernels only")
    freq = _as_lags(w)
    d = spec.dim
    s = spec.bessel_order
    log_const = -0.5 * d * math.log(math.pi) + math.lgamma(s + d / 2) - math.lgamma(s)
    out = np.exp(log_const - spec.nu * np.log1p(freq**2))
    return out if out.ndim else float(out)


def normal_cdf(z):
    z = np.asarray(z, dtype=float)
    out = 0.5 * special.erfc(-z / math.sqrt(2.0))
    return out if out.ndim else float(out)


def normal_quantile(prob: float) -> float:
    """Inverse of the standard normal CDF on ``(0, 1)``."""
    if not 0.0 < prob < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {prob}")
    return _STANDARD_NORMAL.inv_cdf(prob)
