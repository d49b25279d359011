"""Severity and frequency distribution kernel.

Four severity families (LogNormal, LogGamma, GPD, Normal) with a generic
left-truncation wrapper, plus a Poisson frequency model.  The LogGamma uses
the inverted-rate parameterization: if X ~ LogGamma(a, b) then
log(X) ~ Gamma(shape=a, rate=b) with support x >= 1.  Normal is a
diagnostic-only family (light-tailed counterexample); it supports the basic
operations but is excluded from truncation and the reduced-bias estimator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

__all__ = [
    "SeverityFamily",
    "SeverityModel",
    "FrequencyModel",
    "ParameterDomainError",
    "pdf",
    "cdf",
    "quantile",
    "mean",
    "sample",
    "sample_poisson",
]


class ParameterDomainError(ValueError):
    """Parameters outside the family's domain."""


class SeverityFamily(str, enum.Enum):
    LOGNORMAL = "lognormal"
    LOGGAMMA = "loggamma"
    GPD = "gpd"
    NORMAL = "normal"

    @classmethod
    def parse(cls, name: str) -> "SeverityFamily":
        key = name.strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "lognormal": cls.LOGNORMAL,
            "logn": cls.LOGNORMAL,
            "loggamma": cls.LOGGAMMA,
            "logg": cls.LOGGAMMA,
            "gpd": cls.GPD,
            "genpareto": cls.GPD,
            "normal": cls.NORMAL,
            "gaussian": cls.NORMAL,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ParameterDomainError(f"unknown severity family: {name!r}") from None


@dataclass(frozen=True)
class SeverityModel:
    """A two-parameter severity, optionally left-truncated at ``threshold``.

    Parameter meaning by family: LogNormal (mu, sigma), LogGamma (a, b),
    GPD (xi, theta), Normal (mu, sigma).
    """

    family: SeverityFamily
    p1: float
    p2: float
    threshold: float | None = None

    def __post_init__(self):
        validate_params(self.family, self.p1, self.p2)
        if self.threshold is not None:
            if self.family is SeverityFamily.NORMAL:
                raise ParameterDomainError("Normal family does not support truncation")
            if self.family is SeverityFamily.LOGGAMMA and self.threshold < 1.0:
                raise ParameterDomainError("LogGamma support starts at 1; threshold must be >= 1")
            if self.threshold < 0.0:
                raise ParameterDomainError("threshold must be nonnegative")

    @property
    def truncated(self) -> bool:
        return self.threshold is not None

    def base(self) -> "SeverityModel":
        """The same family/parameters without truncation."""
        return SeverityModel(self.family, self.p1, self.p2)

    def support_min(self) -> float:
        if self.threshold is not None:
            return self.threshold
        if self.family is SeverityFamily.LOGGAMMA:
            return 1.0
        if self.family is SeverityFamily.NORMAL:
            return -math.inf
        return 0.0


@dataclass(frozen=True)
class FrequencyModel:
    """Poisson annual loss rate over an observation horizon of ``years``."""

    lam: float
    years: int = 1

    def __post_init__(self):
        if self.lam < 0.0:
            raise ParameterDomainError("lambda must be nonnegative")
        if self.years < 1:
            raise ParameterDomainError("years must be >= 1")

    @property
    def expected_count(self) -> float:
        return self.lam * self.years


def validate_params(family: SeverityFamily, p1: float, p2: float) -> None:
    if not (np.isfinite(p1) and np.isfinite(p2)):
        raise ParameterDomainError("parameters must be finite")
    if p2 <= 0.0:
        raise ParameterDomainError(f"{family.value}: second parameter must be positive")
    if family is SeverityFamily.GPD and p1 < 0.0:
        raise ParameterDomainError("gpd: xi must be >= 0")
    if family is SeverityFamily.LOGGAMMA and p1 <= 0.0:
        raise ParameterDomainError("loggamma: a must be positive")


def params_in_domain(family: SeverityFamily, p1: float, p2: float) -> bool:
    """Domain check that reports instead of raising (used by grid perturbation)."""
    try:
        validate_params(family, p1, p2)
    except ParameterDomainError:
        return False
    return True


# -- base (untruncated) kernels, vectorized over x / p ----------------------

def _base_pdf(family, p1, p2, x):
    x = np.asarray(x, dtype=float)
    if family is SeverityFamily.LOGNORMAL:
        return stats.lognorm.pdf(x, s=p2, scale=math.exp(p1))
    if family is SeverityFamily.GPD:
        return stats.genpareto.pdf(x, c=p1, scale=p2)
    if family is SeverityFamily.NORMAL:
        return stats.norm.pdf(x, loc=p1, scale=p2)
    # LogGamma: f(x) = b^a (log x)^(a-1) / (Gamma(a) x^(b+1)) on x >= 1
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(np.where(x > 1.0, x, np.nan))
        logf = (p1 * math.log(p2) + (p1 - 1.0) * np.log(y)
                - special.gammaln(p1) - (p2 + 1.0) * y)
        out = np.exp(logf)
    return np.where(np.isnan(out), 0.0, out)


def _base_cdf(family, p1, p2, x):
    x = np.asarray(x, dtype=float)
    if family is SeverityFamily.LOGNORMAL:
        return stats.lognorm.cdf(x, s=p2, scale=math.exp(p1))
    if family is SeverityFamily.GPD:
        return stats.genpareto.cdf(x, c=p1, scale=p2)
    if family is SeverityFamily.NORMAL:
        return stats.norm.cdf(x, loc=p1, scale=p2)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(np.clip(x, 1.0, None))
    return special.gammainc(p1, p2 * y)


def _base_sf(family, p1, p2, x):
    x = np.asarray(x, dtype=float)
    if family is SeverityFamily.LOGNORMAL:
        return stats.lognorm.sf(x, s=p2, scale=math.exp(p1))
    if family is SeverityFamily.GPD:
        return stats.genpareto.sf(x, c=p1, scale=p2)
    if family is SeverityFamily.NORMAL:
        return stats.norm.sf(x, loc=p1, scale=p2)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(np.clip(x, 1.0, None))
    return special.gammaincc(p1, p2 * y)


def _base_quantile(family, p1, p2, p):
    p = np.asarray(p, dtype=float)
    if family is SeverityFamily.LOGNORMAL:
        return np.exp(p1 + p2 * special.ndtri(p))
    if family is SeverityFamily.GPD:
        return stats.genpareto.ppf(p, c=p1, scale=p2)
    if family is SeverityFamily.NORMAL:
        return p1 + p2 * special.ndtri(p)
    return np.exp(special.gammaincinv(p1, p) / p2)


# -- public operations ------------------------------------------------------

def pdf(model: SeverityModel, x):
    """Density of ``model`` at ``x``; zero outside the support."""
    x = np.asarray(x, dtype=float)
    base = _base_pdf(model.family, model.p1, model.p2, x)
    if model.threshold is None:
        return base if base.ndim else float(base)
    sf_h = float(_base_sf(model.family, model.p1, model.p2, model.threshold))
    if sf_h <= 0.0:
        raise ParameterDomainError("truncation threshold absorbs the full distribution")
    out = np.where(x > model.threshold, base / sf_h, 0.0)
    return out if out.ndim else float(out)


def cdf(model: SeverityModel, x):
    """CDF of ``model`` at ``x`` (conditional-above-threshold if truncated)."""
    x = np.asarray(x, dtype=float)
    if model.threshold is None:
        out = _base_cdf(model.family, model.p1, model.p2, x)
        return out if out.ndim else float(out)
    sf_h = float(_base_sf(model.family, model.p1, model.p2, model.threshold))
    if sf_h <= 0.0:
        raise ParameterDomainError("truncation threshold absorbs the full distribution")
    sf_x = _base_sf(model.family, model.p1, model.p2, x)
    out = np.where(x <= model.threshold, 0.0, 1.0 - sf_x / sf_h)
    return out if out.ndim else float(out)


def quantile(model: SeverityModel, p):
    """Inverse CDF; for truncated models, the conditional-above-H quantile."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("p must lie strictly inside (0, 1)")
    if model.threshold is None:
        out = _base_quantile(model.family, model.p1, model.p2, p)
        return out if out.ndim else float(out)
    f_h = float(_base_cdf(model.family, model.p1, model.p2, model.threshold))
    if f_h >= 1.0:
        raise ParameterDomainError("truncation threshold absorbs the full distribution")
    out = _base_quantile(model.family, model.p1, model.p2, f_h + p * (1.0 - f_h))
    out = np.maximum(out, model.threshold)
    return out if out.ndim else float(out)


def mean(model: SeverityModel) -> float:
    """Severity mean; ``math.inf`` when the tail is too heavy for a mean."""
    fam, p1, p2, h = model.family, model.p1, model.p2, model.threshold
    if fam is SeverityFamily.LOGNORMAL:
        if h is None:
            return math.exp(p1 + p2 * p2 / 2.0)
        sf_h = float(_base_sf(fam, p1, p2, h))
        num = stats.norm.cdf((p1 + p2 * p2 - math.log(h)) / p2)
        return math.exp(p1 + p2 * p2 / 2.0) * num / sf_h
    if fam is SeverityFamily.GPD:
        if p1 >= 1.0:
            return math.inf
        if h is None:
            return p2 / (1.0 - p1)
        return (h + p2) / (1.0 - p1)
    if fam is SeverityFamily.NORMAL:
        return p1
    # LogGamma
    if p2 <= 1.0:
        return math.inf
    m0 = (p2 / (p2 - 1.0)) ** p1
    if h is None:
        return m0
    tail = special.gammaincc(p1, (p2 - 1.0) * math.log(h))
    sf_h = special.gammaincc(p1, p2 * math.log(h))
    return m0 * tail / sf_h


def tloggamma_mean_forms(a: float, b: float, h: float) -> tuple[float, float]:
    """Both closed-form representations of the truncated LogGamma mean.

    Form 1 goes through the unit-scale Gamma CDF at log(H)*(b-1); form 2
    through the LogGamma survival function with rate b-1.  They are
    algebraically identical and serve as a cross-check.
    """
    if b <= 1.0:
        return math.inf, math.inf
    m0 = (b / (b - 1.0)) ** a
    f_h = special.gammainc(a, b * math.log(h))
    form1 = m0 * (1.0 - stats.gamma.cdf(math.log(h) * (b - 1.0), a)) / (1.0 - f_h)
    base_bm1 = SeverityModel(SeverityFamily.LOGGAMMA, a, b - 1.0)
    form2 = m0 * (1.0 - cdf(base_bm1, h)) / (1.0 - f_h)
    return form1, form2


def tgpd_mean_forms(xi: float, theta: float, h: float) -> tuple[float, float]:
    """Both closed-form representations of the truncated GPD mean."""
    if xi >= 1.0:
        return math.inf, math.inf
    sf_h = float(_base_sf(SeverityFamily.GPD, xi, theta, h))
    if xi == 0.0:
        form1 = theta + h  # exponential memoryless limit
    else:
        form1 = theta / xi * (sf_h ** (-xi) / (1.0 - xi) - 1.0)
    form2 = (h + theta) / (1.0 - xi)
    return form1, form2


def sample(model: SeverityModel, rng: np.random.Generator, count: int) -> np.ndarray:
    """Inverse-CDF sampling; truncation via u' = F(H) + u*(1 - F(H))."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return np.empty(0)
    u = rng.random(count)
    if model.threshold is None:
        return np.asarray(_base_quantile(model.family, model.p1, model.p2, u))
    f_h = float(_base_cdf(model.family, model.p1, model.p2, model.threshold))
    out = _base_quantile(model.family, model.p1, model.p2, f_h + u * (1.0 - f_h))
    return np.maximum(out, np.nextafter(model.threshold, math.inf))


def sample_poisson(freq: FrequencyModel, rng: np.random.Generator) -> int:
    """One draw of the total loss count over the horizon: Poisson(lambda*T)."""
    return int(rng.poisson(freq.expected_count))
