"""Maximum likelihood estimation for severity and frequency parameters.

Severity fitting runs a derivative-free simplex search on the negative mean
log-likelihood in an unconstrained reparameterization (log transforms for
scale-like parameters, a softplus map for the GPD shape), with three starting
points.  Truncated fits subtract n*log S(H) from the base log-likelihood and
start from the untruncated solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .distributions import (
    FrequencyModel,
    ParameterDomainError,
    SeverityFamily,
    SeverityModel,
    _base_sf,
)

__all__ = [
    "FitResult",
    "InsufficientDataError",
    "DegenerateSampleError",
    "fit_severity",
    "fit_poisson",
]

_MIN_LOSSES = 10


class InsufficientDataError(ValueError):
    pass


class DegenerateSampleError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    model: SeverityModel
    loglik: float
    n: int
    converged: bool
    iterations: int
    start_point: tuple[float, float]


# -- parameter transforms ---------------------------------------------------

def _softplus(t):
    return np.logaddexp(0.0, t)


def _softplus_inv(x):
    # inverse of log(1 + e^t); x must be > 0
    return x + np.log(-np.expm1(-x)) if x > 1e-10 else math.log(math.expm1(x))


def _to_unconstrained(family, p1, p2):
    if family is SeverityFamily.GPD:
        return np.array([_softplus_inv(max(p1, 1e-8)), math.log(p2)])
    if family is SeverityFamily.LOGGAMMA:
        return np.array([math.log(p1), math.log(p2)])
    return np.array([p1, math.log(p2)])


def _from_unconstrained(family, t):
    if family is SeverityFamily.GPD:
        return float(_softplus(t[0])), math.exp(t[1])
    if family is SeverityFamily.LOGGAMMA:
        return math.exp(t[0]), math.exp(t[1])
    return float(t[0]), math.exp(t[1])


# -- log-likelihood ---------------------------------------------------------

def _mean_loglik(family, p1, p2, losses, log_losses, threshold):
    """Mean log-likelihood of the (possibly truncated) severity."""
    n = losses.size
    if family is SeverityFamily.LOGNORMAL:
        z = (log_losses - p1) / p2
        ll = -np.log(p2) - 0.5 * math.log(2.0 * math.pi) - 0.5 * z * z - log_losses
    elif family is SeverityFamily.NORMAL:
        z = (losses - p1) / p2
        ll = -np.log(p2) - 0.5 * math.log(2.0 * math.pi) - 0.5 * z * z
    elif family is SeverityFamily.LOGGAMMA:
        ll = (p1 * math.log(p2) + (p1 - 1.0) * np.log(log_losses)
              - special.gammaln(p1) - (p2 + 1.0) * log_losses)
    else:  # GPD
        w = 1.0 + p1 * losses / p2
        if np.any(w <= 0.0):
            return -np.inf
        if p1 > 1e-10:
            ll = -math.log(p2) - (1.0 / p1 + 1.0) * np.log(w)
        else:
            ll = -math.log(p2) - losses / p2
    total = float(np.sum(ll)) / n
    if threshold is not None and threshold > 0.0:
        sf_h = float(_base_sf(family, p1, p2, threshold))
        if sf_h <= 0.0:
            return -np.inf
        total -= math.log(sf_h)
    return total


def loglikelihood(model: SeverityModel, losses) -> float:
    """Total log-likelihood of ``losses`` under ``model``."""
    losses = np.asarray(losses, dtype=float)
    log_losses = np.log(np.clip(losses, 1e-300, None))
    return losses.size * _mean_loglik(
        model.family, model.p1, model.p2, losses, log_losses, model.threshold
    )


# -- starting values --------------------------------------------------------

def _start_point(family, losses, log_losses):
    if family is SeverityFamily.LOGNORMAL:
        s = float(np.std(log_losses, ddof=1))
        return float(np.mean(log_losses)), max(s, 1e-3)
    if family is SeverityFamily.NORMAL:
        s = float(np.std(losses, ddof=1))
        return float(np.mean(losses)), max(s, 1e-12)
    if family is SeverityFamily.LOGGAMMA:
        m = float(np.mean(log_losses))
        v = float(np.var(log_losses, ddof=1))
        m = max(m, 1e-6)
        v = max(v, 1e-9)
        return max(m * m / v, 1e-2), max(m / v, 1e-2)
    # GPD: match the q90/q50 quantile ratio, which depends only on xi
    q50, q90 = np.quantile(losses, [0.5, 0.9])
    ratio = q90 / max(q50, 1e-300)

    def ratio_gap(xi):
        return (0.1 ** -xi - 1.0) / (0.5 ** -xi - 1.0) - ratio

    lo, hi = 1e-6, 10.0
    if ratio_gap(lo) * ratio_gap(hi) < 0.0:
        xi0 = float(optimize.brentq(ratio_gap, lo, hi, xtol=1e-6))
    else:
        xi0 = 0.5
    theta0 = q50 * xi0 / (0.5 ** -xi0 - 1.0) if xi0 > 1e-6 else q50 / math.log(2.0)
    return xi0, max(theta0, 1e-6)


# -- fitting ----------------------------------------------------------------

def fit_severity(losses, family: SeverityFamily | str,
                 threshold: float | None = None) -> FitResult:
    """Fit a severity family to losses by (truncation-aware) MLE."""
    if isinstance(family, str):
        family = SeverityFamily.parse(family)
    losses = np.asarray(losses, dtype=float)
    if losses.size < _MIN_LOSSES:
        raise InsufficientDataError(
            f"need at least {_MIN_LOSSES} losses, got {losses.size}"
        )
    if np.ptp(losses) == 0.0:
        raise DegenerateSampleError("all losses are identical")
    support_min = 1.0 if family is SeverityFamily.LOGGAMMA else 0.0
    if family is not SeverityFamily.NORMAL and np.any(losses <= support_min):
        raise ParameterDomainError(
            f"{family.value} losses must exceed {support_min}"
        )
    if threshold is not None:
        if family is SeverityFamily.NORMAL:
            raise ParameterDomainError("Normal family does not support truncation")
        if np.any(losses <= threshold):
            raise ParameterDomainError("all losses must exceed the truncation threshold")

    log_losses = (np.log(losses) if family is not SeverityFamily.NORMAL
                  else np.zeros_like(losses))

    def objective(t):
        p1, p2 = _from_unconstrained(family, t)
        try:
            val = _mean_loglik(family, p1, p2, losses, log_losses, threshold)
        except (FloatingPointError, OverflowError):
            return np.inf
        return -val if np.isfinite(val) else np.inf

    if threshold is not None and threshold > 0.0:
        base = fit_severity(losses, family, threshold=None)
        center = (base.model.p1, base.model.p2)
    else:
        center = _start_point(family, losses, log_losses)

    starts = [center, (center[0], center[1] * 0.5), (center[0], center[1] * 2.0)]
    best = None
    total_iters = 0
    for start in starts:
        t0 = _to_unconstrained(family, *start)
        res = optimize.minimize(
            objective, t0, method="Nelder-Mead",
            options=dict(xatol=1e-8, fatol=1e-10, maxiter=4000, maxfev=8000),
        )
        total_iters += res.nit
        if best is None or res.fun < best[0].fun:
            best = (res, start)
    res, start = best
    p1, p2 = _from_unconstrained(family, res.x)
    converged = bool(res.success) and np.isfinite(res.fun)
    if converged:
        # finite-difference gradient check on the mean log-likelihood
        g = optimize.approx_fprime(res.x, objective, 1e-7)
        converged = bool(np.linalg.norm(g) <= 1e-4)
    try:
        model = SeverityModel(family, p1, p2, threshold)
    except ParameterDomainError:
        model = SeverityModel(family, *center, threshold)
        converged = False
    return FitResult(
        model=model,
        loglik=float(-res.fun * losses.size),
        n=int(losses.size),
        converged=converged,
        iterations=int(total_iters),
        start_point=(float(start[0]), float(start[1])),
    )


def fit_poisson(loss_count: int, years: int) -> FrequencyModel:
    """Poisson MLE: lambda-hat = total count / years."""
    if years < 1:
        raise ValueError("years must be >= 1")
    if loss_count < 0:
        raise ValueError("loss_count must be nonnegative")
    if loss_count == 0:
        warnings.warn("zero losses observed; frequency estimate is degenerate",
                      stacklevel=2)
        return FrequencyModel(0.0, years)
    return FrequencyModel(loss_count / years, years)
