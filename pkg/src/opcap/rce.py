"""Reduced-bias capital estimation via iso-density parameter perturbation.

The estimator prices capital not only at the fitted parameters but on a
deterministic grid of parameter points lying on fixed-probability ellipses of
the joint asymptotic parameter distribution (7 severity percentiles x 4 sign
directions x 2 frequency percentiles = 56 points).  For each such outer point
an inner 56-point grid is built the same way, every inner point is priced
with the interpolated SLA, and the unweighted median of each inner grid gives
one of 56 capital medians.  The estimate is

    RCE = median(medians) * (median(medians) / weighted_mean(medians))^c

where the weights are (1 - p_sev) * 2 * (1 - p_freq) and the exponent c
depends on the severity family and sample size (empirically calibrated
knots with root-scale interpolation between them).

Non-finite or absurdly large capital at any point discards that point's
whole severity-percentile ellipse and every wider ellipse (the discard
cascade), keeping the retained point set direction-balanced.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from .capital import CapitalSpec, capital_grid, isla
from .distributions import (
    FrequencyModel,
    ParameterDomainError,
    SeverityFamily,
    SeverityModel,
    params_in_domain,
)
from .fisher import FisherMatrix, NumericInstabilityError, fisher_for_model, param_covariance
from .mle import FitResult

__all__ = [
    "SEVERITY_PERCENTILES",
    "FREQUENCY_PERCENTILES",
    "DIRECTIONS",
    "CTable",
    "DEFAULT_CTABLE",
    "GridPoint",
    "IsoGrid",
    "RceError",
    "RceResult",
    "ellipse_offsets",
    "perturb_lambda",
    "build_iso_grid",
    "c_lookup",
    "rce_estimate",
]

SEVERITY_PERCENTILES = (0.01, 0.10, 0.25, 0.50, 0.75, 0.90, 0.99)
FREQUENCY_PERCENTILES = (0.25, 0.75)
DIRECTIONS = ((1, 1), (1, -1), (-1, 1), (-1, -1))

_CAPITAL_CAP = 1e15


class RceError(RuntimeError):
    pass


@lru_cache(maxsize=64)
def _chi2_quantile(p: float) -> float:
    # chi-square with 2 df: F(x) = 1 - exp(-x/2), so the quantile is closed form
    return -2.0 * math.log1p(-p)


# -- c(sev, n) table --------------------------------------------------------

_KNOT_NS = (150, 250, 500, 750, 1000)


@dataclass(frozen=True)
class CTable:
    """Convexity exponents by (family, truncated) with interpolation roots."""

    rows: dict = field(default_factory=dict)

    def row(self, family: SeverityFamily, truncated: bool):
        try:
            return self.rows[(family, truncated)]
        except KeyError:
            raise RceError(
                f"no convexity exponent for family {family.value}"
                f"{' (truncated)' if truncated else ''}"
            ) from None


DEFAULT_CTABLE = CTable(rows={
    (SeverityFamily.LOGNORMAL, False): ((1.00, 1.55, 1.55, 1.55, 1.75), 8),
    (SeverityFamily.LOGNORMAL, True): ((1.20, 1.70, 1.80, 1.80, 1.80), 8),
    (SeverityFamily.LOGGAMMA, False): ((1.00, 1.00, 1.00, 1.00, 0.30), 3),
    (SeverityFamily.LOGGAMMA, True): ((0.30, 0.70, 0.85, 1.00, 1.00), 3),
    (SeverityFamily.GPD, False): ((1.60, 1.95, 2.00, 2.00, 2.00), 10),
    (SeverityFamily.GPD, True): ((1.50, 1.85, 2.00, 2.10, 2.10), 10),
})


def c_lookup(family: SeverityFamily, n: int, truncated: bool = False,
             ctable: CTable = DEFAULT_CTABLE) -> tuple[float, bool]:
    """Convexity exponent for a family at sample size n.

    Exact at the calibration knots; between knots the exponent is
    interpolated on the root-scale c = [c_lo^(1/R) + frac*(c_hi^(1/R) -
    c_lo^(1/R))]^R.  Outside [150, 1000] the nearest knot applies, with a
    warning.  Returns (c, interpolated_flag).
    """
    if family is SeverityFamily.NORMAL:
        raise RceError("reduced-bias estimation is not supported for the Normal family")
    cs, root = ctable.row(family, truncated)
    if n <= _KNOT_NS[0]:
        if n < _KNOT_NS[0]:
            warnings.warn(
                f"sample size {n} below the calibrated range; clamping to n=150",
                stacklevel=2,
            )
        return cs[0], False
    if n >= _KNOT_NS[-1]:
        if n > _KNOT_NS[-1]:
            warnings.warn(
                f"sample size {n} above the calibrated range; clamping to n=1000",
                stacklevel=2,
            )
        return cs[-1], False
    hi = next(i for i, kn in enumerate(_KNOT_NS) if kn >= n)
    if n == _KNOT_NS[hi]:
        return cs[hi], False
    lo = hi - 1
    if n == _KNOT_NS[lo]:
        return cs[lo], False
    frac = (n - _KNOT_NS[lo]) / (_KNOT_NS[hi] - _KNOT_NS[lo])
    r = 1.0 / root
    c = (cs[lo] ** r + frac * (cs[hi] ** r - cs[lo] ** r)) ** root
    return float(c), True


# -- grid construction ------------------------------------------------------

@dataclass(frozen=True)
class GridPoint:
    p_sev: float
    direction: tuple[int, int]
    p_freq: float
    params: tuple[float, float]
    lam: float
    weight: float
    valid: bool


@dataclass(frozen=True)
class IsoGrid:
    points: tuple

    def __len__(self):
        return len(self.points)


def ellipse_offsets(cov: np.ndarray, p: float):
    """Four direction offsets on the probability-p ellipse of a 2x2 covariance.

    Each offset is (z1*q*s1, z2*q*s2) with q = sqrt(chi2_2(p)*(1+z1*z2*rho)/2),
    which places the point exactly on the chi-square-p contour of the
    covariance's quadratic form.
    """
    cov = np.asarray(cov, dtype=float)
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    s1, s2 = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
    rho = cov[0, 1] / (s1 * s2)
    if abs(rho) >= 1.0:
        raise ParameterDomainError("degenerate covariance: |correlation| >= 1")
    chi = _chi2_quantile(p)
    out = []
    for z1, z2 in DIRECTIONS:
        q = math.sqrt(chi * (1.0 + z1 * z2 * rho) / 2.0)
        out.append((z1 * q * s1, z2 * q * s2))
    return out


def perturb_lambda(lam: float, years: int, p_freq: float) -> float:
    """Annualized Poisson(lam*years) quantile at p_freq."""
    if lam <= 0.0:
        raise ValueError("lambda must be positive")
    return float(stats.poisson.ppf(p_freq, lam * years)) / years


def build_iso_grid(model: SeverityModel, freq: FrequencyModel,
                   fisher: FisherMatrix, n: int) -> IsoGrid:
    """The 56-point perturbation grid around a fitted model."""
    cov = param_covariance(fisher, n)
    lam_by_pf = {pf: perturb_lambda(freq.lam, freq.years, pf)
                 for pf in FREQUENCY_PERCENTILES}
    points = []
    for p_sev in SEVERITY_PERCENTILES:
        offsets = ellipse_offsets(cov, p_sev)
        for (z1, z2), (d1, d2) in zip(DIRECTIONS, offsets):
            p1, p2 = model.p1 + d1, model.p2 + d2
            valid = params_in_domain(model.family, p1, p2)
            for pf in FREQUENCY_PERCENTILES:
                points.append(GridPoint(
                    p_sev=p_sev,
                    direction=(z1, z2),
                    p_freq=pf,
                    params=(p1, p2),
                    lam=lam_by_pf[pf],
                    weight=(1.0 - p_sev) * 2.0 * (1.0 - pf),
                    valid=valid,
                ))
    return IsoGrid(points=tuple(points))


# -- the estimator ----------------------------------------------------------

def _grid_arrays(grid: IsoGrid):
    p1 = np.array([gp.params[0] for gp in grid.points])
    p2 = np.array([gp.params[1] for gp in grid.points])
    lam = np.array([gp.lam for gp in grid.points])
    valid = np.array([gp.valid for gp in grid.points])
    return p1, p2, lam, valid


def _apply_discard(capitals: np.ndarray, n_percentiles: int = 7):
    """Ellipse-discard cascade on a grid's capital vector.

    `capitals` is ordered by (percentile, direction, frequency) with 8 points
    per percentile ellipse.  Any invalid point kills its ellipse and all
    wider (higher-percentile) ellipses.  Returns (retained capitals,
    retained-point mask, number of discarded ellipses).
    """
    per = capitals.reshape(n_percentiles, -1)
    bad = ~np.isfinite(per) | (per > _CAPITAL_CAP) | (per <= 0.0)
    ellipse_bad = bad.any(axis=1)
    if ellipse_bad.any():
        first_bad = int(np.argmax(ellipse_bad))
    else:
        first_bad = n_percentiles
    mask = np.zeros(capitals.shape, dtype=bool).reshape(n_percentiles, -1)
    mask[:first_bad, :] = True
    mask = mask.ravel()
    return capitals[mask], mask, n_percentiles - first_bad


@dataclass(frozen=True)
class RceResult:
    capital: float
    step1_capital: float
    median_of_medians: float
    weighted_mean: float
    ratio: float
    c: float
    discarded_ellipses: int
    n_medians: int


def rce_estimate(fit: FitResult, freq: FrequencyModel, spec: CapitalSpec,
                 ctable: CTable = DEFAULT_CTABLE) -> RceResult:
    """Reduced-bias capital estimate from a converged severity fit."""
    model = fit.model
    c, _ = c_lookup(model.family, fit.n, model.truncated, ctable)
    fm = fisher_for_model(model)
    outer = build_iso_grid(model, freq, fm, fit.n)
    step1 = isla(model, spec)

    o1, o2, o_lam, o_valid = _grid_arrays(outer)
    k = len(outer)  # 56

    # Inner grids: for each valid outer point, recompute the Fisher matrix at
    # that point's parameters and build a 56-point grid centered there (same
    # n_eff, Poisson perturbation around the outer point's annual rate).
    inner_p1 = np.full((k, k), np.nan)
    inner_p2 = np.full((k, k), np.nan)
    inner_lam = np.full((k, k), np.nan)
    for i, gp in enumerate(outer.points):
        if not o_valid[i]:
            continue
        try:
            point_model = SeverityModel(model.family, *gp.params, model.threshold)
            point_fm = fisher_for_model(point_model)
            grid_i = build_iso_grid(
                point_model, FrequencyModel(gp.lam, freq.years), point_fm, fit.n
            )
        except (ParameterDomainError, NumericInstabilityError):
            continue
        g1, g2, gl, gv = _grid_arrays(grid_i)
        g1[~gv] = np.nan
        inner_p1[i], inner_p2[i], inner_lam[i] = g1, g2, gl

    caps = capital_grid(
        model.family, inner_p1.ravel(), inner_p2.ravel(), model.threshold,
        inner_lam.ravel(), spec.alpha,
    ).reshape(k, k)

    medians = np.full(k, np.nan)
    inner_discards = 0
    for i in range(k):
        retained, _, dropped = _apply_discard(caps[i])
        inner_discards += dropped
        if retained.size:
            medians[i] = float(np.median(retained))

    retained_meds, mask, outer_dropped = _apply_discard(medians)
    if retained_meds.size == 0:
        raise RceError("all perturbation ellipses were discarded; estimate unavailable")
    weights = np.array([gp.weight for gp in outer.points])[mask]

    med = float(np.median(retained_meds))
    wmean = float(np.average(retained_meds, weights=weights))
    ratio = med / wmean
    capital = med * ratio**c
    return RceResult(
        capital=float(capital),
        step1_capital=float(step1),
        median_of_medians=med,
        weighted_mean=wmean,
        ratio=float(ratio),
        c=float(c),
        discarded_ellipses=int(outer_dropped),
        n_medians=int(retained_meds.size),
    )
