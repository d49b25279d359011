"""Aggregate-capital approximations: branches, grids, Monte Carlo oracle."""

from __future__ import annotations

import math

import numpy as np
import pytest

from opcap.capital import (
    CapitalSpec,
    InfiniteMeanError,
    TailDomainError,
    capital_grid,
    isla,
    mc_capital_oracle,
    sla_bk,
    sla_degen,
    tail_index,
)
from opcap.distributions import (
    FrequencyModel,
    SeverityFamily,
    SeverityModel,
    mean,
    quantile,
)

from conftest import CENTRAL_MODELS


def spec999(lam=25.0):
    return CapitalSpec(0.999, FrequencyModel(lam, 10))


def test_capital_spec_basics():
    spec = spec999()
    assert spec.severity_percentile == pytest.approx(1.0 - 0.001 / 25.0)
    with pytest.raises(ValueError):
        CapitalSpec(1.5, FrequencyModel(25.0))
    with pytest.raises(ValueError):
        CapitalSpec(0.999, FrequencyModel(0.0))


def test_tail_index_by_family():
    assert tail_index(CENTRAL_MODELS["gpd"]) == 0.875
    assert tail_index(CENTRAL_MODELS["loggamma"]) == pytest.approx(1 / 2.65)
    assert tail_index(CENTRAL_MODELS["lognormal"]) == 0.0
    assert tail_index(CENTRAL_MODELS["normal"]) == 0.0


def test_light_branch_is_quantile_plus_rate_times_mean():
    model = CENTRAL_MODELS["lognormal"]
    spec = spec999()
    q = quantile(model, spec.severity_percentile)
    assert isla(model, spec) == pytest.approx(q + 25.0 * mean(model), rel=1e-12)
    assert sla_bk(model, spec) == pytest.approx(q + 24.0 * mean(model), rel=1e-12)


def test_heavy_branch_closed_form():
    model = SeverityModel(SeverityFamily.GPD, 1.5, 4e4)
    spec = spec999()
    q = quantile(model, spec.severity_percentile)
    from scipy.special import gamma as G
    k = 1.5
    coeff = (1 - k) * G(1 - 1 / k) ** 2 / (2 * G(1 - 2 / k))
    expected = q + (1 - 0.999) * q * coeff / (1 - 1 / k)
    assert isla(model, spec) == pytest.approx(expected, rel=1e-12)
    assert sla_degen(model, spec) == pytest.approx(expected, rel=1e-12)


def test_interpolated_band_is_continuous_and_monotone_in_xi():
    spec = spec999()
    xis = np.linspace(0.75, 1.25, 101)
    caps = capital_grid(SeverityFamily.GPD, xis, np.full_like(xis, 4e4), None,
                       np.full_like(xis, 25.0), 0.999)
    assert np.all(np.isfinite(caps))
    assert np.all(np.diff(caps) > 0.0)
    # no jump larger than the local trend at the band edges
    steps = np.diff(caps) / caps[:-1]
    assert steps.max() < 0.25


def test_interpolation_matches_exact_branches_at_band_edges():
    spec = spec999()
    for xi in (0.8, 1.2):
        model = SeverityModel(SeverityFamily.GPD, xi, 4e4)
        grid_val = capital_grid(SeverityFamily.GPD, np.array([xi]),
                                np.array([4e4]), None, np.array([25.0]),
                                0.999)[0]
        assert isla(model, spec) == pytest.approx(sla_degen(model, spec), rel=1e-12)
        assert grid_val == pytest.approx(sla_degen(model, spec), rel=1e-12)


def test_capital_grid_flags_invalid_points_as_nan():
    caps = capital_grid(
        SeverityFamily.GPD,
        np.array([0.9, -0.5, 2.5, np.nan, 0.9]),
        np.array([4e4, 4e4, 4e4, 4e4, -1.0]),
        None,
        np.full(5, 25.0),
        0.999,
    )
    assert np.isfinite(caps[0])
    assert np.isnan(caps[1:]).all()


def test_capital_grid_agrees_with_scalar_api():
    rngv = np.random.default_rng(5)
    xis = rngv.uniform(0.3, 1.9, 20)
    thetas = rngv.uniform(2e4, 8e4, 20)
    caps = capital_grid(SeverityFamily.GPD, xis, thetas, None,
                        np.full(20, 25.0), 0.999)
    spec = spec999()
    for xi, th, cap in zip(xis, thetas, caps):
        assert cap == pytest.approx(
            isla(SeverityModel(SeverityFamily.GPD, xi, th), spec), rel=1e-12)


def test_tail_domain_errors():
    spec = spec999()
    with pytest.raises(TailDomainError):
        isla(SeverityModel(SeverityFamily.GPD, 2.3, 4e4), spec)
    with pytest.raises(TailDomainError):
        sla_degen(SeverityModel(SeverityFamily.GPD, 1.0, 4e4), spec)
    with pytest.raises(InfiniteMeanError):
        sla_bk(SeverityModel(SeverityFamily.GPD, 1.1, 4e4), spec)


def test_truncated_capital_exceeds_untruncated():
    spec = spec999()
    t = CENTRAL_MODELS["tgpd"]
    u = t.base()
    assert isla(t, spec) > isla(u, spec)


def test_mc_oracle_agrees_with_light_tail_approximation():
    model = SeverityModel(SeverityFamily.LOGNORMAL, 9.0, 1.5)
    spec = spec999()
    gen = np.random.default_rng(99)
    mc = mc_capital_oracle(model, spec, 400_000, gen)
    assert isla(model, spec) == pytest.approx(mc, rel=0.05)


def test_mc_oracle_is_deterministic_given_seed():
    model = CENTRAL_MODELS["lognormal"]
    spec = spec999()
    a = mc_capital_oracle(model, spec, 50_000, np.random.default_rng(4))
    b = mc_capital_oracle(model, spec, 50_000, np.random.default_rng(4))
    assert a == b
