"""Severity and frequency model behavior: domains, round-trips, moments."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from opcap.distributions import (
    FrequencyModel,
    ParameterDomainError,
    SeverityFamily,
    SeverityModel,
    cdf,
    mean,
    pdf,
    quantile,
    sample,
    sample_poisson,
    tgpd_mean_forms,
    tloggamma_mean_forms,
)

from conftest import CENTRAL_MODELS, THRESHOLD


# -- domains -----------------------------------------------------------------

@pytest.mark.parametrize("family,p1,p2", [
    (SeverityFamily.LOGNORMAL, 10.0, 0.0),
    (SeverityFamily.LOGNORMAL, 10.0, -1.0),
    (SeverityFamily.LOGGAMMA, -1.0, 2.65),
    (SeverityFamily.LOGGAMMA, 24.0, 0.0),
    (SeverityFamily.GPD, 0.9, -5.0),
    (SeverityFamily.GPD, -0.1, 5e4),
    (SeverityFamily.NORMAL, 0.0, 0.0),
    (SeverityFamily.LOGNORMAL, math.nan, 2.0),
    (SeverityFamily.GPD, 0.9, math.inf),
])
def test_invalid_params_rejected(family, p1, p2):
    with pytest.raises(ParameterDomainError):
        SeverityModel(family, p1, p2)


def test_normal_truncation_rejected():
    with pytest.raises(ParameterDomainError):
        SeverityModel(SeverityFamily.NORMAL, 5e5, 1.5e6, 1e4)


def test_loggamma_threshold_below_support_rejected():
    with pytest.raises(ParameterDomainError):
        SeverityModel(SeverityFamily.LOGGAMMA, 24.0, 2.65, 0.5)


def test_frequency_model_domain():
    with pytest.raises(ParameterDomainError):
        FrequencyModel(-1.0)
    with pytest.raises(ParameterDomainError):
        FrequencyModel(25.0, 0)
    assert FrequencyModel(25.0, 10).expected_count == 250.0


# -- quantile/CDF round-trips ------------------------------------------------

@pytest.mark.parametrize("name", sorted(CENTRAL_MODELS))
def test_round_trip_central(name):
    model = CENTRAL_MODELS[name]
    for p in (1e-6, 0.01, 0.25, 0.5, 0.9, 0.999, 1 - 1e-8):
        x = quantile(model, p)
        assert np.isclose(cdf(model, x), p, rtol=1e-9, atol=1e-12)


def _not_absorbed(model):
    # skip draws where the threshold swallows nearly the whole distribution;
    # the conditional law is then numerically meaningless
    if not model.truncated:
        return True
    return cdf(model.base(), model.threshold) < 1.0 - 1e-4


@settings(max_examples=200, deadline=None)
@given(
    mu=st.floats(-2.0, 14.0),
    sigma=st.floats(0.3, 4.0),
    p=st.floats(1e-9, 1.0 - 1e-9),
    truncated=st.booleans(),
)
def test_round_trip_lognormal_property(mu, sigma, p, truncated):
    h = THRESHOLD if truncated else None
    model = SeverityModel(SeverityFamily.LOGNORMAL, mu, sigma, h)
    assume(_not_absorbed(model))
    x = quantile(model, p)
    assert cdf(model, x) == pytest.approx(p, rel=1e-8, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(
    xi=st.floats(0.05, 1.9),
    theta=st.floats(1e3, 1e6),
    p=st.floats(1e-9, 1.0 - 1e-9),
    truncated=st.booleans(),
)
def test_round_trip_gpd_property(xi, theta, p, truncated):
    h = THRESHOLD if truncated else None
    model = SeverityModel(SeverityFamily.GPD, xi, theta, h)
    assume(_not_absorbed(model))
    x = quantile(model, p)
    assert cdf(model, x) == pytest.approx(p, rel=1e-8, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(5.0, 40.0),
    b=st.floats(1.2, 6.0),
    p=st.floats(1e-9, 1.0 - 1e-9),
    truncated=st.booleans(),
)
def test_round_trip_loggamma_property(a, b, p, truncated):
    h = THRESHOLD if truncated else None
    model = SeverityModel(SeverityFamily.LOGGAMMA, a, b, h)
    assume(_not_absorbed(model))
    x = quantile(model, p)
    assert cdf(model, x) == pytest.approx(p, rel=1e-8, abs=1e-10)


# -- truncation semantics ----------------------------------------------------

@pytest.mark.parametrize("name", ["tlognormal", "tloggamma", "tgpd"])
def test_truncated_support_starts_at_threshold(name):
    model = CENTRAL_MODELS[name]
    assert cdf(model, model.threshold) == 0.0
    assert cdf(model, model.threshold * 0.5) == 0.0
    assert quantile(model, 1e-13) == pytest.approx(model.threshold, rel=1e-9)
    # conditional law: F_H(x) = (F(x) - F(H)) / (1 - F(H))
    base = model.base()
    x = quantile(model, 0.7)
    fh = cdf(base, model.threshold)
    assert cdf(model, x) == pytest.approx((cdf(base, x) - fh) / (1 - fh), rel=1e-12)


def test_truncated_pdf_renormalizes():
    model = CENTRAL_MODELS["tlognormal"]
    base = model.base()
    fh = cdf(base, model.threshold)
    x = 3e4
    assert pdf(model, x) == pytest.approx(pdf(base, x) / (1 - fh), rel=1e-12)
    assert pdf(model, model.threshold * 0.9) == 0.0


# -- moments -----------------------------------------------------------------

def test_lognormal_mean_closed_form():
    assert mean(CENTRAL_MODELS["lognormal"]) == pytest.approx(
        math.exp(10.0 + 2.0), rel=1e-12)


def test_gpd_mean_closed_form_and_infinite_tail():
    model = SeverityModel(SeverityFamily.GPD, 0.5, 4e4)
    assert mean(model) == pytest.approx(8e4, rel=1e-12)
    assert mean(SeverityModel(SeverityFamily.GPD, 1.1, 4e4)) == math.inf
    assert mean(SeverityModel(SeverityFamily.LOGGAMMA, 24.0, 0.9)) == math.inf


def test_normal_mean():
    assert mean(CENTRAL_MODELS["normal"]) == 5e5


@pytest.mark.parametrize("name", ["tlognormal"])
def test_truncated_mean_vs_quadrature(name):
    from scipy import integrate

    model = CENTRAL_MODELS[name]
    # E[X] = H + integral of the survival function above H
    hi = quantile(model, 1 - 1e-11)
    val, _ = integrate.quad(lambda x: 1.0 - cdf(model, x), model.threshold, hi,
                            limit=500)
    assert mean(model) == pytest.approx(model.threshold + val, rel=1e-6)


def test_dual_mean_forms_spot():
    f1, f2 = tgpd_mean_forms(0.8675, 5e4, THRESHOLD)
    assert f1 == pytest.approx(f2, rel=1e-12)
    g1, g2 = tloggamma_mean_forms(23.5, 2.65, THRESHOLD)
    assert g1 == pytest.approx(g2, rel=1e-12)


# -- sampling ----------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(CENTRAL_MODELS))
def test_sample_matches_distribution(name, rng):
    model = CENTRAL_MODELS[name]
    x = sample(model, rng, 4000)
    assert x.shape == (4000,)
    if model.truncated:
        assert np.all(x > model.threshold)
    # probability-integral transform back to uniform
    u = cdf(model, x)
    from scipy import stats
    assert stats.kstest(u, "uniform").pvalue > 1e-4


def test_sample_empty_and_negative():
    model = CENTRAL_MODELS["lognormal"]
    gen = np.random.default_rng(0)
    assert sample(model, gen, 0).size == 0
    with pytest.raises(ValueError):
        sample(model, gen, -1)


def test_sample_poisson_moments(rng, freq25):
    counts = np.array([sample_poisson(freq25, rng) for _ in range(2000)])
    assert counts.min() >= 0
    assert counts.mean() == pytest.approx(250.0, rel=0.02)
