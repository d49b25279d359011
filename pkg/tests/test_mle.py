"""Maximum-likelihood fitting: recovery, truncation handling, edge cases."""

from __future__ import annotations

import numpy as np
import pytest

from opcap.distributions import FrequencyModel, SeverityFamily, SeverityModel, sample
from opcap.mle import (
    DegenerateSampleError,
    InsufficientDataError,
    fit_poisson,
    fit_severity,
    loglikelihood,
)

from conftest import CENTRAL_MODELS


@pytest.mark.parametrize("name,rtol", [
    ("lognormal", 0.05),
    ("tlognormal", 0.08),
    ("loggamma", 0.08),
    # the truncated LogGamma parameters are strongly correlated under the
    # threshold, so the raw parameters are only weakly identified
    ("tloggamma", 0.20),
    ("gpd", 0.10),
    ("tgpd", 0.15),
    ("normal", 0.05),
])
def test_parameter_recovery(name, rtol):
    truth = CENTRAL_MODELS[name]
    gen = np.random.default_rng(42)
    losses = sample(truth, gen, 4000)
    fit = fit_severity(losses, truth.family, truth.threshold)
    assert fit.converged
    assert fit.n == 4000
    assert fit.model.family is truth.family
    assert fit.model.threshold == truth.threshold
    assert fit.model.p1 == pytest.approx(truth.p1, rel=rtol)
    assert fit.model.p2 == pytest.approx(truth.p2, rel=rtol)
    # the fitted law must reproduce the tail even where the raw parameters
    # are only weakly identified
    from opcap.distributions import quantile
    assert quantile(fit.model, 0.999) == pytest.approx(
        quantile(truth, 0.999), rel=0.25)


def test_lognormal_fit_is_the_closed_form():
    # for this family the optimizer must land on the analytic optimum
    gen = np.random.default_rng(7)
    losses = sample(CENTRAL_MODELS["lognormal"], gen, 500)
    fit = fit_severity(losses, SeverityFamily.LOGNORMAL)
    logs = np.log(losses)
    assert fit.model.p1 == pytest.approx(logs.mean(), rel=1e-5)
    assert fit.model.p2 == pytest.approx(logs.std(), rel=1e-4)


def test_fit_maximizes_loglikelihood_locally():
    truth = CENTRAL_MODELS["gpd"]
    gen = np.random.default_rng(3)
    losses = sample(truth, gen, 1000)
    fit = fit_severity(losses, truth.family)
    best = loglikelihood(fit.model, losses)
    for d1, d2 in [(1e-3, 0), (-1e-3, 0), (0, 50.0), (0, -50.0)]:
        nearby = SeverityModel(truth.family, fit.model.p1 + d1,
                               fit.model.p2 + d2)
        assert loglikelihood(nearby, losses) <= best + 1e-9


def test_truncated_fit_conditions_on_threshold():
    truth = CENTRAL_MODELS["tlognormal"]
    gen = np.random.default_rng(11)
    losses = sample(truth, gen, 3000)
    fit_t = fit_severity(losses, truth.family, truth.threshold)
    fit_u = fit_severity(losses, truth.family)
    # ignoring truncation biases mu upward on threshold-censored data
    assert fit_u.model.p1 > fit_t.model.p1
    assert abs(fit_t.model.p1 - 10.0) < abs(fit_u.model.p1 - 10.0)


def test_string_family_accepted():
    gen = np.random.default_rng(1)
    losses = sample(CENTRAL_MODELS["lognormal"], gen, 200)
    fit = fit_severity(losses, "lognormal")
    assert fit.model.family is SeverityFamily.LOGNORMAL


def test_insufficient_and_degenerate_samples():
    with pytest.raises(InsufficientDataError):
        fit_severity(np.array([1.0, 2.0]), SeverityFamily.LOGNORMAL)
    with pytest.raises(DegenerateSampleError):
        fit_severity(np.full(100, 1234.5), SeverityFamily.LOGNORMAL)


def test_losses_below_threshold_rejected():
    gen = np.random.default_rng(2)
    losses = sample(CENTRAL_MODELS["lognormal"], gen, 500)
    with pytest.raises(ValueError):
        fit_severity(losses, SeverityFamily.LOGNORMAL, threshold=np.max(losses) + 1)


def test_fit_poisson():
    freq = fit_poisson(250, 10)
    assert isinstance(freq, FrequencyModel)
    assert freq.lam == pytest.approx(25.0)
    assert freq.years == 10
