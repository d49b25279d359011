"""Shared fixtures and representative parameter points for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from opcap.distributions import FrequencyModel, SeverityFamily, SeverityModel

# Representative parameter points per family, chosen well inside each
# family's domain, with the conventional $10,000 collection threshold for
# the truncated variants.
THRESHOLD = 1e4

CENTRAL_MODELS = {
    "lognormal": SeverityModel(SeverityFamily.LOGNORMAL, 10.0, 2.0),
    "tlognormal": SeverityModel(SeverityFamily.LOGNORMAL, 10.0, 2.0, THRESHOLD),
    "loggamma": SeverityModel(SeverityFamily.LOGGAMMA, 24.0, 2.65),
    "tloggamma": SeverityModel(SeverityFamily.LOGGAMMA, 23.5, 2.65, THRESHOLD),
    "gpd": SeverityModel(SeverityFamily.GPD, 0.875, 47500.0),
    "tgpd": SeverityModel(SeverityFamily.GPD, 0.8675, 50000.0, THRESHOLD),
    "normal": SeverityModel(SeverityFamily.NORMAL, 5e5, 1.5e6),
}


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def freq25():
    return FrequencyModel(25.0, 10)
