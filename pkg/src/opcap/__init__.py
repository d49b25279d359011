"""Operational-risk capital estimation under the Loss Distribution Approach.

Provides heavy-tailed severity models (with left truncation), Fisher
information matrices, truncation-aware maximum likelihood, single-loss
capital approximations with a Monte Carlo oracle, a reduced-bias capital
estimator built on iso-density parameter perturbation, and a simulation
study harness.
"""

from .distributions import (
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
)
from .fisher import (
    FisherMatrix,
    NumericInstabilityError,
    fisher_for_model,
    fisher_gpd,
    fisher_loggamma,
    fisher_lognormal,
    fisher_tgpd,
    fisher_tloggamma_approx,
    fisher_tloggamma_numeric,
    fisher_tlognormal,
    param_covariance,
)
from .mle import FitResult, fit_poisson, fit_severity
from .capital import (
    CapitalSpec,
    InfiniteMeanError,
    TailDomainError,
    isla,
    mc_capital_oracle,
    sla_bk,
    sla_degen,
    tail_index,
)
from .rce import (
    CTable,
    DEFAULT_CTABLE,
    IsoGrid,
    RceError,
    RceResult,
    build_iso_grid,
    c_lookup,
    ellipse_offsets,
    perturb_lambda,
    rce_estimate,
)
from .simharness import (
    CapitalDistStats,
    ContaminationSpec,
    StudyConfig,
    calibrate_c,
    capital_stats,
    contaminated_model,
    run_study,
    simulate_sample,
)

__version__ = "0.1.0"

__all__ = [
    "CapitalDistStats",
    "CapitalSpec",
    "ContaminationSpec",
    "CTable",
    "DEFAULT_CTABLE",
    "FisherMatrix",
    "FitResult",
    "FrequencyModel",
    "InfiniteMeanError",
    "IsoGrid",
    "NumericInstabilityError",
    "ParameterDomainError",
    "RceError",
    "RceResult",
    "SeverityFamily",
    "SeverityModel",
    "StudyConfig",
    "TailDomainError",
    "build_iso_grid",
    "c_lookup",
    "calibrate_c",
    "capital_stats",
    "cdf",
    "contaminated_model",
    "ellipse_offsets",
    "fisher_for_model",
    "fisher_gpd",
    "fisher_loggamma",
    "fisher_lognormal",
    "fisher_tgpd",
    "fisher_tloggamma_approx",
    "fisher_tloggamma_numeric",
    "fisher_tlognormal",
    "fit_poisson",
    "fit_severity",
    "isla",
    "mc_capital_oracle",
    "mean",
    "param_covariance",
    "pdf",
    "perturb_lambda",
    "quantile",
    "rce_estimate",
    "run_study",
    "sample",
    "sample_poisson",
    "simulate_sample",
    "sla_bk",
    "sla_degen",
    "tail_index",
]
