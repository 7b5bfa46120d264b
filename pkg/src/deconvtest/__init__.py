"""Goodness-of-fit testing for the signal in an additive convolution.

Observations X = Y + Z mix an unobserved signal Y with independent noise Z
of known law.  This package tests a hypothesized law for Y by expanding the
density of X in an orthonormal polynomial basis, comparing empirical
expansion coefficients with their null values, and selecting the number of
compared coefficients from the data by a Schwarz-type penalty.
"""

from .engines import QuadratureError, expect_1d, expect_conv, mc_expect
from .measures import (
    ChiSquared, Exponential, Exponential1Ref, Gamma, Geometric, GeometricRef,
    Mixture, PointMass, Poisson, RngStream, Uniform01, Uniform01Ref,
    density_m, pdf_or_pmf, sample,
)
from .nullmodel import (
    NullCoefficients, NullSpec, compute_alphas, compute_coefficients,
    compute_sigma, eigen_floor_diagnostics,
)
from .orthopoly import (
    BasisTable, PolynomialFamilySpec, addition_split_laguerre,
    addition_split_meixner, certify_orthonormality, eval_laguerre,
    eval_laguerre_scaled, eval_meixner, eval_meixner_scaled,
    eval_shifted_legendre,
)
from .simlab import (
    ScenarioSpec, SimReport, build_scenario, level_power_table,
    run_replications, wilson_interval,
)
from .teststat import (
    TestConfig, TestEngine, TestResult, chi2_cdf, chi2_quantile,
    compute_bhat, critical_value, default_kmax, inv_sqrt_psd, run_test,
    select_order, t_sequence,
)

__version__ = "0.1.0"
