"""Hypothesis tests for binomial random-effects (mixture) models."""

from binomix.mixture import (
    BinomialMixtureModel,
    Dataset,
    MixingDistribution,
    centered_moments,
    chi2_marginal,
    j_functional,
    marginal_pmf,
    moment_discrepancy,
    moments,
    sample,
    tv,
    w1,
    w1_to_pointmass_set,
)
from binomix.kravchuk import centered_moment_estimate, kravchuk, kravchuk_norm
from binomix.statistics import (
    STATISTICS,
    CompositePointMassNull,
    MixingNull,
    PointNull,
    get_statistic,
)
from binomix.estimators import GridSpec, empirical_mixing, mom, npmle, stat_dist_to_estimator, unbiased_moments
from binomix.calibration import (
    QuantileTable,
    TestReport,
    calibrate_composite_pointmass,
    calibrate_simple,
    cochran_asymptotic_test,
    invert_ci,
    run_global_minimax,
    run_local_minimax,
    run_test,
)
from binomix.adversarial import (
    FamilySpec,
    mass_leak,
    mean_matched,
    mean_shift,
    moment_match_pair,
    prob_perturb,
)
from binomix.simulate import critical_separation, power_sweep, statistic_distribution

__all__ = [name for name in dir() if not name.startswith("_")]
