"""Design-based survey estimation with exact-variance estimators.

The package computes model-assisted (GREG) point estimates for finite
population means and three competing variance estimates: the classical
residual-based asymptotic estimator, an exact-variance estimator built on
the estimator's degree-2 U-statistic structure, and the balanced-method
infinitesimal jackknife. Sampling-design simulators, an exhaustive
enumeration oracle for small frames, and a Monte Carlo replication harness
round out the toolkit.
"""

__version__ = "0.1.0"

from .frame import InclusionProbs, Population, Sample, validate_population
from .designs import DesignSpec, compute_inclusion_probs, draw_sample, joint_inclusion
from .greg import (
    GregFit,
    estimate_difference,
    estimate_greg,
    estimate_ht,
    fit_greg,
    ht_variance_estimate,
)
from .kernels import (
    KernelContext,
    build_kernel_context,
    pair_cond_mean,
    pair_mean,
    u_kernel,
    u_kernel_realized,
    v_kernel,
)
from .hdvar import VarianceReport, hd_variance
from .classicvar import asymptotic_variance, ij_bm_variance, ij_direct_tau1
from .oracle import (
    OracleReport,
    enumerate_statistic,
    exact_estimator_expectation,
    exact_h_components,
)
from .simharness import (
    ReplicationResult,
    ReplicationSummary,
    normal_quantile,
    run_replications,
    summarize,
)

__all__ = [
    "InclusionProbs",
    "Population",
    "Sample",
    "validate_population",
    "DesignSpec",
    "compute_inclusion_probs",
    "draw_sample",
    "joint_inclusion",
    "GregFit",
    "estimate_difference",
    "estimate_greg",
    "estimate_ht",
    "fit_greg",
    "ht_variance_estimate",
    "KernelContext",
    "build_kernel_context",
    "pair_cond_mean",
    "pair_mean",
    "u_kernel",
    "u_kernel_realized",
    "v_kernel",
    "VarianceReport",
    "hd_variance",
    "asymptotic_variance",
    "ij_bm_variance",
    "ij_direct_tau1",
    "OracleReport",
    "enumerate_statistic",
    "exact_estimator_expectation",
    "exact_h_components",
    "ReplicationResult",
    "ReplicationSummary",
    "normal_quantile",
    "run_replications",
    "summarize",
]
