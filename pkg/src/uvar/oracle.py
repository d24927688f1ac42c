"""Exhaustive-enumeration ground truth for small frames.

Under independent-indicator designs (Bernoulli/Poisson), the 2^N sample
space can be enumerated outright, giving exact means, variances, and the
exact decomposition of the estimator's variance into projection and
residual components plus their covariance. This is the oracle the
estimator modules are tested against.

Only independent designs are supported here: their sample space factorizes
over units. For srswor a separate subset enumeration validates first- and
second-order probabilities.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Union

import numpy as np

from .errors import PreconditionError
from .frame import InclusionProbs, Population, Sample
from . import hdvar
from .kernels import (
    KernelContext,
    build_kernel_context,
    u_kernel_observed_matrix,
    u_kernel_realized_matrix,
)

__all__ = [
    "OracleReport",
    "enumerate_statistic",
    "exact_h_components",
    "exact_estimator_expectation",
    "enumerate_srswor_probs",
]

MAX_ENUM_UNITS = 20

_ESTIMATORS: dict[str, Callable[[KernelContext], float]] = {
    "point_estimate": lambda ctx: ctx.point_estimate,
    "tau1_hat": lambda ctx: hdvar.tau1_hat(ctx)[0],
    "tau1_bias_hat": lambda ctx: hdvar.tau1_hat(ctx)[1],
    "tau1_bcf": lambda ctx: hdvar.tau1_hat(ctx)[2],
    "tau2a_hat": hdvar.tau2a_hat_naive,
    "tau2a_bias_hat": hdvar.tau2a_bias_hat,
    "tau2b_hat": hdvar.tau2b_hat,
    "tau2_bcf": lambda ctx: hdvar.hd_variance(ctx).tau2_bcf,
    "hd_variance": lambda ctx: hdvar.hd_variance(ctx).hd_variance,
}


@dataclass(frozen=True)
class OracleReport:
    """Exact moments and decomposition components for one small frame.

    ``identity_residual`` is the absolute gap in
    ``Var(a_hat) = 4 tau1 + tau2 + 4 omega12``; ``reconstruction_residual``
    the worst per-sample gap in the estimator's decomposition into grand
    mean plus projection plus residual averages.

    ``tau1_bias_exact`` is the exact inflation of the weighted projection
    estimator (the summed variances of its plug-in averages), and
    ``tau1_plugin_target`` the squared-mean part of the same moment, i.e.
    the value the plug-in estimator actually targets. Their sum is the
    exact expectation of the estimator.
    """

    exact_mean: float
    exact_variance: float
    tau1: float
    tau2: float
    omega12: float
    theta: float
    theta_table: np.ndarray
    theta_bar_table: np.ndarray
    phi_bar_observed: np.ndarray
    phi_bar_unobserved: np.ndarray
    identity_residual: float
    reconstruction_residual: float
    prob_sum: float
    h1_mean_residual: float
    h2_mean_residual: float
    tau1_bias_exact: float
    tau1_plugin_target: float


def _require_enumerable(pop: Population, probs: InclusionProbs) -> None:
    if probs.kind != "independent":
        raise PreconditionError(
            "exhaustive enumeration requires an independent-indicator design"
        )
    if pop.unit_count > MAX_ENUM_UNITS:
        raise PreconditionError(
            f"enumeration is capped at {MAX_ENUM_UNITS} units, got {pop.unit_count}"
        )


def _mask_iter(n_units: int):
    for bits in range(1 << n_units):
        yield np.array(
            [(bits >> k) & 1 for k in range(n_units)], dtype=np.int64
        )


def _mask_prob(mask: np.ndarray, pi: np.ndarray) -> float:
    return float(np.prod(np.where(mask == 1, pi, 1.0 - pi)))


def enumerate_statistic(
    pop: Population,
    probs: InclusionProbs,
    statistic: Callable[[Sample], float],
) -> tuple[float, float]:
    """Exact mean and variance of ``statistic(sample)`` over all samples."""
    _require_enumerable(pop, probs)
    pi = probs.first_order
    values = []
    weights = []
    for mask in _mask_iter(pop.unit_count):
        weights.append(_mask_prob(mask, pi))
        values.append(statistic(Sample.from_indicator(mask)))
    values = np.asarray(values)
    weights = np.asarray(weights)
    mean = float(np.sum(weights * values))
    variance = float(np.sum(weights * (values - mean) ** 2))
    return mean, variance


def exact_estimator_expectation(
    pop: Population,
    probs: InclusionProbs,
    estimator: Union[str, Callable[[KernelContext], float]],
) -> float:
    """Exact expectation of a sample-level estimator over all samples.

    ``estimator`` is one of the registered names (``tau1_hat``,
    ``tau1_bias_hat``, ``tau2a_hat``, ``hd_variance``, ...) or any callable
    taking a kernel context.
    """
    _require_enumerable(pop, probs)
    if isinstance(estimator, str):
        try:
            fn = _ESTIMATORS[estimator]
        except KeyError:
            raise PreconditionError(
                f"unknown estimator {estimator!r}; known: {sorted(_ESTIMATORS)}"
            ) from None
    else:
        fn = estimator
    pi = probs.first_order
    total = 0.0
    for mask in _mask_iter(pop.unit_count):
        ctx = build_kernel_context(pop, Sample.from_indicator(mask), probs)
        total += _mask_prob(mask, pi) * fn(ctx)
    return total


def _population_tables(pop: Population, probs: InclusionProbs):
    """Sample-independent pair tables over the whole frame.

    Returns the pair-mean table, both conditional-mean tables, the solo
    values, and a base context (any sample works for these quantities;
    the empty one is used).
    """
    base = build_kernel_context(
        pop, Sample(indices=np.array([], dtype=np.int64), unit_count=pop.unit_count), probs
    )
    idx = np.arange(pop.unit_count)
    pi = probs.first_order
    both = u_kernel_observed_matrix(base, idx)
    np.fill_diagonal(both, 0.0)
    solo = base.solo_kernel
    phi_obs = both * pi[None, :] + solo[:, None] * (1.0 - pi)[None, :]
    phi_unobs = np.broadcast_to((solo * pi)[None, :], both.shape).copy()
    theta = phi_obs * pi[:, None] + phi_unobs * (1.0 - pi)[:, None]
    for table in (phi_obs, phi_unobs, theta):
        np.fill_diagonal(table, 0.0)
    return base, theta, phi_obs, phi_unobs


def exact_h_components(pop: Population, probs: InclusionProbs) -> OracleReport:
    """Exact decomposition components by full enumeration of the sample space."""
    _require_enumerable(pop, probs)
    n_units = pop.unit_count
    pi = probs.first_order
    _, theta_table, phi_obs_table, phi_unobs_table = _population_tables(pop, probs)

    theta_bar = theta_table.sum(axis=1) / (n_units - 1.0)
    phi_bar_obs = phi_obs_table.sum(axis=1) / (n_units - 1.0)
    phi_bar_unobs = phi_unobs_table.sum(axis=1) / (n_units - 1.0)
    h1_obs = phi_bar_obs - theta_bar
    h1_unobs = phi_bar_unobs - theta_bar
    pair_count = n_units * (n_units - 1) / 2.0
    iu = np.triu_indices(n_units, k=1)
    theta_grand = float(theta_table[iu].sum() / pair_count)

    h1_mean_residual = float(np.max(np.abs(pi * h1_obs + (1.0 - pi) * h1_unobs)))

    point, proj, resid, weight = [], [], [], []
    reconstruction_residual = 0.0
    h2_mean = np.zeros((n_units, n_units))
    for mask in _mask_iter(n_units):
        prob = _mask_prob(mask, pi)
        ctx = build_kernel_context(pop, Sample.from_indicator(mask), probs)
        kernel = u_kernel_realized_matrix(ctx)
        h1 = np.where(mask == 1, h1_obs, h1_unobs)
        h2 = kernel - h1[:, None] - h1[None, :] - theta_table
        big_h1 = float(h1.mean())
        big_h2 = float(h2[iu].sum() / pair_count)
        gap = abs(ctx.point_estimate - (theta_grand + 2.0 * big_h1 + big_h2))
        reconstruction_residual = max(reconstruction_residual, gap)
        h2_mean += prob * h2
        point.append(ctx.point_estimate)
        proj.append(big_h1)
        resid.append(big_h2)
        weight.append(prob)

    point = np.asarray(point)
    proj = np.asarray(proj)
    resid = np.asarray(resid)
    weight = np.asarray(weight)
    exact_mean = float(np.sum(weight * point))
    exact_variance = float(np.sum(weight * (point - exact_mean) ** 2))
    proj_mean = float(np.sum(weight * proj))
    resid_mean = float(np.sum(weight * resid))
    tau1 = float(np.sum(weight * (proj - proj_mean) ** 2))
    tau2 = float(np.sum(weight * (resid - resid_mean) ** 2))
    omega12 = float(np.sum(weight * (proj - proj_mean) * (resid - resid_mean)))
    identity_residual = abs(exact_variance - 4.0 * tau1 - tau2 - 4.0 * omega12)
    np.fill_diagonal(h2_mean, 0.0)
    h2_mean_residual = float(np.max(np.abs(h2_mean)))

    norm = n_units - 1.0 / pi
    if np.all(norm > 0.0):
        gap_table = phi_obs_table - theta_table
        inner = (gap_table**2) @ ((1.0 - pi) / pi)
        tau1_bias_exact = float(
            np.sum(inner / norm**2 * pi / (1.0 - pi)) / n_units**2
        )
        plug_mean = gap_table.sum(axis=1) / norm
        tau1_plugin_target = float(
            np.sum(plug_mean**2 * pi / (1.0 - pi)) / n_units**2
        )
    else:
        # the weighted plug-in estimators are undefined when N <= 1/pi_i
        tau1_bias_exact = float("nan")
        tau1_plugin_target = float("nan")

    return OracleReport(
        exact_mean=exact_mean,
        exact_variance=exact_variance,
        tau1=tau1,
        tau2=tau2,
        omega12=omega12,
        theta=theta_grand,
        theta_table=theta_table,
        theta_bar_table=theta_bar,
        phi_bar_observed=phi_bar_obs,
        phi_bar_unobserved=phi_bar_unobs,
        identity_residual=identity_residual,
        reconstruction_residual=reconstruction_residual,
        prob_sum=float(weight.sum()),
        h1_mean_residual=h1_mean_residual,
        h2_mean_residual=h2_mean_residual,
        tau1_bias_exact=tau1_bias_exact,
        tau1_plugin_target=tau1_plugin_target,
    )


def enumerate_srswor_probs(n_units: int, n: int):
    """Exact srswor inclusion probabilities by enumerating all subsets.

    Returns ``(pi, pi_joint)`` as exact fractions; intended for validating
    the design formulas on tiny frames.
    """
    if n_units > 12:
        raise PreconditionError("srswor enumeration intended for tiny frames")
    total = 0
    first = [0] * n_units
    second = [[0] * n_units for _ in range(n_units)]
    for subset in itertools.combinations(range(n_units), n):
        total += 1
        for a in subset:
            first[a] += 1
        for a, b in itertools.combinations(subset, 2):
            second[a][b] += 1
            second[b][a] += 1
    pi = [Fraction(c, total) for c in first]
    joint = [[Fraction(c, total) for c in row] for row in second]
    return pi, joint
