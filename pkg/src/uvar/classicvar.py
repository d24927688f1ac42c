"""Comparator variance estimators.

``asymptotic_variance`` plugs working-model residuals into the
Horvitz-Thompson variance form, which ignores the uncertainty of the
fitted model. ``ij_bm_variance`` is the balanced-method form of the
infinitesimal jackknife: the sample variance of the per-unit averages of
all realized pair kernels containing each unit, scaled to target four
times the projection component. ``ij_direct_tau1`` evaluates the
covariance-form infinitesimal jackknife directly and exists as the slow
reference the balanced method is checked against; the two agree exactly
up to the fixed factor (N-1)/N.

Note on scaling: the residual quadratic form is divided by N^2 so that it
targets the variance of the estimated mean, keeping it commensurate with
the H-decomposition estimator and the empirical variance of the point
estimates.
"""

from __future__ import annotations

import numpy as np

from .errors import PreconditionError
from .frame import InclusionProbs, Population, Sample
from .greg import GregFit, _quadratic_variance
from .kernels import (
    KernelContext,
    u_kernel_realized_matrix,
    u_kernel_row_sums,
)

__all__ = ["asymptotic_variance", "ij_bm_variance", "ij_direct_tau1"]

IJ_DIRECT_MAX_UNITS = 400


def asymptotic_variance(
    pop: Population,
    sample: Sample,
    probs: InclusionProbs,
    fit: GregFit,
    design=None,
) -> float:
    """Residual-based variance estimate for the model-assisted mean.

    For independent designs this reduces exactly to
    ``(1/N^2) sum (1 - pi_i) e_i^2 / pi_i^2`` over the sample, where e are
    the working-model residuals.
    """
    residuals = pop.y - pop.x @ fit.coefficients
    return _quadratic_variance(residuals, pop, sample, probs)


def ij_bm_variance(ctx: KernelContext) -> tuple[float, float]:
    """Balanced-method infinitesimal jackknife: ``(tau1_bm, variance)``.

    For every unit in the frame, average the realized pair kernels that
    contain it, then take the scaled spread of those averages around the
    point estimate. The variance estimate is four times the component.
    """
    n_units = ctx.unit_count
    if n_units < 3:
        raise PreconditionError("balanced-method variance needs at least 3 units")
    unit_means = u_kernel_row_sums(ctx) / (n_units - 1.0)
    scale = (n_units - 1.0) ** 2 / (n_units**2 * (n_units - 2.0) ** 2)
    tau1_bm = scale * float(np.sum((unit_means - ctx.point_estimate) ** 2))
    return tau1_bm, 4.0 * tau1_bm


def ij_direct_tau1(ctx: KernelContext) -> float:
    """Covariance-form infinitesimal jackknife, evaluated literally.

    For each unit l, correlates pair membership against the realized
    kernel values over all unordered pairs, keeping the centering term
    that is only analytically zero. Quadratic memory and cubic-ish work;
    capped at ``IJ_DIRECT_MAX_UNITS`` because it exists to cross-check
    :func:`ij_bm_variance`, not for production use.
    """
    n_units = ctx.unit_count
    if n_units > IJ_DIRECT_MAX_UNITS:
        raise PreconditionError(
            f"direct infinitesimal jackknife capped at {IJ_DIRECT_MAX_UNITS} units"
        )
    if n_units < 3:
        raise PreconditionError("infinitesimal jackknife needs at least 3 units")
    kernel = u_kernel_realized_matrix(ctx)
    centered = kernel - ctx.point_estimate
    np.fill_diagonal(centered, 0.0)
    iu = np.triu_indices(n_units, k=1)
    total = float(np.sum(centered[iu]))
    # sum over pairs containing l equals the matrix row sum; each row picks
    # up (delta - 2/N) weights as rowsum - (2/N) * total.
    row = centered.sum(axis=1)
    terms = row - (2.0 / n_units) * total
    scale = 1.0 / (n_units * (n_units - 1.0) * (n_units - 2.0) ** 2)
    return scale * float(np.sum(terms**2))
