"""Degree-2 kernels underlying the U/V-statistic form of the GREG estimator.

The model-assisted estimate can be rewritten as the average of a symmetric
pair kernel over the whole frame: with replacement (V-statistic form,
:func:`v_kernel`) or without (U-statistic form, :func:`u_kernel`). The
randomness of a kernel evaluation sits entirely in the two membership
indicators, so each pair has four case values; :func:`u_kernel` evaluates
the case selected by explicit indicator arguments, which is what the
pair-level means :func:`pair_mean` and :func:`pair_cond_mean` need.

Everything here is O(p) per evaluation after a one-time O(Np) context
build; matrix builders provide the vectorized bulk paths the variance
estimators use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PreconditionError
from .frame import InclusionProbs, Population, Sample
from .greg import fit_greg

__all__ = [
    "KernelContext",
    "build_kernel_context",
    "v_kernel",
    "u_kernel",
    "u_kernel_realized",
    "pair_mean",
    "pair_cond_mean",
    "v_statistic_average",
    "u_statistic_average",
]


@dataclass(frozen=True)
class KernelContext:
    """Precomputed per-unit quantities shared by all kernel evaluations.

    Arrays are aligned with units 1..N (stored 0-based internally).

    - ``reg_component`` is the population-regression term t_x' Q x_i.
    - ``self_form`` is x_i' Q x_i.
    - ``weighted_y`` is y_i I_i / pi_i.
    - ``diag_realized`` is the realized diagonal kernel value
      v_kernel(i, i); zero for out-of-sample units.
    - ``diag_observed`` is the same diagonal with unit i treated as
      observed, needed by the indicator-conditioned case values.
    - ``solo_kernel`` is the U-kernel case value when exactly the given
      unit of a pair is observed. It does not depend on the partner. For
      in-sample units it coincides with the realized mixed-pair value.

    The context is read-only after construction apart from ``cache``,
    which downstream estimators fill once with derived tables.
    """

    pop: Population
    sample: Sample
    probs: InclusionProbs
    cross_moment_inv: np.ndarray
    proj_x: np.ndarray
    reg_component: np.ndarray
    self_form: np.ndarray
    weighted_y: np.ndarray
    diag_realized: np.ndarray
    diag_observed: np.ndarray
    solo_kernel: np.ndarray
    point_estimate: float
    cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def unit_count(self) -> int:
        return self.pop.unit_count

    @property
    def sample_size(self) -> int:
        return self.sample.size

    @property
    def pi(self) -> np.ndarray:
        return self.probs.first_order

    @property
    def indicator(self) -> np.ndarray:
        return self.cache["indicator"]

    @property
    def sampled(self) -> np.ndarray:
        """0-based positions of the sampled units."""
        return self.sample.indices - 1

    @property
    def pair_scale(self) -> float:
        """The (N - 1) / (2N) prefactor shared by all U-kernel cases."""
        n_units = self.unit_count
        return (n_units - 1) / (2.0 * n_units)


def build_kernel_context(
    pop: Population, sample: Sample, probs: InclusionProbs
) -> KernelContext:
    """Precompute kernel ingredients for one (population, sample) pair."""
    n_units = pop.unit_count
    fit = fit_greg(pop, sample, probs)
    pi = probs.first_order
    indicator = sample.indicator().astype(float)
    proj_x = pop.x @ fit.cross_moment_inv
    reg_component = proj_x @ pop.covariate_total
    self_form = np.einsum("ij,ij->i", proj_x, pop.x)
    weighted_y = pop.y * indicator / pi
    diag_realized = (1.0 + reg_component - n_units * self_form * indicator / pi) * weighted_y
    diag_observed = (1.0 + reg_component - n_units * self_form / pi) * (pop.y / pi)
    scale = (n_units - 1) / (2.0 * n_units)
    solo_kernel = scale * (
        (1.0 + reg_component) * pop.y / pi + diag_observed / (n_units - 1)
    )
    predictions = pop.x @ fit.coefficients
    idx = sample.indices - 1
    correction = (
        np.sum((pop.y[idx] - predictions[idx]) / pi[idx]) if idx.size else 0.0
    )
    point_estimate = float((predictions.sum() + correction) / n_units)
    ctx = KernelContext(
        pop=pop,
        sample=sample,
        probs=probs,
        cross_moment_inv=fit.cross_moment_inv,
        proj_x=proj_x,
        reg_component=reg_component,
        self_form=self_form,
        weighted_y=weighted_y,
        diag_realized=diag_realized,
        diag_observed=diag_observed,
        solo_kernel=solo_kernel,
        point_estimate=point_estimate,
    )
    ctx.cache["indicator"] = indicator
    return ctx


def _check_pair(i: int, j: int) -> None:
    if i == j:
        raise PreconditionError("pair kernels require two distinct units")


def v_kernel(ctx: KernelContext, i: int, j: int) -> float:
    """Realized symmetric pair kernel of the V-statistic form (1-based units).

    ``i == j`` is allowed; the diagonal values feed the U-kernel cases.
    """
    a, b = i - 1, j - 1
    n_units = ctx.unit_count
    q_ab = float(ctx.proj_x[a] @ ctx.pop.x[b])
    ind = ctx.indicator
    pi = ctx.pi
    term_ab = (1.0 + ctx.reg_component[a] - n_units * q_ab * ind[b] / pi[b]) * ctx.weighted_y[a]
    term_ba = (1.0 + ctx.reg_component[b] - n_units * q_ab * ind[a] / pi[a]) * ctx.weighted_y[b]
    return 0.5 * (term_ab + term_ba)


def u_kernel(ctx: KernelContext, i: int, j: int, i_observed: int, j_observed: int) -> float:
    """U-kernel case value for distinct units with indicators forced.

    All occurrences of the two membership indicators, including the ones
    inside the diagonal terms, take the requested values; this is the
    deterministic quantity the pair means average over.
    """
    _check_pair(i, j)
    if not i_observed and not j_observed:
        return 0.0
    if i_observed and not j_observed:
        return float(ctx.solo_kernel[i - 1])
    if j_observed and not i_observed:
        return float(ctx.solo_kernel[j - 1])
    a, b = i - 1, j - 1
    n_units = ctx.unit_count
    pi = ctx.pi
    y = ctx.pop.y
    q_ab = float(ctx.proj_x[a] @ ctx.pop.x[b])
    term_ab = (1.0 + ctx.reg_component[a] - n_units * q_ab / pi[b]) * y[a] / pi[a]
    term_ba = (1.0 + ctx.reg_component[b] - n_units * q_ab / pi[a]) * y[b] / pi[b]
    both = 0.5 * (term_ab + term_ba)
    return ctx.pair_scale * (
        2.0 * both
        + (ctx.diag_observed[a] + ctx.diag_observed[b]) / (n_units - 1)
    )


def u_kernel_realized(ctx: KernelContext, i: int, j: int) -> float:
    """U-kernel at the realized sample's indicators."""
    ind = ctx.indicator
    return u_kernel(ctx, i, j, int(ind[i - 1]), int(ind[j - 1]))


def pair_mean(ctx: KernelContext, i: int, j: int) -> float:
    """Expectation of the pair's U-kernel over its two indicators."""
    _check_pair(i, j)
    pi_i = ctx.pi[i - 1]
    pi_j = ctx.pi[j - 1]
    both = u_kernel(ctx, i, j, 1, 1)
    return float(
        both * pi_i * pi_j
        + ctx.solo_kernel[i - 1] * pi_i * (1.0 - pi_j)
        + ctx.solo_kernel[j - 1] * (1.0 - pi_i) * pi_j
    )


def pair_cond_mean(ctx: KernelContext, i: int, j: int, i_observed: int) -> float:
    """Expectation of the pair's U-kernel given unit i's indicator."""
    _check_pair(i, j)
    pi_j = ctx.pi[j - 1]
    if i_observed:
        both = u_kernel(ctx, i, j, 1, 1)
        return float(both * pi_j + ctx.solo_kernel[i - 1] * (1.0 - pi_j))
    return float(ctx.solo_kernel[j - 1] * pi_j)


# ---------------------------------------------------------------------------
# vectorized bulk builders
# ---------------------------------------------------------------------------


def v_kernel_matrix(ctx: KernelContext, idx0: Optional[np.ndarray] = None) -> np.ndarray:
    """Realized V-kernel values for all pairs of the given 0-based indices."""
    if idx0 is None:
        idx0 = np.arange(ctx.unit_count)
    quad = ctx.proj_x[idx0] @ ctx.pop.x[idx0].T
    n_units = ctx.unit_count
    scaled_ind = (ctx.indicator / ctx.pi)[idx0]
    w = ctx.weighted_y[idx0]
    term = (1.0 + ctx.reg_component[idx0])[:, None] * w[:, None] - (
        n_units * quad * scaled_ind[None, :]
    ) * w[:, None]
    return 0.5 * (term + term.T)


def u_kernel_observed_matrix(ctx: KernelContext, idx0: np.ndarray) -> np.ndarray:
    """Case values with both units forced observed, for all index pairs.

    The diagonal of the returned matrix is not a pair value and must be
    masked by callers.
    """
    quad = ctx.proj_x[idx0] @ ctx.pop.x[idx0].T
    n_units = ctx.unit_count
    pi = ctx.pi[idx0]
    u = ctx.pop.y[idx0] / pi
    term = (1.0 + ctx.reg_component[idx0])[:, None] * u[:, None] - (
        n_units * quad / pi[None, :]
    ) * u[:, None]
    both = 0.5 * (term + term.T)
    diag = ctx.diag_observed[idx0]
    return ctx.pair_scale * (
        2.0 * both + (diag[:, None] + diag[None, :]) / (n_units - 1)
    )


def u_kernel_realized_matrix(ctx: KernelContext) -> np.ndarray:
    """Realized U-kernel for every pair of units (diagonal zeroed)."""
    full = v_kernel_matrix(ctx)
    diag = ctx.diag_realized
    n_units = ctx.unit_count
    out = ctx.pair_scale * (
        2.0 * full + (diag[:, None] + diag[None, :]) / (n_units - 1)
    )
    np.fill_diagonal(out, 0.0)
    return out


def u_kernel_row_sums(ctx: KernelContext) -> np.ndarray:
    """Realized sums over partners, sum_{j != i} u_kernel(i, j), in O(n^2 + N).

    Pairs with both units out of sample contribute zero; a mixed pair
    contributes the sampled unit's solo value; in-sample pairs need the
    both-observed case values.
    """
    n_units = ctx.unit_count
    sampled = ctx.sampled
    n = sampled.size
    rows = np.zeros(n_units)
    solo_in_sample_total = float(ctx.solo_kernel[sampled].sum()) if n else 0.0
    rows[:] = solo_in_sample_total
    if n:
        both = u_kernel_observed_matrix(ctx, sampled)
        np.fill_diagonal(both, 0.0)
        rows[sampled] = both.sum(axis=1) + (n_units - n) * ctx.solo_kernel[sampled]
    return rows


def v_statistic_average(ctx: KernelContext) -> float:
    """Brute-force average of the realized V-kernel over all N^2 pairs."""
    return float(v_kernel_matrix(ctx).sum() / ctx.unit_count**2)


def u_statistic_average(ctx: KernelContext) -> float:
    """Brute-force average of the realized U-kernel over all unordered pairs."""
    n_units = ctx.unit_count
    total = float(np.triu(u_kernel_realized_matrix(ctx), k=1).sum())
    return total / (n_units * (n_units - 1) / 2.0)
