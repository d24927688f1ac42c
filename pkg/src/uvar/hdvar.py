"""Exact-variance estimation via the H-decomposition of the GREG estimator.

The variance of the point estimate splits into projection (degree-1) and
residual (degree-2) components. Both are estimated from sampled units with
Horvitz-Thompson style weighting, each with an explicit correction for the
upward bias induced by plugging estimated conditional means into a square,
and floored at zero after correction.

The degree-2 component has two interchangeable implementations: a direct
O(N^2) reference (:func:`tau2a_hat_naive`) and an algebraic reduction
(:func:`tau2a_hat_fast`) that enumerates only sampled pairs, giving
O(n^2 + N) cost. They agree to floating-point accuracy and tests hold them
to that.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import PreconditionError
from .kernels import (
    KernelContext,
    pair_cond_mean,
    u_kernel_observed_matrix,
    u_kernel_realized_matrix,
)

__all__ = [
    "VarianceReport",
    "phi_bar",
    "theta_bar",
    "tau1_hat",
    "tau2a_hat_naive",
    "tau2a_hat_fast",
    "tau2a_bias_hat",
    "tau2a_bias_hat_literal",
    "tau2b_hat",
    "hd_variance",
]


@dataclass(frozen=True)
class VarianceReport:
    """All components of the H-decomposition variance estimate.

    ``hd_variance`` always equals ``4 * tau1_bcf + tau2_bcf``; the floor
    flags record whether either max-with-zero actually bit.
    """

    point_estimate: float
    tau1_hat: float
    tau1_bias_hat: float
    tau1_bcf: float
    tau2a_hat: float
    tau2a_bias_hat: float
    tau2b_hat: Optional[float]
    tau2_hat: float
    tau2_bcf: float
    hd_variance: float
    tau1_floor_active: bool
    tau2_floor_active: bool
    stage_seconds: dict


def _normalizers(ctx: KernelContext) -> np.ndarray:
    """The per-unit averaging denominators N - 1/pi_i, validated positive."""
    norm = ctx.unit_count - 1.0 / ctx.pi
    if np.any(norm <= 0.0):
        bad = (np.flatnonzero(norm <= 0.0) + 1).tolist()
        raise PreconditionError(
            f"averaging denominator N - 1/pi is not positive at units {bad}"
        )
    return norm


def _require_open_probs(ctx: KernelContext) -> None:
    if np.any(ctx.pi >= 1.0):
        bad = (np.flatnonzero(ctx.pi >= 1.0) + 1).tolist()
        raise PreconditionError(
            f"H-decomposition variance requires pi < 1 for every unit; "
            f"certainty units {bad}"
        )


def _tables(ctx: KernelContext) -> dict:
    """Sampled-pair case-value tables, built once per context.

    ``both[a, b]`` is the both-observed case value for sampled units a, b;
    ``phi1[a, b]`` the conditional mean given a observed; ``theta[a, b]``
    the unconditional pair mean. Diagonals are zeroed (not pair values).
    """
    if "hd_tables" in ctx.cache:
        return ctx.cache["hd_tables"]
    sampled = ctx.sampled
    n = sampled.size
    pi_s = ctx.pi[sampled]
    solo_s = ctx.solo_kernel[sampled]
    if n:
        both = u_kernel_observed_matrix(ctx, sampled)
        np.fill_diagonal(both, 0.0)
        phi1 = both * pi_s[None, :] + solo_s[:, None] * (1.0 - pi_s)[None, :]
        theta = (
            both * np.outer(pi_s, pi_s)
            + solo_s[:, None] * (pi_s[:, None] * (1.0 - pi_s)[None, :])
            + solo_s[None, :] * ((1.0 - pi_s)[:, None] * pi_s[None, :])
        )
        np.fill_diagonal(phi1, 0.0)
        np.fill_diagonal(theta, 0.0)
    else:
        both = np.zeros((0, 0))
        phi1 = np.zeros((0, 0))
        theta = np.zeros((0, 0))
    tables = {"both": both, "phi1": phi1, "theta": theta, "pi_s": pi_s, "solo_s": solo_s}
    ctx.cache["hd_tables"] = tables
    return tables


def _phi_hat_observed(ctx: KernelContext) -> np.ndarray:
    """Plug-in estimates of the observed-branch conditional means, all i in S."""
    if "phi_hat_obs" in ctx.cache:
        return ctx.cache["phi_hat_obs"]
    tables = _tables(ctx)
    norm = _normalizers(ctx)[ctx.sampled]
    weights = 1.0 / tables["pi_s"]
    est = (tables["phi1"] @ weights) / norm
    ctx.cache["phi_hat_obs"] = est
    return est


def _theta_hat(ctx: KernelContext) -> np.ndarray:
    if "theta_hat" in ctx.cache:
        return ctx.cache["theta_hat"]
    tables = _tables(ctx)
    norm = _normalizers(ctx)[ctx.sampled]
    weights = 1.0 / tables["pi_s"]
    est = (tables["theta"] @ weights) / norm
    ctx.cache["theta_hat"] = est
    return est


def _phi_hat_realized(ctx: KernelContext) -> np.ndarray:
    """Length-N realized-status plug-ins: observed branch for sampled units,
    the shared unobserved-branch value otherwise."""
    if "phi_hat_z" in ctx.cache:
        return ctx.cache["phi_hat_z"]
    norm = _normalizers(ctx)
    sampled = ctx.sampled
    total_solo = float(ctx.solo_kernel[sampled].sum()) if sampled.size else 0.0
    est = np.full(ctx.unit_count, total_solo) / norm
    if sampled.size:
        est[sampled] = _phi_hat_observed(ctx)
    ctx.cache["phi_hat_z"] = est
    return est


def phi_bar(ctx: KernelContext, i: int, status: str = "realized") -> float:
    """Weighted plug-in estimate of a unit's averaged conditional kernel mean.

    ``status`` is ``"realized"`` (use the unit's realized indicator branch)
    or ``"force_observed"`` (always the observed branch). For an
    out-of-sample unit the realized branch reduces to the shared sum of
    sampled solo values over this unit's denominator.
    """
    if status not in ("realized", "force_observed"):
        raise PreconditionError(f"unknown status {status!r}")
    norm = float(_normalizers(ctx)[i - 1])
    in_sample = i in ctx.sample
    sampled = ctx.sampled
    if status == "force_observed" or in_sample:
        total = 0.0
        for b in sampled:
            if b == i - 1:
                continue
            total += pair_cond_mean(ctx, i, b + 1, 1) / ctx.pi[b]
        return total / norm
    return float(ctx.solo_kernel[sampled].sum()) / norm


def theta_bar(ctx: KernelContext, i: int) -> float:
    """Weighted plug-in estimate of a sampled unit's averaged kernel mean."""
    if i not in ctx.sample:
        raise PreconditionError(f"unit {i} is not in the sample")
    from .kernels import pair_mean

    norm = float(_normalizers(ctx)[i - 1])
    total = 0.0
    for b in ctx.sampled:
        if b == i - 1:
            continue
        total += pair_mean(ctx, i, b + 1) / ctx.pi[b]
    return total / norm


def tau1_hat(ctx: KernelContext) -> tuple[float, float, float]:
    """Projection-component estimate, its bias estimate, and the floored value.

    Returns ``(tau1_hat, tau1_bias_hat, tau1_bcf)`` where the last is
    ``max(tau1_hat - tau1_bias_hat, 0)``.
    """
    sampled = ctx.sampled
    pi_s = ctx.pi[sampled]
    if np.any(pi_s >= 1.0):
        bad = (sampled[pi_s >= 1.0] + 1).tolist()
        raise PreconditionError(f"sampled certainty units {bad} (pi = 1)")
    if sampled.size == 0:
        return 0.0, 0.0, 0.0
    n_units = ctx.unit_count
    tables = _tables(ctx)
    norm_s = _normalizers(ctx)[sampled]
    gap = _phi_hat_observed(ctx) - _theta_hat(ctx)
    value = float(np.sum(gap**2 / (1.0 - pi_s)) / n_units**2)
    spread = (tables["phi1"] - tables["theta"]) ** 2
    inner = spread @ ((1.0 - pi_s) / pi_s**2)
    bias = float(
        np.sum(inner / norm_s**2 / (1.0 - pi_s)) / n_units**2
    )
    return value, bias, max(value - bias, 0.0)


def tau2a_hat_naive(ctx: KernelContext) -> float:
    """Direct O(N^2) evaluation of the residual-component sum.

    Reference implementation; numpy's pairwise summation keeps the large
    reduction accurate and independent of chunking.
    """
    kernel = u_kernel_realized_matrix(ctx)
    plug = _phi_hat_realized(ctx)
    dev = kernel - plug[:, None] - plug[None, :] + ctx.point_estimate
    upper = np.triu_indices(ctx.unit_count, k=1)
    return float(np.sum(dev[upper] ** 2))


def tau2a_hat_fast(ctx: KernelContext) -> float:
    """Algebraically reduced residual-component sum, O(n^2 + N).

    Expands each pair term around ``d_i = plug_i - a_hat / 2``; pairs with
    both units out of sample have zero kernel, mixed pairs use the sampled
    unit's solo value, and only sampled pairs need explicit enumeration.
    """
    n_units = ctx.unit_count
    sampled = ctx.sampled
    n = sampled.size
    d = _phi_hat_realized(ctx) - ctx.point_estimate / 2.0
    d_total = float(d.sum())
    d_sq_total = float(np.sum(d**2))
    quad = (n_units - 2.0) * d_sq_total + d_total**2
    if n == 0:
        return quad
    both = u_kernel_observed_matrix(ctx, sampled)
    np.fill_diagonal(both, 0.0)
    iu = np.triu_indices(n, k=1)
    pair_vals = both[iu]
    d_s = d[sampled]
    kernel_sq = float(np.sum(pair_vals**2))
    cross_sampled = float(np.sum(pair_vals * (d_s[iu[0]] + d_s[iu[1]])))
    solo_s = ctx.solo_kernel[sampled]
    out_count = n_units - n
    d_out_total = d_total - float(d_s.sum())
    kernel_sq += out_count * float(np.sum(solo_s**2))
    cross_mixed = float(np.sum(solo_s * (out_count * d_s + d_out_total)))
    return kernel_sq - 2.0 * (cross_sampled + cross_mixed) + quad


def tau2a_bias_hat(ctx: KernelContext) -> float:
    """Bias estimate for the residual-component sum, vectorized form.

    Runs over unordered sampled pairs with pair weight 1/(pi_i pi_j); the
    inner accumulation over sampled k is shared through a Gram matrix so the
    whole evaluation is three dense matrix products.
    """
    sampled = ctx.sampled
    n = sampled.size
    if n == 0:
        return 0.0
    tables = _tables(ctx)
    pi_s = tables["pi_s"]
    norm_s = _normalizers(ctx)[sampled]
    phi1 = tables["phi1"]
    u = (1.0 - pi_s) / pi_s**2
    # inner(i, j) = sum_k u_k (phi1[i, k] + phi1[j, k])^2, zero-diagonal phi1
    # already encodes the k != i, k != j indicators.
    q = phi1**2 @ u
    gram = (phi1 * u[None, :]) @ phi1.T
    inner = q[:, None] + q[None, :] + 2.0 * gram
    prefac = (1.0 / norm_s[:, None] + 1.0 / norm_s[None, :]) ** 2
    pair_w = 1.0 / np.outer(pi_s, pi_s)
    terms = prefac * inner * pair_w
    iu = np.triu_indices(n, k=1)
    return float(np.sum(terms[iu]))


def tau2a_bias_hat_literal(ctx: KernelContext) -> float:
    """Same quantity evaluated term by term from scalar kernel calls.

    Independent of the vectorized tables; used to cross-check
    :func:`tau2a_bias_hat`. Quadratic-in-n loop with a linear inner sum,
    so only suitable for small samples.
    """
    sampled_units = (ctx.sampled + 1).tolist()
    n_units = ctx.unit_count
    pi = ctx.pi
    total = 0.0
    for ai, i in enumerate(sampled_units):
        for j in sampled_units[ai + 1 :]:
            denom_i = n_units - 1.0 / pi[i - 1]
            denom_j = n_units - 1.0 / pi[j - 1]
            prefac = ((2 * n_units - 1.0 / pi[i - 1] - 1.0 / pi[j - 1]) / (denom_i * denom_j)) ** 2
            inner = 0.0
            for k in sampled_units:
                term = 0.0
                if k != i:
                    term += pair_cond_mean(ctx, i, k, 1)
                if k != j:
                    term += pair_cond_mean(ctx, j, k, 1)
                inner += (1.0 - pi[k - 1]) / pi[k - 1] ** 2 * term**2
            total += prefac * inner / (pi[i - 1] * pi[j - 1])
    return total


def tau2b_hat(ctx: KernelContext) -> float:
    """Secondary residual term from sampled pairs of kernel means."""
    sampled = ctx.sampled
    n = sampled.size
    if n < 2:
        return 0.0
    tables = _tables(ctx)
    theta_hat_s = _theta_hat(ctx)
    dev = (
        tables["theta"]
        - theta_hat_s[:, None]
        - theta_hat_s[None, :]
        + ctx.point_estimate
    )
    pair_w = 1.0 / np.outer(tables["pi_s"], tables["pi_s"])
    iu = np.triu_indices(n, k=1)
    return float(np.sum(dev[iu] ** 2 * pair_w[iu]))


def hd_variance(
    ctx: KernelContext, include_tau2b: bool = False, fast: bool = True
) -> VarianceReport:
    """Assemble the full variance estimate with per-stage wall times.

    ``include_tau2b`` additionally subtracts the secondary residual term
    before flooring; ``fast`` selects the reduced degree-2 path.
    """
    _require_open_probs(ctx)
    _normalizers(ctx)
    n_units = ctx.unit_count
    stages = {}

    start = time.perf_counter()
    tau1, tau1_bias, tau1_bcf = tau1_hat(ctx)
    stages["tau1"] = time.perf_counter() - start

    start = time.perf_counter()
    tau2a = tau2a_hat_fast(ctx) if fast else tau2a_hat_naive(ctx)
    stages["tau2a"] = time.perf_counter() - start

    start = time.perf_counter()
    tau2a_bias = tau2a_bias_hat(ctx)
    stages["tau2a_bias"] = time.perf_counter() - start

    tau2b = None
    subtract = tau2a_bias
    if include_tau2b:
        start = time.perf_counter()
        tau2b = tau2b_hat(ctx)
        stages["tau2b"] = time.perf_counter() - start
        subtract = subtract + tau2b

    scale = 4.0 / (n_units**2 * (n_units - 1.0) ** 2)
    tau2 = scale * (tau2a - subtract)
    tau2_bcf = max(tau2, 0.0)
    return VarianceReport(
        point_estimate=ctx.point_estimate,
        tau1_hat=tau1,
        tau1_bias_hat=tau1_bias,
        tau1_bcf=tau1_bcf,
        tau2a_hat=tau2a,
        tau2a_bias_hat=tau2a_bias,
        tau2b_hat=tau2b,
        tau2_hat=tau2,
        tau2_bcf=tau2_bcf,
        hd_variance=4.0 * tau1_bcf + tau2_bcf,
        tau1_floor_active=tau1 - tau1_bias < 0.0,
        tau2_floor_active=tau2 < 0.0,
        stage_seconds=stages,
    )
