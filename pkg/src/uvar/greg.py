"""Point estimators: Horvitz-Thompson, difference, and model-assisted GREG.

The GREG working model is weighted least squares with the survey weights,
except that the covariate cross-moment matrix is computed exactly over the
population rather than estimated from the sample. Its inverse therefore
depends only on the frame, never on which units were drawn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularDesignError
from .frame import InclusionProbs, Population, Sample

__all__ = [
    "GregFit",
    "estimate_ht",
    "ht_variance_estimate",
    "estimate_difference",
    "fit_greg",
    "estimate_greg",
]

PIVOT_RTOL = 1e-12


def _spd_inverse(mat: np.ndarray) -> np.ndarray:
    """Invert a symmetric positive definite matrix via a checked Cholesky.

    Pivots below ``PIVOT_RTOL`` times the largest diagonal entry raise
    :class:`SingularDesignError` naming the offending pivot (1-based).
    p is small here, so the explicit loop costs nothing and strictness
    beats recovery.
    """
    p = mat.shape[0]
    tol = PIVOT_RTOL * float(np.max(np.diag(mat)))
    lower = np.zeros_like(mat)
    for k in range(p):
        pivot = mat[k, k] - np.dot(lower[k, :k], lower[k, :k])
        if pivot <= tol:
            raise SingularDesignError(k + 1, float(pivot), tol)
        lower[k, k] = np.sqrt(pivot)
        if k + 1 < p:
            lower[k + 1 :, k] = (
                mat[k + 1 :, k] - lower[k + 1 :, :k] @ lower[k, :k]
            ) / lower[k, k]
    inv_lower = np.linalg.solve(lower, np.eye(p))
    inverse = inv_lower.T @ inv_lower
    return (inverse + inverse.T) / 2.0


@dataclass(frozen=True)
class GregFit:
    """Fitted GREG working model.

    ``cross_moment_inv`` is the exact inverse population cross-moment matrix
    (sample-independent); ``coefficients`` are the weighted-least-squares
    coefficients from the realized sample.
    """

    cross_moment_inv: np.ndarray
    covariate_total: np.ndarray
    ht_crossmoment: np.ndarray
    coefficients: np.ndarray

    def predict(self, x0: np.ndarray) -> np.ndarray:
        """Working-model prediction(s) at covariate row(s) ``x0``."""
        return np.asarray(x0) @ self.coefficients


def estimate_ht(pop: Population, sample: Sample, probs: InclusionProbs) -> float:
    """Horvitz-Thompson estimate of the population mean of the outcome."""
    idx = sample.indices - 1
    if idx.size == 0:
        return 0.0
    return float(np.sum(pop.y[idx] / probs.first_order[idx]) / pop.unit_count)


def ht_variance_estimate(
    pop: Population, sample: Sample, probs: InclusionProbs, design=None
) -> float:
    """Variance estimate for the HT mean from the realized sample.

    For independent designs this is the diagonal-only sum
    ``(1/N^2) * sum (1 - pi_i) y_i^2 / pi_i^2``; otherwise the full
    double sum over sampled pairs weighted by ``delta_ij / pi_ij``.
    """
    return _quadratic_variance(pop.y, pop, sample, probs)


def _quadratic_variance(
    values: np.ndarray, pop: Population, sample: Sample, probs: InclusionProbs
) -> float:
    idx = sample.indices - 1
    if idx.size == 0:
        return 0.0
    n_units = pop.unit_count
    pi = probs.first_order[idx]
    scaled = values[idx] / pi
    if probs.kind == "independent":
        return float(np.sum((1.0 - pi) * scaled**2) / n_units**2)
    joint = probs.joint_matrix(sample.indices)
    delta = joint - np.outer(pi, pi)
    np.fill_diagonal(delta, pi * (1.0 - pi))
    weights = delta / joint
    return float(scaled @ weights @ scaled / n_units**2)


def estimate_difference(
    pop: Population,
    sample: Sample,
    probs: InclusionProbs,
    external_predictions: np.ndarray,
) -> float:
    """Difference estimator built on fixed, externally supplied predictions.

    ``external_predictions`` must not have been fit to this sample; the
    caller owns that contract.
    """
    preds = np.asarray(external_predictions, dtype=float)
    idx = sample.indices - 1
    correction = 0.0
    if idx.size:
        correction = np.sum((pop.y[idx] - preds[idx]) / probs.first_order[idx])
    return float((preds.sum() + correction) / pop.unit_count)


def fit_greg(pop: Population, sample: Sample, probs: InclusionProbs) -> GregFit:
    """Fit the weighted-least-squares working model.

    Raises :class:`SingularDesignError` when the population cross-moment
    matrix is numerically rank deficient.
    """
    cross_moment = pop.x.T @ pop.x
    inv = _spd_inverse(cross_moment)
    idx = sample.indices - 1
    if idx.size:
        weighted = pop.y[idx] / probs.first_order[idx]
        ht_cross = pop.x[idx].T @ weighted
    else:
        ht_cross = np.zeros(pop.covariate_count)
    return GregFit(
        cross_moment_inv=inv,
        covariate_total=pop.covariate_total,
        ht_crossmoment=ht_cross,
        coefficients=inv @ ht_cross,
    )


def estimate_greg(pop: Population, sample: Sample, probs: InclusionProbs) -> float:
    """Model-assisted estimate: mean prediction plus HT-weighted residuals."""
    fit = fit_greg(pop, sample, probs)
    predictions = pop.x @ fit.coefficients
    idx = sample.indices - 1
    correction = 0.0
    if idx.size:
        correction = np.sum((pop.y[idx] - predictions[idx]) / probs.first_order[idx])
    return float((predictions.sum() + correction) / pop.unit_count)
