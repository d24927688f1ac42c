"""Core domain types: population frame, realized sample, inclusion probabilities.

All types are immutable value objects. Downstream estimators are pure
functions of ``(Population, Sample, InclusionProbs)``, so instances can be
shared freely across workers. Units are indexed 1..N internally regardless
of any source-file identifiers; loaders keep an id -> index map for
reporting only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError

__all__ = ["Population", "Sample", "InclusionProbs", "validate_population"]


def _frozen_array(values, dtype=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Population:
    """A fixed finite population of N units.

    Parameters
    ----------
    y : array-like, shape (N,)
        Outcome value per unit.
    x : array-like, shape (N, p)
        Covariate rows. An intercept is NOT added implicitly; include a
        constant column explicitly if the working model needs one.
    stratum : array-like of str, shape (N,), optional
        Stratum label per unit; must be total if present.
    cluster : array-like of str, shape (N,), optional
        Cluster label per unit; must be total if present.
    size_measure : array-like, shape (N,), optional
        Positive size measure per unit (drives Poisson designs).
    unit_ids : array-like of str, shape (N,), optional
        Source identifiers, kept for reporting only. Internally unit i is
        just index i in 1..N.
    """

    y: np.ndarray
    x: np.ndarray
    stratum: Optional[np.ndarray] = None
    cluster: Optional[np.ndarray] = None
    size_measure: Optional[np.ndarray] = None
    unit_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen_array(self.y, dtype=float))
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[0] == 1 and len(self.y) != 1:
            x = x.T
        object.__setattr__(self, "x", _frozen_array(x, dtype=float))
        for name in ("stratum", "cluster", "unit_ids"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _frozen_array([str(v) for v in value]))
        if self.size_measure is not None:
            object.__setattr__(
                self, "size_measure", _frozen_array(self.size_measure, dtype=float)
            )

    @property
    def unit_count(self) -> int:
        return self.y.shape[0]

    @property
    def covariate_count(self) -> int:
        return self.x.shape[1]

    @property
    def mean_outcome(self) -> float:
        """Population average of the outcome (the estimand)."""
        return float(np.mean(self.y))

    @property
    def covariate_total(self) -> np.ndarray:
        """Column sums of the covariate matrix."""
        return self.x.sum(axis=0)


@dataclass(frozen=True)
class Sample:
    """A realized sample: strictly increasing 1-based unit indices.

    The sample is the sole source of randomness in the design-based setup;
    everything else is a fixed function of the population.
    """

    indices: np.ndarray
    unit_count: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        idx = _frozen_array(idx, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        if idx.size:
            if idx.min() < 1 or idx.max() > self.unit_count:
                raise DataError(
                    f"sample indices must lie in 1..{self.unit_count}, "
                    f"got range [{idx.min()}, {idx.max()}]"
                )
            if np.any(np.diff(idx) <= 0):
                raise DataError("sample indices must be strictly increasing")

    @classmethod
    def from_indicator(cls, indicator) -> "Sample":
        ind = np.asarray(indicator)
        return cls(indices=np.flatnonzero(ind) + 1, unit_count=ind.shape[0])

    @property
    def size(self) -> int:
        return int(self.indices.size)

    def indicator(self) -> np.ndarray:
        """0/1 membership vector over units 1..N."""
        ind = np.zeros(self.unit_count, dtype=np.int64)
        ind[self.indices - 1] = 1
        return ind

    def __contains__(self, unit: int) -> bool:
        pos = np.searchsorted(self.indices, unit)
        return pos < self.indices.size and self.indices[pos] == unit


@dataclass(frozen=True)
class InclusionProbs:
    """First-order inclusion probabilities plus a pairwise-probability rule.

    ``kind`` selects the pairwise rule:

    - ``independent``: pi_ij = pi_i * pi_j (Bernoulli / Poisson sampling);
    - ``srswor``: one shared pi_ij for all pairs;
    - ``stratified``: per-stratum srswor pairs, cross-stratum independent;
    - ``two_stage_cluster``: same-cluster and cross-cluster product rules.

    ``group`` holds integer stratum/cluster codes, ``same_group_joint`` the
    pairwise probability for a same-group pair (per group), and
    ``stage_one_pair`` the probability both of two distinct clusters are
    selected (cluster designs only).
    """

    first_order: np.ndarray
    kind: str = "independent"
    pair_joint: Optional[float] = None
    group: Optional[np.ndarray] = None
    same_group_joint: Optional[np.ndarray] = None
    stage_one_single: Optional[float] = None
    stage_one_pair: Optional[float] = None

    def __post_init__(self):
        pi = _frozen_array(self.first_order, dtype=float)
        object.__setattr__(self, "first_order", pi)
        if np.any(pi <= 0.0) or np.any(pi > 1.0):
            bad = np.flatnonzero((pi <= 0.0) | (pi > 1.0)) + 1
            raise DataError(f"first-order probabilities outside (0, 1] at units {bad.tolist()}")
        if self.group is not None:
            object.__setattr__(self, "group", _frozen_array(self.group, dtype=np.int64))
        if self.same_group_joint is not None:
            object.__setattr__(
                self, "same_group_joint", _frozen_array(self.same_group_joint, dtype=float)
            )

    @property
    def unit_count(self) -> int:
        return self.first_order.shape[0]

    def joint(self, i: int, j: int) -> float:
        """Pairwise inclusion probability pi_ij for 1-based units i, j.

        By convention pi_ii = pi_i.
        """
        if i == j:
            return float(self.first_order[i - 1])
        pi = self.first_order
        a, b = i - 1, j - 1
        if self.kind == "independent":
            return float(pi[a] * pi[b])
        if self.kind == "srswor":
            return float(self.pair_joint)
        if self.kind == "stratified":
            if self.group[a] == self.group[b]:
                return float(self.same_group_joint[self.group[a]])
            return float(pi[a] * pi[b])
        if self.kind == "two_stage_cluster":
            if self.group[a] == self.group[b]:
                return float(self.same_group_joint[self.group[a]])
            within_a = pi[a] / self.stage_one_single
            within_b = pi[b] / self.stage_one_single
            return float(self.stage_one_pair * within_a * within_b)
        raise DataError(f"unknown pairwise rule kind {self.kind!r}")

    def joint_matrix(self, indices: np.ndarray) -> np.ndarray:
        """Pairwise probabilities for a subset of 1-based unit indices.

        Returns the |idx| x |idx| matrix with pi_ij off the diagonal and
        pi_i on it. Vectorized counterpart of :meth:`joint`.
        """
        idx = np.asarray(indices, dtype=np.int64) - 1
        pi = self.first_order[idx]
        if self.kind == "independent":
            mat = np.outer(pi, pi)
        elif self.kind == "srswor":
            mat = np.full((idx.size, idx.size), float(self.pair_joint))
        elif self.kind == "stratified":
            mat = np.outer(pi, pi)
            grp = self.group[idx]
            same = grp[:, None] == grp[None, :]
            mat[same] = np.broadcast_to(
                self.same_group_joint[grp][:, None], mat.shape
            )[same]
        elif self.kind == "two_stage_cluster":
            within = pi / self.stage_one_single
            mat = self.stage_one_pair * np.outer(within, within)
            grp = self.group[idx]
            same = grp[:, None] == grp[None, :]
            mat[same] = np.broadcast_to(
                self.same_group_joint[grp][:, None], mat.shape
            )[same]
        else:
            raise DataError(f"unknown pairwise rule kind {self.kind!r}")
        np.fill_diagonal(mat, pi)
        return mat


def validate_population(pop: Population) -> Population:
    """Check frame invariants and return the population unchanged.

    Idempotent. Raises :class:`DataError` on dimension mismatch, non-finite
    values, non-positive size measures, or partially labeled stratum/cluster
    columns. Positive definiteness of the covariate cross-moment matrix is
    deliberately not checked here; it is enforced at model-fit time.
    """
    n = pop.unit_count
    if n < 2:
        raise DataError(f"population needs at least 2 units, got {n}")
    if pop.x.ndim != 2 or pop.x.shape[0] != n:
        raise DataError(
            f"covariate matrix shape {pop.x.shape} does not match {n} outcome rows"
        )
    if pop.covariate_count < 1:
        raise DataError("covariate matrix must have at least one column")
    if not np.all(np.isfinite(pop.y)):
        rows = (np.flatnonzero(~np.isfinite(pop.y)) + 1).tolist()
        raise DataError(f"non-finite outcome at units {rows}")
    if not np.all(np.isfinite(pop.x)):
        rows = (np.flatnonzero(~np.isfinite(pop.x).all(axis=1)) + 1).tolist()
        raise DataError(f"non-finite covariate entries at units {rows}")
    for name in ("stratum", "cluster"):
        labels = getattr(pop, name)
        if labels is not None:
            if labels.shape[0] != n:
                raise DataError(f"{name} labels have length {labels.shape[0]}, expected {n}")
            empty = np.flatnonzero(labels == "") + 1
            if empty.size:
                raise DataError(f"empty {name} label at units {empty.tolist()}")
    if pop.size_measure is not None:
        if pop.size_measure.shape[0] != n:
            raise DataError(
                f"size measure has length {pop.size_measure.shape[0]}, expected {n}"
            )
        if not np.all(np.isfinite(pop.size_measure)) or np.any(pop.size_measure <= 0):
            bad = np.flatnonzero(
                ~np.isfinite(pop.size_measure) | (pop.size_measure <= 0)
            ) + 1
            raise DataError(f"size measure must be positive and finite; offending units {bad.tolist()}")
    if pop.unit_ids is not None and pop.unit_ids.shape[0] != n:
        raise DataError(f"unit ids have length {pop.unit_ids.shape[0]}, expected {n}")
    return pop
