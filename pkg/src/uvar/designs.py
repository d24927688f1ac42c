"""The five supported sampling designs.

Each design yields first-order inclusion probabilities, a pairwise
probability rule, and a seeded draw. Draws are bit-reproducible: all
randomness comes from a Philox counter-based generator keyed by a 64-bit
seed derived with :func:`replicate_seed`, so a given
``(design, population, seed)`` triple always produces the same sample
regardless of platform or scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, PreconditionError
from .frame import InclusionProbs, Population, Sample

__all__ = [
    "DesignSpec",
    "compute_inclusion_probs",
    "draw_sample",
    "joint_inclusion",
    "replicate_seed",
]

POISSON_CLAMP = 1e-6

_VARIANTS = ("bernoulli", "poisson", "srswor", "stratified", "two_stage_cluster")


@dataclass(frozen=True)
class DesignSpec:
    """Parameters of one sampling design.

    Use the classmethod constructors; ``variant`` is one of ``bernoulli``,
    ``poisson``, ``srswor``, ``stratified``, ``two_stage_cluster``.
    """

    variant: str
    expected_n: Optional[float] = None
    n: Optional[int] = None
    n_per_stratum: Optional[int] = None
    n_clusters: Optional[int] = None
    n_units_per_cluster: Optional[int] = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ConfigError(
                f"unknown design variant {self.variant!r}; expected one of {_VARIANTS}"
            )

    @classmethod
    def bernoulli(cls, expected_n: float) -> "DesignSpec":
        return cls(variant="bernoulli", expected_n=float(expected_n))

    @classmethod
    def poisson(cls, expected_n: float) -> "DesignSpec":
        """Poisson sampling with probabilities proportional to the frame's size measure."""
        return cls(variant="poisson", expected_n=float(expected_n))

    @classmethod
    def srswor(cls, n: int) -> "DesignSpec":
        return cls(variant="srswor", n=int(n))

    @classmethod
    def stratified(cls, n_per_stratum: int) -> "DesignSpec":
        return cls(variant="stratified", n_per_stratum=int(n_per_stratum))

    @classmethod
    def two_stage_cluster(cls, n_clusters: int, n_units_per_cluster: int) -> "DesignSpec":
        return cls(
            variant="two_stage_cluster",
            n_clusters=int(n_clusters),
            n_units_per_cluster=int(n_units_per_cluster),
        )


def _group_codes(labels: np.ndarray):
    values, codes = np.unique(labels, return_inverse=True)
    return values, codes.astype(np.int64)


def _validate(design: DesignSpec, pop: Population) -> None:
    n_units = pop.unit_count
    if design.variant in ("bernoulli", "poisson"):
        if design.expected_n is None or not 0 < design.expected_n <= n_units:
            raise ConfigError(
                f"expected_n must lie in (0, {n_units}], got {design.expected_n}"
            )
        if design.variant == "poisson" and pop.size_measure is None:
            raise ConfigError("poisson design requires a size measure column")
    elif design.variant == "srswor":
        if design.n is None or not 0 < design.n <= n_units:
            raise ConfigError(f"n must lie in (0, {n_units}], got {design.n}")
    elif design.variant == "stratified":
        if pop.stratum is None:
            raise ConfigError("stratified design requires stratum labels")
        if design.n_per_stratum is None or design.n_per_stratum < 1:
            raise ConfigError("n_per_stratum must be a positive integer")
        _, codes = _group_codes(pop.stratum)
        smallest = int(np.bincount(codes).min())
        if design.n_per_stratum > smallest:
            raise ConfigError(
                f"n_per_stratum {design.n_per_stratum} exceeds smallest stratum size {smallest}"
            )
    elif design.variant == "two_stage_cluster":
        if pop.cluster is None:
            raise ConfigError("two-stage cluster design requires cluster labels")
        if design.n_clusters is None or design.n_clusters < 1:
            raise ConfigError("n_clusters must be a positive integer")
        if design.n_units_per_cluster is None or design.n_units_per_cluster < 1:
            raise ConfigError("n_units_per_cluster must be a positive integer")
        values, _ = _group_codes(pop.cluster)
        if design.n_clusters > values.size:
            raise ConfigError(
                f"n_clusters {design.n_clusters} exceeds number of clusters {values.size}"
            )


def compute_inclusion_probs(design: DesignSpec, pop: Population) -> InclusionProbs:
    """First- and second-order inclusion probabilities for the design."""
    _validate(design, pop)
    n_units = pop.unit_count

    if design.variant == "bernoulli":
        pi = np.full(n_units, design.expected_n / n_units)
        return InclusionProbs(first_order=pi, kind="independent")

    if design.variant == "poisson":
        size = pop.size_measure
        raw = design.expected_n * size / size.sum()
        clamped = np.clip(raw, POISSON_CLAMP, 1.0 - POISSON_CLAMP)
        # One rescaling pass restores sum(pi) = expected_n; anything still
        # outside (0, 1) afterwards is an error, not a silent truncation.
        pi = clamped * (design.expected_n / clamped.sum())
        bad = np.flatnonzero((pi >= 1.0) | (pi <= 0.0)) + 1
        if bad.size:
            raise PreconditionError(
                "poisson probabilities outside (0, 1) after clamping and "
                f"rescaling at units {bad.tolist()}"
            )
        return InclusionProbs(first_order=pi, kind="independent")

    if design.variant == "srswor":
        n = design.n
        pi = np.full(n_units, n / n_units)
        pair = n * (n - 1) / (n_units * (n_units - 1))
        return InclusionProbs(first_order=pi, kind="srswor", pair_joint=pair)

    if design.variant == "stratified":
        _, codes = _group_codes(pop.stratum)
        sizes = np.bincount(codes)
        n_h = design.n_per_stratum
        pi = n_h / sizes[codes]
        same = np.array(
            [n_h * (n_h - 1) / (s * (s - 1)) if s > 1 else 0.0 for s in sizes]
        )
        return InclusionProbs(
            first_order=pi, kind="stratified", group=codes, same_group_joint=same
        )

    # two-stage cluster
    _, codes = _group_codes(pop.cluster)
    sizes = np.bincount(codes)
    n_clusters_total = sizes.size
    p_cluster = design.n_clusters / n_clusters_total
    p_cluster_pair = (
        design.n_clusters
        * (design.n_clusters - 1)
        / (n_clusters_total * (n_clusters_total - 1))
        if n_clusters_total > 1
        else 0.0
    )
    n_u = design.n_units_per_cluster
    # Clusters smaller than n_u are taken whole (within-cluster probability 1).
    within = np.minimum(n_u / sizes, 1.0)
    within_pair = np.array(
        [
            1.0 if s <= n_u else n_u * (n_u - 1) / (s * (s - 1))
            for s in sizes
        ]
    )
    pi = p_cluster * within[codes]
    same = p_cluster * within_pair
    return InclusionProbs(
        first_order=pi,
        kind="two_stage_cluster",
        group=codes,
        same_group_joint=same,
        stage_one_single=p_cluster,
        stage_one_pair=p_cluster_pair,
    )


def joint_inclusion(design: DesignSpec, probs: InclusionProbs, i: int, j: int) -> float:
    """Pairwise inclusion probability pi_ij for distinct 1-based units i, j."""
    if i == j:
        raise PreconditionError("joint_inclusion requires two distinct units")
    return probs.joint(i, j)


def replicate_seed(master_seed: int, replicate: int) -> int:
    """Derive the 64-bit seed for one replicate from a master seed.

    Uses numpy's SeedSequence hash of the (master_seed, replicate) pair, so
    per-replicate streams are independent of each other and of scheduling.
    """
    state = np.random.SeedSequence(entropy=(int(master_seed), int(replicate)))
    return int(state.generate_state(1, dtype=np.uint64)[0])


def _rng(seed: int) -> np.random.Generator:
    # Philox is counter-based: same key always yields the same stream.
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def draw_sample(
    design: DesignSpec, pop: Population, probs: InclusionProbs, seed: int
) -> Sample:
    """Draw one sample; a pure function of ``(design, pop, seed)``.

    Bernoulli and Poisson draw each indicator independently; srswor uses a
    seeded partial shuffle; stratified applies srswor per stratum in sorted
    label order; the cluster design applies srswor to clusters and then to
    units within each selected cluster, again in sorted label order.
    """
    _validate(design, pop)
    rng = _rng(seed)
    n_units = pop.unit_count

    if design.variant in ("bernoulli", "poisson"):
        u = rng.random(n_units)
        return Sample.from_indicator(u < probs.first_order)

    if design.variant == "srswor":
        chosen = rng.permutation(n_units)[: design.n]
        return Sample(indices=np.sort(chosen) + 1, unit_count=n_units)

    if design.variant == "stratified":
        _, codes = _group_codes(pop.stratum)
        picked = []
        for code in range(codes.max() + 1):
            members = np.flatnonzero(codes == code)
            take = rng.permutation(members.size)[: design.n_per_stratum]
            picked.append(members[take])
        idx = np.sort(np.concatenate(picked)) + 1
        return Sample(indices=idx, unit_count=n_units)

    # two-stage cluster
    _, codes = _group_codes(pop.cluster)
    n_clusters_total = codes.max() + 1
    chosen_clusters = np.sort(rng.permutation(n_clusters_total)[: design.n_clusters])
    picked = []
    for code in chosen_clusters:
        members = np.flatnonzero(codes == code)
        take = min(design.n_units_per_cluster, members.size)
        sel = rng.permutation(members.size)[:take]
        picked.append(members[sel])
    idx = np.sort(np.concatenate(picked)) + 1
    return Sample(indices=idx, unit_count=n_units)
