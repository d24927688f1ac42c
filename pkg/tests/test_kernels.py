import itertools

import numpy as np
import pytest

from conftest import frame_under_design, independent_probs, random_population
from uvar.designs import draw_sample, replicate_seed
from uvar.errors import PreconditionError
from uvar.frame import Population, Sample
from uvar.greg import estimate_greg
from uvar.kernels import (
    build_kernel_context,
    pair_cond_mean,
    pair_mean,
    u_kernel,
    u_kernel_realized,
    u_kernel_realized_matrix,
    u_kernel_row_sums,
    u_statistic_average,
    v_kernel,
    v_statistic_average,
)

VARIANTS = ("bernoulli", "poisson", "srswor", "stratified", "two_stage_cluster")


def test_v_kernel_fixture_cases(flat_ctx):
    assert v_kernel(flat_ctx, 1, 3) == pytest.approx(0.0, abs=1e-12)
    assert v_kernel(flat_ctx, 1, 2) == pytest.approx(4.0, rel=1e-14)
    # both out of sample: both indicator factors vanish
    pop = Population(y=[2.0, 4.0, 6.0, 8.0], x=np.ones((4, 1)))
    probs = independent_probs(np.random.default_rng(0), 4)
    ctx = build_kernel_context(pop, Sample(indices=[1], unit_count=4), probs)
    assert v_kernel(ctx, 2, 3) == 0.0


def test_v_kernel_symmetric(flat_ctx):
    for i, j in itertools.combinations(range(1, 4), 2):
        assert v_kernel(flat_ctx, i, j) == pytest.approx(v_kernel(flat_ctx, j, i), abs=0)


def test_u_kernel_fixture_cases(flat_ctx):
    assert u_kernel(flat_ctx, 1, 3, 1, 1) == pytest.approx(0.0, abs=1e-12)
    assert u_kernel(flat_ctx, 1, 2, 1, 0) == pytest.approx(8.0 / 3.0, rel=1e-14)
    assert u_kernel(flat_ctx, 1, 2, 0, 0) == 0.0
    assert u_kernel(flat_ctx, 2, 3, 0, 1) == pytest.approx(8.0, rel=1e-14)


def test_u_kernel_rejects_same_unit(flat_ctx):
    with pytest.raises(PreconditionError):
        u_kernel(flat_ctx, 2, 2, 1, 1)
    with pytest.raises(PreconditionError):
        pair_mean(flat_ctx, 1, 1)


def test_pair_mean_fixture(flat_ctx):
    assert pair_mean(flat_ctx, 1, 3) == pytest.approx(8.0 / 3.0, rel=1e-13)


def test_pair_mean_symmetric():
    rng = np.random.default_rng(4)
    pop = random_population(rng, 12, 3)
    probs = independent_probs(rng, 12)
    ctx = build_kernel_context(pop, Sample(indices=[2, 5, 9], unit_count=12), probs)
    for i, j in itertools.combinations(range(1, 13), 2):
        assert pair_mean(ctx, i, j) == pytest.approx(pair_mean(ctx, j, i), rel=1e-12)


def test_pair_cond_mean_fixture(flat_ctx):
    assert pair_cond_mean(flat_ctx, 1, 3, 1) == pytest.approx(4.0 / 3.0, rel=1e-13)
    assert pair_cond_mean(flat_ctx, 1, 3, 0) == pytest.approx(4.0, rel=1e-13)


def test_zero_outcome_zeroes_everything():
    pop = Population(y=np.zeros(5), x=np.ones((5, 1)))
    probs = independent_probs(np.random.default_rng(1), 5)
    ctx = build_kernel_context(pop, Sample(indices=[2, 4], unit_count=5), probs)
    for i, j in itertools.combinations(range(1, 6), 2):
        assert pair_mean(ctx, i, j) == 0.0
        assert pair_cond_mean(ctx, i, j, 1) == 0.0
        assert u_kernel_realized(ctx, i, j) == 0.0


def test_pair_mean_is_indicator_expectation():
    # averaging the four case values under independent indicator weights
    # must reproduce the pair mean identically
    rng = np.random.default_rng(7)
    pop = random_population(rng, 10, 2)
    probs = independent_probs(rng, 10)
    ctx = build_kernel_context(pop, Sample(indices=[1, 6, 7], unit_count=10), probs)
    pi = probs.first_order
    for i, j in [(1, 2), (3, 9), (6, 7), (5, 10)]:
        expectation = sum(
            u_kernel(ctx, i, j, a, b)
            * (pi[i - 1] if a else 1 - pi[i - 1])
            * (pi[j - 1] if b else 1 - pi[j - 1])
            for a in (0, 1)
            for b in (0, 1)
        )
        assert expectation == pytest.approx(pair_mean(ctx, i, j), rel=1e-12)


def test_solo_case_ignores_partner():
    rng = np.random.default_rng(8)
    pop = random_population(rng, 15, 3)
    probs = independent_probs(rng, 15)
    ctx = build_kernel_context(pop, Sample(indices=[3, 4, 11], unit_count=15), probs)
    partners = rng.choice([j for j in range(1, 16) if j != 5], size=10, replace=False)
    values = {u_kernel(ctx, 5, int(j), 1, 0) for j in partners}
    assert len(values) == 1
    values_flipped = {u_kernel(ctx, int(j), 5, 0, 1) for j in partners}
    assert values == values_flipped


@pytest.mark.parametrize("variant", VARIANTS)
def test_statistic_averages_reproduce_point_estimate(variant):
    rng = np.random.default_rng(hash(variant) % 2**32)
    for trial in range(3):
        n_units = int(rng.integers(20, 120))
        pop, design, probs = frame_under_design(rng, n_units, int(rng.integers(1, 4)), variant)
        sample = draw_sample(design, pop, probs, replicate_seed(13, trial))
        ctx = build_kernel_context(pop, sample, probs)
        expected = estimate_greg(pop, sample, probs)
        assert v_statistic_average(ctx) == pytest.approx(expected, rel=1e-10)
        assert u_statistic_average(ctx) == pytest.approx(expected, rel=1e-10)


def test_fixture_u_statistic_witness(flat_ctx):
    # realized kernels are 8/3, 0, 8 over the three pairs
    assert u_statistic_average(flat_ctx) == pytest.approx(32.0 / 9.0, rel=1e-13)


def test_row_sums_match_realized_matrix():
    rng = np.random.default_rng(9)
    pop = random_population(rng, 25, 2)
    probs = independent_probs(rng, 25)
    sample = Sample.from_indicator(rng.random(25) < probs.first_order)
    ctx = build_kernel_context(pop, sample, probs)
    brute = u_kernel_realized_matrix(ctx).sum(axis=1)
    fast = u_kernel_row_sums(ctx)
    assert np.allclose(brute, fast, rtol=1e-11, atol=1e-11)
