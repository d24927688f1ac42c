import numpy as np
import pytest

from conftest import independent_probs, random_population
from uvar.errors import SingularDesignError
from uvar.frame import InclusionProbs, Population, Sample
from uvar.greg import (
    estimate_difference,
    estimate_greg,
    estimate_ht,
    fit_greg,
    ht_variance_estimate,
)
from uvar.oracle import enumerate_statistic


def census(pop, pi=1.0):
    probs = InclusionProbs(first_order=np.full(pop.unit_count, pi), kind="independent")
    sample = Sample(indices=np.arange(1, pop.unit_count + 1), unit_count=pop.unit_count)
    return sample, probs


def test_ht_fixture_value(flat_pop, sample_13, flat_probs):
    assert estimate_ht(flat_pop, sample_13, flat_probs) == pytest.approx(16.0 / 3.0, rel=1e-15)


def test_ht_empty_sample(flat_pop, flat_probs):
    empty = Sample(indices=[], unit_count=3)
    assert estimate_ht(flat_pop, empty, flat_probs) == 0.0


def test_ht_census_recovers_mean(flat_pop):
    sample, probs = census(flat_pop)
    assert estimate_ht(flat_pop, sample, probs) == pytest.approx(4.0, rel=1e-15)


def test_ht_variance_fixture(flat_pop, sample_13, flat_probs):
    assert ht_variance_estimate(flat_pop, sample_13, flat_probs) == pytest.approx(
        80.0 / 9.0, rel=1e-14
    )


def test_ht_variance_zero_outcome(sample_13, flat_probs):
    pop = Population(y=[0.0, 0.0, 0.0], x=[[1.0], [1.0], [1.0]])
    assert ht_variance_estimate(pop, sample_13, flat_probs) == 0.0


def test_ht_variance_near_census_vanishes(flat_pop):
    sample, probs = census(flat_pop, pi=1.0 - 1e-9)
    assert ht_variance_estimate(flat_pop, sample, probs) == pytest.approx(0.0, abs=1e-7)


def test_difference_zero_model_is_ht(flat_pop, sample_13, flat_probs):
    zero = np.zeros(3)
    assert estimate_difference(flat_pop, sample_13, flat_probs, zero) == pytest.approx(
        estimate_ht(flat_pop, sample_13, flat_probs), rel=1e-15
    )


def test_difference_perfect_model_exact(flat_pop, flat_probs):
    for indices in ([1], [2], [1, 3], [1, 2, 3]):
        sample = Sample(indices=indices, unit_count=3)
        assert estimate_difference(
            flat_pop, sample, flat_probs, flat_pop.y
        ) == pytest.approx(4.0, rel=1e-15)


def test_difference_constant_model(flat_pop, sample_13, flat_probs):
    preds = np.full(3, 4.0)
    assert estimate_difference(flat_pop, sample_13, flat_probs, preds) == pytest.approx(
        4.0, rel=1e-15
    )


def test_fit_greg_fixture(flat_pop, sample_13, flat_probs):
    fit = fit_greg(flat_pop, sample_13, flat_probs)
    assert fit.cross_moment_inv[0, 0] == pytest.approx(1.0 / 3.0, rel=1e-15)
    assert fit.coefficients[0] == pytest.approx(16.0 / 3.0, rel=1e-15)
    assert fit.predict(np.array([1.0])) == pytest.approx(16.0 / 3.0, rel=1e-15)


def test_fit_greg_empty_sample(flat_pop, flat_probs):
    fit = fit_greg(flat_pop, Sample(indices=[], unit_count=3), flat_probs)
    assert np.all(fit.coefficients == 0.0)


def test_fit_greg_duplicate_column_rejected(flat_probs, sample_13):
    pop = Population(y=[2.0, 4.0, 6.0], x=[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularDesignError) as err:
        fit_greg(pop, sample_13, flat_probs)
    assert err.value.pivot_index == 2


def test_greg_fixture_value(flat_pop, sample_13, flat_probs):
    assert estimate_greg(flat_pop, sample_13, flat_probs) == pytest.approx(
        32.0 / 9.0, rel=1e-14
    )


def test_greg_census_exact(flat_pop):
    sample, probs = census(flat_pop)
    assert estimate_greg(flat_pop, sample, probs) == pytest.approx(4.0, rel=1e-14)


def test_greg_empty_sample(flat_pop, flat_probs):
    assert estimate_greg(flat_pop, Sample(indices=[], unit_count=3), flat_probs) == 0.0


def test_cross_moment_inverse_is_sample_independent():
    rng = np.random.default_rng(1)
    pop = random_population(rng, 30, 3)
    probs = independent_probs(rng, 30)
    first = fit_greg(pop, Sample(indices=[1, 5, 9], unit_count=30), probs)
    second = fit_greg(pop, Sample(indices=[2, 3, 28, 30], unit_count=30), probs)
    assert np.array_equal(first.cross_moment_inv, second.cross_moment_inv)


def test_ht_exhaustively_unbiased():
    rng = np.random.default_rng(2)
    for n_units in (4, 6, 8):
        pop = random_population(rng, n_units, 2)
        probs = independent_probs(rng, n_units)
        mean, _ = enumerate_statistic(pop, probs, lambda s: estimate_ht(pop, s, probs))
        assert mean == pytest.approx(pop.mean_outcome, rel=1e-12)


def test_perfect_fit_correction_vanishes():
    # census with unit weights reproduces the coefficients exactly, so all
    # sampled residuals are zero and the estimate is the average prediction
    rng = np.random.default_rng(3)
    x = np.column_stack([np.ones(20), rng.normal(0, 1, 20)])
    beta = np.array([2.0, -1.5])
    pop = Population(y=x @ beta, x=x)
    sample, probs = census(pop)
    fit = fit_greg(pop, sample, probs)
    residuals = pop.y - pop.x @ fit.coefficients
    assert np.max(np.abs(residuals)) < 1e-12
    assert estimate_greg(pop, sample, probs) == pytest.approx(
        float(np.mean(pop.x @ fit.coefficients)), rel=1e-12
    )


def test_half_sample_with_balancing_weights_reproduces_exact_fit():
    # constant outcome, pi = 1/2, |S| = N/2: the weighted cross-moment equals
    # the population one, residuals vanish, and the estimate is exact
    pop = Population(y=np.full(4, 7.0), x=np.ones((4, 1)))
    probs = InclusionProbs(first_order=np.full(4, 0.5), kind="independent")
    sample = Sample(indices=[1, 3], unit_count=4)
    fit = fit_greg(pop, sample, probs)
    assert fit.coefficients[0] == pytest.approx(7.0, rel=1e-15)
    assert estimate_greg(pop, sample, probs) == pytest.approx(7.0, rel=1e-15)
