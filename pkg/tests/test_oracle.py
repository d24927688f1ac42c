import numpy as np
import pytest

from conftest import independent_probs, random_population
from uvar.designs import DesignSpec, compute_inclusion_probs
from uvar.errors import PreconditionError
from uvar.frame import InclusionProbs, Population
from uvar.greg import estimate_greg, estimate_ht
from uvar.oracle import (
    enumerate_statistic,
    exact_estimator_expectation,
    exact_h_components,
)


def test_ht_mean_is_exact(flat_pop, flat_probs):
    mean, _ = enumerate_statistic(
        flat_pop, flat_probs, lambda s: estimate_ht(flat_pop, s, flat_probs)
    )
    assert mean == pytest.approx(4.0, rel=1e-14)


def test_constant_statistic(flat_pop, flat_probs):
    mean, variance = enumerate_statistic(flat_pop, flat_probs, lambda s: 7.25)
    assert mean == pytest.approx(7.25, rel=1e-15)
    assert variance == pytest.approx(0.0, abs=1e-15)


def test_enumeration_guards():
    pop = Population(y=np.ones(21), x=np.ones((21, 1)))
    probs = InclusionProbs(first_order=np.full(21, 0.5), kind="independent")
    with pytest.raises(PreconditionError, match="capped"):
        enumerate_statistic(pop, probs, lambda s: 0.0)
    small = Population(y=np.ones(4), x=np.ones((4, 1)))
    srs = compute_inclusion_probs(DesignSpec.srswor(2), small)
    with pytest.raises(PreconditionError, match="independent"):
        enumerate_statistic(small, srs, lambda s: 0.0)


def test_fixture_components(flat_pop, flat_probs):
    report = exact_h_components(flat_pop, flat_probs)
    assert report.exact_mean == pytest.approx(8.0 / 3.0, rel=1e-12)
    assert report.tau1 == pytest.approx(2.0 / 9.0, rel=1e-12)
    assert report.identity_residual <= 1e-12 * max(report.exact_variance, 1e-30)
    assert abs(report.omega12) <= 1e-14 * max(report.exact_variance, 1e-30)
    assert report.prob_sum == pytest.approx(1.0, abs=1e-12)
    assert report.tau1_bias_exact == pytest.approx(16.0 / 27.0, rel=1e-12)
    assert report.tau1_plugin_target == pytest.approx(8.0 / 9.0, rel=1e-12)
    # pair means: theta_12 = 2, theta_13 = 8/3, theta_23 = 10/3
    assert report.theta_table[0, 1] == pytest.approx(2.0, rel=1e-12)
    assert report.theta_table[0, 2] == pytest.approx(8.0 / 3.0, rel=1e-12)
    assert report.theta_table[1, 2] == pytest.approx(10.0 / 3.0, rel=1e-12)


def test_zero_outcome_components(flat_probs):
    pop = Population(y=np.zeros(3), x=np.ones((3, 1)))
    report = exact_h_components(pop, flat_probs)
    assert report.exact_variance == 0.0
    assert report.tau1 == 0.0
    assert report.tau2 == 0.0
    assert report.omega12 == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_variance_decomposition_identity(seed):
    rng = np.random.default_rng(400 + seed)
    n_units = int(rng.integers(4, 9))
    pop = random_population(rng, n_units, int(rng.integers(1, 3)))
    probs = independent_probs(rng, n_units)
    report = exact_h_components(pop, probs)
    scale = max(report.exact_variance, 1e-30)
    assert report.identity_residual <= 1e-9 * scale
    assert abs(report.omega12) <= 1e-12 * scale
    assert report.reconstruction_residual <= 1e-10 * max(abs(report.exact_mean), 1.0)
    assert report.h1_mean_residual <= 1e-12 * max(abs(report.exact_mean), 1.0)
    assert report.h2_mean_residual <= 1e-12 * max(abs(report.exact_mean), 1.0)


def test_projection_component_closed_form_matches_enumeration():
    rng = np.random.default_rng(23)
    n_units = 6
    pop = random_population(rng, n_units, 2)
    probs = independent_probs(rng, n_units)
    report = exact_h_components(pop, probs)
    pi = probs.first_order
    gaps = report.phi_bar_observed - report.theta_bar_table
    closed = float(np.sum(gaps**2 * pi / (1.0 - pi)) / n_units**2)
    assert report.tau1 == pytest.approx(closed, rel=1e-11)


def test_point_estimate_mean_matches_direct_enumeration(flat_pop, flat_probs):
    report = exact_h_components(flat_pop, flat_probs)
    mean, variance = enumerate_statistic(
        flat_pop, flat_probs, lambda s: estimate_greg(flat_pop, s, flat_probs)
    )
    assert report.exact_mean == pytest.approx(mean, rel=1e-13)
    assert report.exact_variance == pytest.approx(variance, rel=1e-13)


def test_estimator_expectation_zero_outcome(flat_probs):
    pop = Population(y=np.zeros(3), x=np.ones((3, 1)))
    for name in ("tau1_hat", "tau1_bias_hat", "tau2a_hat", "tau2b_hat"):
        assert exact_estimator_expectation(pop, flat_probs, name) == 0.0


def test_estimator_expectation_unknown_name(flat_pop, flat_probs):
    with pytest.raises(PreconditionError, match="unknown estimator"):
        exact_estimator_expectation(flat_pop, flat_probs, "nope")


def test_estimator_expectation_accepts_callable(flat_pop, flat_probs):
    value = exact_estimator_expectation(flat_pop, flat_probs, lambda ctx: 1.0)
    assert value == pytest.approx(1.0, rel=1e-12)


def test_bias_estimator_exhaustively_unbiased(flat_pop, flat_probs):
    report = exact_h_components(flat_pop, flat_probs)
    expect = exact_estimator_expectation(flat_pop, flat_probs, "tau1_bias_hat")
    assert expect == pytest.approx(report.tau1_bias_exact, rel=1e-11)
