import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings, strategies as st

from ldp_metrics.errors import InvalidPrior, NonPositiveArgument
from ldp_metrics.montecarlo import entropy_rows, mc_moments
from ldp_metrics.prior import (DirichletPrior, McConfig, baseline_secret_entropy, c_mu, digamma,
                               draw, jeffreys, log_multivariate_beta, prior_differential_entropy,
                               sample)

EULER = 0.5772156649015329


def test_jeffreys():
    np.testing.assert_array_equal(jeffreys(2).alpha, [0.5, 0.5])
    np.testing.assert_array_equal(jeffreys(3).alpha, [0.5, 0.5, 0.5])
    with pytest.raises(InvalidPrior):
        jeffreys(1)


def test_prior_rejects_bad_parameters():
    with pytest.raises(InvalidPrior):
        DirichletPrior([0.5, 0.0])


@pytest.mark.parametrize("alpha, expected", [
    ([1, 1], 0.0),
    ([0.5, 0.5], math.log(math.pi)),
    ([2, 3], math.log(1 / 12)),
])
def test_log_multivariate_beta(alpha, expected):
    assert log_multivariate_beta(alpha) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=50)
@given(st.lists(st.floats(0.05, 30), min_size=2, max_size=6), st.randoms())
def test_log_beta_symmetric(alpha, rnd):
    shuffled = alpha[:]
    rnd.shuffle(shuffled)
    assert log_multivariate_beta(alpha) == pytest.approx(log_multivariate_beta(shuffled), abs=1e-12)


@pytest.mark.parametrize("x, expected", [
    (1.0, -EULER),
    (0.5, -EULER - 2 * math.log(2)),
])
def test_digamma_identities(x, expected):
    assert digamma(x) == pytest.approx(expected, abs=1e-14)


def test_digamma_recurrence_grid():
    x = np.linspace(0.1, 50, 2000)
    np.testing.assert_allclose(digamma(x + 1), digamma(x) + 1 / x, rtol=0, atol=1e-12)
    assert digamma(2.0) - digamma(1.0) == pytest.approx(1.0, abs=1e-15)


def test_digamma_matches_reference_implementation():
    x = np.concatenate([np.logspace(-8, 3, 3000), [1.4616321449683622]])
    np.testing.assert_allclose(digamma(x), scipy.special.digamma(x), rtol=1e-12, atol=1e-14)


def test_digamma_rejects_nonpositive():
    with pytest.raises(NonPositiveArgument):
        digamma(0.0)
    with pytest.raises(NonPositiveArgument):
        digamma(np.array([1.0, -2.0]))


def test_sample_mean_symmetric():
    p = draw(DirichletPrior([1, 1]), 100_000, seed=1)
    assert abs(p[:, 0].mean() - 0.5) <= 3 * p[:, 0].std() / math.sqrt(len(p))


def test_sample_mean_asymmetric():
    p = draw(DirichletPrior([0.5, 1.5]), 100_000, seed=2)
    assert abs(p[:, 0].mean() - 0.25) <= 3 * p[:, 0].std() / math.sqrt(len(p))


def test_sample_reproducible_and_on_simplex():
    prior = DirichletPrior([0.3, 2.0, 0.01])
    a, b = draw(prior, 100, seed=7), draw(prior, 100, seed=7)
    np.testing.assert_array_equal(a, b)
    assert np.all(a >= 0)
    np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-12)


def test_sample_stream_independent_of_workers():
    prior = jeffreys(3)
    cfg1 = McConfig(20_000, seed=4, batch_size=1000, workers=1)
    cfg4 = McConfig(20_000, seed=4, batch_size=1000, workers=4)
    f = lambda p, lp: np.column_stack([p[:, 0], entropy_rows(p, lp)])
    s1, s4 = mc_moments(prior, f, cfg1), mc_moments(prior, f, cfg4)
    np.testing.assert_array_equal(s1.mean, s4.mean)
    np.testing.assert_array_equal(s1.cov, s4.cov)


def test_last_chunk_truncated():
    cfg = McConfig(sample_count=2500, batch_size=1000)
    sizes = [len(p) for p, _ in sample(jeffreys(2), cfg)]
    assert sizes == [1000, 1000, 500]


@pytest.mark.parametrize("alpha, expected", [
    ([1, 1], 0.0),
    ([0.5, 0.5], math.log(math.pi) - (-EULER) + (-EULER - 2 * math.log(2))),
])
def test_differential_entropy(alpha, expected):
    assert prior_differential_entropy(DirichletPrior(alpha)) == pytest.approx(expected, abs=1e-12)


def test_differential_entropy_jeffreys_value():
    # log(pi) + gamma + psi(1/2) = log(pi) - 2 log 2
    assert prior_differential_entropy(jeffreys(2)) == pytest.approx(math.log(math.pi) - 2 * math.log(2), abs=1e-13)


def test_differential_entropy_against_monte_carlo():
    prior = DirichletPrior([2, 3, 4])
    cfg = McConfig(200_000, seed=11)
    # log density in the (a-1)-coordinate chart, using log p to avoid underflow.
    fn = lambda p, lp: -(((prior.alpha - 1) * lp).sum(axis=1) - log_multivariate_beta(prior.alpha))[:, None]
    s = mc_moments(prior, fn, cfg)
    assert abs(s.mean[0] - prior_differential_entropy(prior)) <= 3 * s.std_error[0]


@pytest.mark.parametrize("a, expected", [
    (2, 2 * math.log(2) - 0.5 * math.log(2 * math.pi * math.e)),
    (3, -0.5 * math.log(2 * math.pi * math.e) + 1.5),
])
def test_c_mu_jeffreys(a, expected):
    assert c_mu(jeffreys(a)).value == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("a", [2, 3, 5])
def test_c_mu_monte_carlo_agrees(a):
    est = c_mu(jeffreys(a), McConfig(200_000, seed=a), method="mc")
    assert est.within(c_mu(jeffreys(a)).value)


def test_c_mu_reference_values():
    assert c_mu(jeffreys(2)).value == pytest.approx(-0.03264, abs=1e-5)
    assert c_mu(jeffreys(3)).value == pytest.approx(0.08106, abs=1e-5)


@pytest.mark.parametrize("a, expected", [
    (2, 2 * math.log(2) - 1),
    (4, 1.5 - EULER - (2 - 2 * math.log(2) - EULER)),
])
def test_baseline_secret_entropy_jeffreys(a, expected):
    assert baseline_secret_entropy(jeffreys(a)).value == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("a", [2, 4])
def test_baseline_secret_entropy_monte_carlo(a):
    est = baseline_secret_entropy(jeffreys(a), McConfig(200_000, seed=3), method="mc")
    assert est.within(baseline_secret_entropy(jeffreys(a)).value)


def test_baseline_secret_entropy_nearly_degenerate_prior():
    prior = DirichletPrior([100, 0.01])
    est = baseline_secret_entropy(prior, McConfig(100_000, seed=5), method="mc")
    assert 0 < est.value < 0.01
    assert est.within(baseline_secret_entropy(prior).value)
