import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ldp_metrics import catalog
from ldp_metrics.errors import (DegeneratePrior, DegenerateWorstCase, NotFaithful,
                                TooManyRejections)
from ldp_metrics.prior import DirichletPrior, McConfig, c_mu, jeffreys
from ldp_metrics.protocol import build_protocol, compose, mixture, product, worst_case_privacy
from ldp_metrics.population import (asymptotic_utility, avg_privacy, effective_participation,
                                    limit_predictions, population_report, tradeoff_bounds)

EULER = 0.5772156649015329
CFG = McConfig(100_000, seed=21)
LOG_2PIE = math.log(2 * math.pi * math.e)


def psi_half_int(k):
    # psi(k/2) for small integers via known identities
    from scipy.special import digamma
    return float(digamma(k / 2))


def test_identity_has_no_privacy():
    s = avg_privacy(catalog.identity(3), jeffreys(3), CFG)
    assert s.value == pytest.approx(0.0, abs=1e-12)


def test_uniform_output_is_fully_private():
    s = avg_privacy(catalog.grr(4, 0.0), jeffreys(4), CFG)
    assert s.value == pytest.approx(1.0, abs=1e-12)


def test_parity_average_privacy():
    expected = (psi_half_int(4) - psi_half_int(3)) / (psi_half_int(6) - psi_half_int(3))
    assert expected == pytest.approx(0.435853, abs=1e-6)
    s = avg_privacy(catalog.parity(4), jeffreys(4), CFG)
    assert s.within(expected)


def test_degenerate_prior_raises():
    with pytest.raises(DegeneratePrior):
        avg_privacy(catalog.grr(2, 1.0), DirichletPrior([1e-9, 1e-9]), McConfig(2000))


def test_asymptotic_utility_identity_is_c_mu():
    u = asymptotic_utility(catalog.identity(3), jeffreys(3), CFG)
    assert u.within(c_mu(jeffreys(3)).value)


@pytest.mark.parametrize("name, target", [("Q1", -0.987), ("Q2", -0.987), ("mix", -0.691)])
def test_mixing_example_utilities(name, target):
    q1 = build_protocol([[1, 0, 0], [0, 2 / 3, 1 / 3], [0, 1 / 3, 2 / 3]])
    q2 = build_protocol([[2 / 3, 1 / 3, 0], [1 / 3, 2 / 3, 0], [0, 0, 1]])
    q = {"Q1": q1, "Q2": q2, "mix": mixture([0.5, 0.5], [q1, q2])}[name]
    u = asymptotic_utility(q, DirichletPrior([1, 1, 1]), McConfig(200_000, seed=1))
    # Reference values are printed to three decimals.
    assert u.within(target, atol=5e-4)


def test_asymptotic_utility_requires_faithful():
    with pytest.raises(NotFaithful):
        asymptotic_utility(catalog.parity(4), jeffreys(4), CFG)


def test_too_many_rejections():
    # Tiny Dirichlet parameters put most mass at the vertices, where the
    # identity protocol has output probabilities below the floor.
    with pytest.raises(TooManyRejections):
        asymptotic_utility(catalog.identity(2), DirichletPrior([0.002, 0.002]), McConfig(20_000))


def test_effective_participation_examples():
    f = effective_participation(catalog.identity(3), jeffreys(3), CFG)
    assert f.value == pytest.approx(1.0, abs=1e-10)
    f = effective_participation(catalog.parity(4), jeffreys(4), CFG)
    assert f.value == 0.0 and f.method == "exact"


def test_effective_participation_matches_components():
    q, prior = catalog.grr(2, 1.0), jeffreys(2)
    f = effective_participation(q, prior, CFG)
    u = asymptotic_utility(q, prior, CFG)
    c = c_mu(prior, CFG, method="mc")
    assert 0 < f.value < 1
    assert f.value == pytest.approx(math.exp(2 * (u.value - c.value)), rel=1e-12)


def test_tradeoff_bound_grr_eps1():
    b = tradeoff_bounds(catalog.grr(3, 1.0), jeffreys(3))
    assert b.bound_uas == pytest.approx(-0.5 * LOG_2PIE + math.log(math.e - 1), abs=1e-12)
    assert b.bound_uas == pytest.approx(-0.87762, abs=1e-5)


def test_tradeoff_bound_diverges_as_eps_shrinks():
    vals = [tradeoff_bounds(catalog.grr(3, e), jeffreys(3)).bound_uas for e in (1e-1, 1e-3, 1e-6)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < -13


def test_tradeoff_degenerate():
    with pytest.raises(DegenerateWorstCase):
        tradeoff_bounds(catalog.grr(3, 0.0).__class__(np.eye(3), (0, 1, 2), (0, 1, 2)), jeffreys(3))


@pytest.mark.parametrize("q, u_distr, u_tally", [
    (catalog.grr(3, 1.0), 1.0, 0.5),
    (catalog.parity(4), 1 / 3, 1 / 3),
    (catalog.identity(4), 1.0, 1.0),
])
def test_limit_predictions(q, u_distr, u_tally):
    lim = limit_predictions(q, jeffreys(q.a), McConfig(20_000))
    assert lim.u_distr_limit == pytest.approx(u_distr)
    assert lim.u_tally_limit == pytest.approx(u_tally)


def test_limit_prediction_faithful_fields():
    prior = jeffreys(2)
    lim = limit_predictions(catalog.grr(2, 1.0), prior, CFG)
    assert lim.digit_slope == 0.5
    assert lim.one_minus_udistr_scale.value == pytest.approx(2 * (c_mu(prior).value - lim.digit_intercept.value))
    assert limit_predictions(catalog.parity(4), jeffreys(4)).r_mu is None


def test_population_report_shares_samples():
    q, prior = catalog.grr(3, 1.0), jeffreys(3)
    rep = population_report(q, prior, CFG)
    assert rep.u_as == asymptotic_utility(q, prior, CFG)
    assert rep.f_mu.value == pytest.approx(effective_participation(q, prior, CFG).value, rel=1e-12)


@st.composite
def faithful_protocols(draw):
    a = draw(st.integers(2, 4))
    b = draw(st.integers(a, 4))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return catalog.random_protocol(a, b, np.random.default_rng(seed))


SMALL = McConfig(20_000, seed=3)


@settings(max_examples=25, deadline=None)
@given(faithful_protocols())
def test_population_inequalities(q):
    prior = jeffreys(q.a)
    s = avg_privacy(q, prior, SMALL)
    assert -3 * s.std_error <= s.value <= 1 + 3 * s.std_error
    assert s.value >= worst_case_privacy(q) - 3 * s.std_error
    u = asymptotic_utility(q, prior, SMALL)
    assert u.value <= c_mu(prior).value + 3 * u.std_error
    assert u.value <= tradeoff_bounds(q, prior).bound_uas + 3 * u.std_error


@settings(max_examples=20, deadline=None)
@given(faithful_protocols(), st.integers(0, 2 ** 32 - 1))
def test_combinator_inequalities(q, seed):
    rng = np.random.default_rng(seed)
    prior = jeffreys(q.a)
    r = catalog.random_protocol(q.b, int(rng.integers(2, 5)), rng)
    q2 = catalog.random_protocol(q.a, int(rng.integers(q.a, 5)), rng)
    s_q = avg_privacy(q, prior, SMALL)
    s_rq = avg_privacy(compose(r, q), prior, SMALL)
    assert s_rq.value >= s_q.value - 3 * (s_q.std_error + s_rq.std_error)
    s_2 = avg_privacy(q2, prior, SMALL)
    s_p = avg_privacy(product([q, q2]), prior, SMALL)
    assert 1 - s_p.value <= (1 - s_q.value) + (1 - s_2.value) + 3 * (s_q.std_error + s_2.std_error + s_p.std_error)
    w = rng.dirichlet([1, 1])
    mixed = mixture(w, [q, q2])
    s_m = avg_privacy(mixed, prior, SMALL)
    assert s_m.value == pytest.approx(w[0] * s_q.value + w[1] * s_2.value, abs=1e-10)
    u = [asymptotic_utility(x, prior, SMALL) for x in (q, q2, mixed)]
    assert u[2].value >= w[0] * u[0].value + w[1] * u[1].value - 1e-10
