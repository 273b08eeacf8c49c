import math

import numpy as np
import pytest

from ldp_metrics import catalog
from ldp_metrics.catalog import (UeParams, blh_matrix, deterministic, grr, grr_asymptotic_utility_closed,
                                 grr_avg_privacy_closed, grr_mutual_info_closed, identity, local_hash,
                                 lh_privacy_decomposition, oue, oue_params, parity, rappor_basic,
                                 rappor_params, ue_avg_privacy_closed, ue_mutual_info_closed, unary_encoding)
from ldp_metrics.errors import AlphabetTooLarge, BudgetExceeded, EpsilonZero, OddAlphabet, OutputSpaceTooLarge
from ldp_metrics.finite import EnumerationBudget, mutual_info_reports_vs_p, mutual_info_secrets_vs_p
from ldp_metrics.population import asymptotic_utility, avg_privacy, effective_participation
from ldp_metrics.prior import McConfig, c_mu, jeffreys
from ldp_metrics.protocol import analyze_structure, ldp_level, worst_case_privacy

CFG = McConfig(100_000, seed=5)


def test_grr_entries():
    assert np.allclose(grr(2, 0.0).matrix, 0.5)
    m = grr(3, math.log(2)).matrix
    assert np.allclose(np.diag(m), 0.5) and np.allclose(m[~np.eye(3, dtype=bool)], 0.25)


@pytest.mark.parametrize("a, eps", [(2, 0.3), (4, 2.0), (7, 5.0)])
def test_grr_ldp_level_is_eps(a, eps):
    assert ldp_level(grr(a, eps)) == pytest.approx(eps, abs=1e-12)


def test_unary_encoding_columns():
    q = unary_encoding(3, UeParams(0.7, 0.2))
    assert q.matrix.shape == (8, 3)
    assert np.allclose(q.matrix.sum(axis=0), 1.0, atol=1e-12)
    assert ldp_level(q) == pytest.approx(math.log(0.7 * 0.8 / (0.2 * 0.3)), abs=1e-12)


def test_unary_encoding_deterministic_singletons():
    q = unary_encoding(3, UeParams(1.0, 0.0))
    assert q.b == 3
    assert sorted(map(sorted, q.labels_out)) == [[0], [1], [2]]
    assert ldp_level(q) == math.inf


def test_unary_encoding_too_large():
    with pytest.raises(AlphabetTooLarge):
        unary_encoding(13, UeParams(0.6, 0.4))


@pytest.mark.parametrize("ctor", [rappor_basic, oue, lambda a, e: blh_matrix(e, a)])
@pytest.mark.parametrize("eps", [0.5, 1.0, 3.0])
def test_ue_variants_ldp_level(ctor, eps):
    q = ctor(3, eps)
    assert ldp_level(q) == pytest.approx(eps, abs=1e-12)
    assert analyze_structure(q).faithful


def test_ue_table_values():
    assert oue_params(1.0).lam == pytest.approx(1 / (math.e + 1))
    assert oue_params(1.0).kappa == 0.5
    assert rappor_params(2.0).kappa == pytest.approx(math.e / (math.e + 1))


def test_parity_and_deterministic():
    q = parity(4)
    assert q.matrix[0, 2] == 1.0 and q.matrix[1, 2] == 0.0
    assert np.array_equal(identity(3).matrix, np.eye(3))
    d = deterministic([0, 1, 1])
    assert np.all(d.matrix.sum(axis=0) == 1) and set(np.unique(d.matrix)) == {0.0, 1.0}
    with pytest.raises(OddAlphabet):
        parity(3)


def test_local_hash_shape_and_level():
    q = local_hash(2, 2, 1.0)
    assert q.b == 8
    assert ldp_level(local_hash(3, 2, 1.0)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(OutputSpaceTooLarge):
        local_hash(6, 6, 1.0, cap=1000)


def test_local_hash_equals_explicit_mixture():
    from ldp_metrics.protocol import build_protocol, mixture
    a, g, eps = 3, 2, 1.0
    # GRR composed with h, written out directly: constant hashes would lose
    # their empty output row on construction.
    onehot = [np.eye(g)[:, h] for h in catalog.hash_functions(a, g)]
    parts = [build_protocol(grr(g, eps).matrix @ m) for m in onehot]
    explicit = mixture(np.full(len(parts), 1 / len(parts)), parts)
    assert np.allclose(explicit.matrix, local_hash(a, g, eps).matrix, atol=1e-15)


def test_lh_decomposition_matches_direct():
    prior = jeffreys(3)
    direct = avg_privacy(local_hash(3, 2, 1.0), prior, CFG)
    decomposed = lh_privacy_decomposition(3, 2, 1.0, prior, CFG)
    assert abs(direct.value - decomposed.value) < 1e-10


def test_lh_binary_hash_matches_blh():
    prior, cfg = jeffreys(3), McConfig(20_000, seed=9)
    assert avg_privacy(local_hash(3, 2, 1.0), prior, cfg).value == pytest.approx(
        avg_privacy(blh_matrix(1.0, 3), prior, cfg).value, abs=1e-10)


def test_grr_privacy_closed_limits():
    assert grr_avg_privacy_closed(3, 0.0).value == 1.0
    assert grr_avg_privacy_closed(3, 30.0).value <= 1e-6


@pytest.mark.parametrize("a, eps", [(2, 1.0), (4, 2.0), (5, 0.5)])
def test_grr_privacy_closed_matches_mc(a, eps):
    closed = grr_avg_privacy_closed(a, eps).value
    assert avg_privacy(grr(a, eps), jeffreys(a), CFG).within(closed)


@pytest.mark.parametrize("a, eps", [(2, 1.0), (3, 1.0), (4, 3.0)])
def test_grr_utility_closed_matches_mc(a, eps):
    closed = grr_asymptotic_utility_closed(a, eps).value
    assert asymptotic_utility(grr(a, eps), jeffreys(a), CFG).within(closed)


def test_grr_utility_closed_limits():
    assert grr_asymptotic_utility_closed(3, 0.0).value == -math.inf
    with pytest.raises(EpsilonZero):
        grr_asymptotic_utility_closed(3, 0.0, strict=True)
    assert grr_asymptotic_utility_closed(3, 40.0).value == pytest.approx(c_mu(jeffreys(3)).value, abs=1e-8)
    assert effective_participation(grr(3, 40.0), jeffreys(3), CFG).value == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("n", [0, 1, 2, 4])
def test_grr_mutual_info_closed_matches_general(n):
    general = mutual_info_reports_vs_p(grr(2, 1.0), jeffreys(2), n).value
    assert grr_mutual_info_closed(2, 1.0, n).value == pytest.approx(general, abs=1e-9)


def test_grr_mutual_info_closed_eps_zero():
    assert abs(grr_mutual_info_closed(3, 0.0, 3).value) <= 1e-9


def test_grr_mutual_info_budget():
    with pytest.raises(BudgetExceeded):
        grr_mutual_info_closed(4, 1.0, 20, EnumerationBudget(max_states=100))


def test_ue_privacy_closed_examples():
    assert ue_avg_privacy_closed(3, UeParams(0.4, 0.4)).value == pytest.approx(1.0, abs=1e-12)
    limit = ue_avg_privacy_closed(3, oue_params(40.0)).value
    assert 0.05 < limit < 0.95


@pytest.mark.parametrize("a, params", [(3, oue_params(2.0)), (2, rappor_params(1.0)), (4, UeParams(0.8, 0.3))])
def test_ue_privacy_closed_matches_mc(a, params):
    closed = ue_avg_privacy_closed(a, params).value
    assert avg_privacy(unary_encoding(a, params), jeffreys(a), CFG).within(closed)


def test_ue_mutual_info_closed():
    assert ue_mutual_info_closed(2, oue_params(1.0), 0).value == 0.0
    ident = ue_mutual_info_closed(2, UeParams(1.0, 0.0), 1).value
    assert ident == pytest.approx(mutual_info_secrets_vs_p(jeffreys(2), 1).value, abs=1e-9)
    for params in (oue_params(1.0), UeParams(0.7, 0.2)):
        general = mutual_info_reports_vs_p(unary_encoding(2, params), jeffreys(2), 2).value
        assert ue_mutual_info_closed(2, params, 2).value == pytest.approx(general, abs=1e-9)


@pytest.mark.parametrize("a", range(2, 9))
def test_privacy_exceeds_worst_case_at_eps2(a):
    s_wc = math.exp(-2)
    assert grr_avg_privacy_closed(a, 2.0).value > s_wc
    for params in (rappor_params(2.0), oue_params(2.0)):
        assert ue_avg_privacy_closed(a, params).value > s_wc
    assert worst_case_privacy(grr(a, 2.0)) == pytest.approx(s_wc)
