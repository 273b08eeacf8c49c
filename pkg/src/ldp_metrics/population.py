"""Sample-size independent metrics: average privacy, asymptotic utility,
effective participation, tradeoff bounds and large-n limits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (DegeneratePrior, DegenerateWorstCase, DimensionMismatch,
                     NotFaithful, TooManyRejections)
from .estimate import MetricEstimate, MONTE_CARLO
from .montecarlo import entropy_rows, mc_moments, ratio_of_means
from .prior import (LOG_2PIE, DirichletPrior, McConfig, c_mu_exact,
                    prior_differential_entropy)
from .protocol import Protocol, analyze_structure, worst_case_privacy

REJECT_FLOOR = 1e-300
REJECT_BUDGET = 1e-3


def column_entropies(q: Protocol) -> np.ndarray:
    """H(Y | X=x) for every input x."""
    return entropy_rows(q.matrix.T)


def privacy_terms(q: Protocol):
    """Return fn(p, log_p) -> [H(Y|P=p) - H(Y|X,P=p), H(X|P=p)] per sample."""
    hcol = column_entropies(q)
    m = q.matrix

    def fn(p, lp):
        leak = entropy_rows(p @ m.T) - p @ hcol
        return np.column_stack([leak, entropy_rows(p, lp)])

    return fn


def _check(q: Protocol, prior: DirichletPrior):
    if q.a != prior.a:
        raise DimensionMismatch(f"protocol has {q.a} inputs but prior has {prior.a}")


def avg_privacy(q: Protocol, prior: DirichletPrior, config: Optional[McConfig] = None) -> MetricEstimate:
    """Average privacy S_mu = 1 - I(Y;X|P) / H(X|P) for a single user.

    The value does not depend on the number of users, so one user suffices.
    Inner sums over inputs and outputs are exact; the prior expectation is
    sampled and the ratio error comes from the delta method.

    Raises:
        DegeneratePrior: if the estimated H(X|P) is below 1e-9.
    """
    _check(q, prior)
    config = config or McConfig()
    s = mc_moments(prior, privacy_terms(q), config)
    if s.mean[1] < 1e-9:
        raise DegeneratePrior("prior puts (almost) all mass on deterministic populations")
    r, se = ratio_of_means(s, 0, 1)
    return MetricEstimate(1.0 - r, se, s.count, config.seed, MONTE_CARLO)


def logdet_fisher(m: np.ndarray, p: np.ndarray) -> np.ndarray:
    """log det(Q^T diag(1/Qp) Q) per row of p; NaN where some (Qp)_y < 1e-300."""
    qp = p @ m.T
    bad = qp.min(axis=1) < REJECT_FLOOR
    qp = np.where(bad[:, None], 1.0, qp)
    w = m[None, :, :] / np.sqrt(qp)[:, :, None]
    fisher = np.matmul(w.transpose(0, 2, 1), w)
    try:
        chol = np.linalg.cholesky(fisher)
        out = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
    except np.linalg.LinAlgError:
        sign, out = np.linalg.slogdet(fisher)
        out = np.where(sign > 0, out, -np.inf)
    return np.where(bad, np.nan, out)


def _fisher_summary(q, prior, config):
    m = q.matrix

    def fn(p, lp):
        ld = logdet_fisher(m, p)
        return np.column_stack([ld, ld + lp.sum(axis=1)])

    s = mc_moments(prior, fn, config)
    total = s.count + s.rejected
    if s.rejected > REJECT_BUDGET * total:
        raise TooManyRejections(f"{s.rejected} of {total} samples had an output probability below {REJECT_FLOOR}")
    return s


def _require_faithful(q):
    if not analyze_structure(q).faithful:
        raise NotFaithful("protocol matrix does not have full column rank")


def asymptotic_utility(q: Protocol, prior: DirichletPrior, config: Optional[McConfig] = None) -> MetricEstimate:
    """U^as = -1/2 log(2 pi e) + E[log det(Q^T D_P Q)] / (2a - 2), D_p = diag(1/Qp).

    Raises:
        NotFaithful: rank deficient protocols have no asymptotic utility.
        TooManyRejections: more than 0.1% of samples had a vanishing output
            probability.
    """
    _check(q, prior)
    _require_faithful(q)
    config = config or McConfig()
    s = _fisher_summary(q, prior, config)
    k = 2 * q.a - 2
    return MetricEstimate(-0.5 * LOG_2PIE + s.mean[0] / k, s.std_error[0] / k,
                          s.count, config.seed, MONTE_CARLO)


def effective_participation(q: Protocol, prior: DirichletPrior, config: Optional[McConfig] = None) -> MetricEstimate:
    """F_mu = exp(2 U^as - 2 C_mu); exactly 0 for protocols that are not faithful.

    U^as and C_mu are estimated from the same prior draws, so their
    difference is the sample mean of log det(Q^T D_P Q) + sum_x log P_x.
    """
    _check(q, prior)
    if not analyze_structure(q).faithful:
        return MetricEstimate.exact(0.0)
    config = config or McConfig()
    s = _fisher_summary(q, prior, config)
    scale = 1.0 / (q.a - 1)
    f = math.exp(scale * s.mean[1])
    return MetricEstimate(f, f * scale * s.std_error[1], s.count, config.seed, MONTE_CARLO)


@dataclass(frozen=True)
class TradeoffBounds:
    """Upper bounds on U^as and F_mu implied by the worst-case privacy."""

    bound_uas: float
    bound_fmu: float
    s_wc: float


def tradeoff_bounds(q: Protocol, prior: DirichletPrior, config: Optional[McConfig] = None) -> TradeoffBounds:
    """Bounds U^as <= -1/2 log(2 pi e) + log((1-S)/S) and
    F_mu <= exp(-2 C_mu) / (2 pi e) * ((1-S)/S)^2 with S = S^wc.

    ``config`` is accepted for interface symmetry; C_mu is exact for Dirichlet
    priors.

    Raises:
        NotFaithful: the bounds concern faithful protocols only.
        DegenerateWorstCase: S^wc is 0 or 1.
    """
    _check(q, prior)
    _require_faithful(q)
    s = worst_case_privacy(q)
    if s <= 0.0 or s >= 1.0:
        raise DegenerateWorstCase(f"worst-case privacy {s} leaves the bounds undefined")
    odds = (1.0 - s) / s
    c = c_mu_exact(prior)
    return TradeoffBounds(-0.5 * LOG_2PIE + math.log(odds),
                          math.exp(-2.0 * c - LOG_2PIE) * odds * odds, s)


@dataclass(frozen=True)
class LimitPrediction:
    """Large-n behaviour of the utility metrics.

    Attributes:
        u_distr_limit: limit of the distribution utility, (d-1)/(a-1).
        u_tally_limit: limit of the tally utility, (d+b'-2)/(2a-2).
        digit_slope: coefficient of log n in the digit utility (faithful only).
        digit_intercept: U^as, the constant term of the digit utility.
        one_minus_udistr_scale: 2(C_mu - U^as); 1 - U^distr behaves like this
            over log n.
        r_mu: (a-1) U^as + h(P), the constant in I(Y;P) - (a-1)/2 log n.
    """

    u_distr_limit: float
    u_tally_limit: float
    digit_slope: Optional[float] = None
    digit_intercept: Optional[MetricEstimate] = None
    one_minus_udistr_scale: Optional[MetricEstimate] = None
    r_mu: Optional[MetricEstimate] = None


def limit_predictions(q: Protocol, prior: DirichletPrior, config: Optional[McConfig] = None,
                      u_as: Optional[MetricEstimate] = None) -> LimitPrediction:
    """Limits of the utility metrics as n grows.

    Args:
        u_as: a precomputed asymptotic utility to reuse; computed if omitted.
    """
    _check(q, prior)
    st = analyze_structure(q)
    a = q.a
    u_distr = (st.rank - 1) / (a - 1)
    u_tally = (st.rank + st.class_count - 2) / (2 * a - 2)
    if not st.faithful:
        return LimitPrediction(u_distr, u_tally)
    u = u_as if u_as is not None else asymptotic_utility(q, prior, config)
    c = c_mu_exact(prior)
    scale = MetricEstimate(2.0 * (c - u.value), 2.0 * u.std_error, u.sample_count, u.seed, u.method)
    r = MetricEstimate((a - 1) * u.value + prior_differential_entropy(prior), (a - 1) * u.std_error,
                       u.sample_count, u.seed, u.method)
    return LimitPrediction(u_distr, u_tally, 0.5, u, scale, r)


@dataclass(frozen=True)
class PopulationReport:
    """All n-independent metrics of one protocol from one shared sample stream."""

    s_mu: MetricEstimate
    u_as: Optional[MetricEstimate]
    f_mu: MetricEstimate
    bounds: Optional[TradeoffBounds]


def population_report(q: Protocol, prior: DirichletPrior, config: Optional[McConfig] = None) -> PopulationReport:
    """S_mu, U^as, F_mu and the tradeoff bounds, sharing prior draws.

    U^as and F_mu come out of one pass over the samples.
    """
    _check(q, prior)
    config = config or McConfig()
    s_mu = avg_privacy(q, prior, config)
    st = analyze_structure(q)
    if not st.faithful:
        return PopulationReport(s_mu, None, MetricEstimate.exact(0.0), None)
    s = _fisher_summary(q, prior, config)
    k = 2 * q.a - 2
    u = MetricEstimate(-0.5 * LOG_2PIE + s.mean[0] / k, s.std_error[0] / k, s.count, config.seed, MONTE_CARLO)
    f_val = math.exp(2.0 * s.mean[1] / k)
    f = MetricEstimate(f_val, f_val * 2.0 * s.std_error[1] / k, s.count, config.seed, MONTE_CARLO)
    try:
        bounds = tradeoff_bounds(q, prior)
    except DegenerateWorstCase:
        bounds = None
    return PopulationReport(s_mu, u, f, bounds)
