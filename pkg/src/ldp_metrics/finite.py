"""Finite-n information quantities by exact enumeration over tally vectors.

Sums run over compositions of n (tally vectors). The only approximation is
the expectation over the prior inside some terms: Gauss-Jacobi quadrature
when the alphabet has two letters, Monte Carlo otherwise.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import comb, gammaln, xlogy

from .errors import BudgetExceeded, DegeneratePrior, DimensionMismatch, NotFaithful
from .estimate import MetricEstimate, EXACT, MONTE_CARLO, QUADRATURE
from .montecarlo import entropy_rows, map_chunks, mc_moments
from .prior import (DirichletPrior, McConfig, log_multivariate_beta,
                    prior_differential_entropy, secret_entropy_exact)
from .protocol import Protocol, analyze_structure
from .population import column_entropies
from .quadrature import beta_expectation

BUDGET_ENV = "LDP_METRICS_BUDGET"
_NEG_HUGE = -1e300
_BLOCK = 2048


@dataclass(frozen=True)
class EnumerationBudget:
    """Limits for the enumeration kernels.

    Attributes:
        max_states: cap on the number of lattice points a kernel may visit.
        inner: "auto" (quadrature for two-letter alphabets, else Monte
            Carlo), "quadrature" or "mc".
        mc: sampling settings for the Monte-Carlo inner expectation.
        max_n: largest supported number of users.
    """

    max_states: int = 2_000_000
    inner: str = "auto"
    mc: McConfig = field(default_factory=McConfig)
    max_n: int = 64

    def __post_init__(self):
        if self.max_states < 1:
            raise ValueError("max_states must be >= 1")
        if self.inner not in ("auto", "quadrature", "mc"):
            raise ValueError(f"unknown inner method {self.inner!r}")

    @classmethod
    def from_env(cls, **kwargs) -> "EnumerationBudget":
        """Budget whose max_states may be overridden by LDP_METRICS_BUDGET."""
        env = os.environ.get(BUDGET_ENV)
        if env:
            kwargs.setdefault("max_states", int(env))
        return cls(**kwargs)

    def guard(self, states: int, what: str):
        if states > self.max_states:
            raise BudgetExceeded(f"{what} needs {states} states, budget is {self.max_states}")

    def use_quadrature(self, a: int) -> bool:
        if self.inner == "quadrature" and a != 2:
            raise ValueError("quadrature inner expectations need a two-letter alphabet")
        return self.inner == "quadrature" or (self.inner == "auto" and a == 2)


def composition_count(n: int, k: int) -> int:
    return int(comb(n + k - 1, k - 1, exact=True))


def compositions(n: int, k: int, budget: Optional[EnumerationBudget] = None) -> np.ndarray:
    """All vectors of k nonnegative integers summing to n, one per row.

    Rows come in lexicographically decreasing order of the first entry.
    The budget is checked before anything is allocated.
    """
    count = composition_count(n, k)
    if budget is not None:
        budget.guard(count, f"compositions of {n} into {k} parts")
    if k == 1:
        return np.array([[n]], dtype=np.int64)
    bars = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n + k - 1), k - 1)),
                       dtype=np.int64, count=count * (k - 1)).reshape(count, k - 1)
    edges = np.hstack([np.full((count, 1), -1), bars, np.full((count, 1), n + k - 1)])
    return np.diff(edges, axis=1) - 1


def log_multinomial(n: int, parts: np.ndarray) -> np.ndarray:
    return gammaln(n + 1.0) - gammaln(np.asarray(parts) + 1.0).sum(axis=-1)


def _check(q: Protocol, prior: DirichletPrior, n: int, budget: EnumerationBudget):
    if q.a != prior.a:
        raise DimensionMismatch(f"protocol has {q.a} inputs but prior has {prior.a}")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > budget.max_n:
        raise BudgetExceeded(f"n={n} exceeds the supported maximum {budget.max_n}")


def _two_letter(t):
    return np.column_stack([t, 1.0 - t])


def _log_r(p: np.ndarray, m: np.ndarray, tallies: np.ndarray) -> np.ndarray:
    """log prod_y (Qp)_y^{s_y} for each point (rows of p) and tally (rows of tallies)."""
    with np.errstate(divide="ignore"):
        logq = np.maximum(np.log(p @ m.T), _NEG_HUGE)
    return logq @ tallies.T


def _r_terms(p, m, tallies):
    logr = _log_r(p, m, tallies)
    r = np.exp(logr)
    return np.hstack([r, r * logr])


def _assemble(log_c, er, erlogr):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.exp(log_c) * (erlogr - np.where(er > 0, er * np.log(er), 0.0))
    return math.fsum(terms)


def mutual_info_reports_vs_p(q: Protocol, prior: DirichletPrior, n: int,
                             budget: Optional[EnumerationBudget] = None) -> MetricEstimate:
    """I(Y_1..Y_n; P) through the report tally S.

    I = sum_s C_s (E[r_s log r_s] - E[r_s] log E[r_s]) with
    r_s(p) = prod_y (Qp)_y^{s_y} and C_s = n! / prod_y s_y!, the number of
    report sequences with tally s.

    Returns:
        MetricEstimate; method "quadrature" for a = 2 by default, otherwise
        "monte-carlo" with a delta-method standard error.
    """
    budget = budget or EnumerationBudget()
    _check(q, prior, n, budget)
    tallies = compositions(n, q.b, budget)
    log_c = log_multinomial(n, tallies)
    m = q.matrix
    if budget.use_quadrature(q.a):
        a0, a1 = prior.alpha
        parts = []
        for lo in range(0, len(tallies), _BLOCK):
            block = tallies[lo:lo + _BLOCK]
            k = len(block)
            e = beta_expectation(lambda t: _r_terms(_two_letter(t), m, block), a0, a1)
            parts.append(_assemble(log_c[lo:lo + _BLOCK], e[:k], e[k:]))
        return MetricEstimate(math.fsum(parts), method=QUADRATURE)

    cfg = budget.mc
    k = len(tallies)
    first = mc_moments(prior, lambda p, lp: _r_terms(p, m, tallies), cfg, covariance=False)
    er, erlogr = first.mean[:k], first.mean[k:]
    value = _assemble(log_c, er, erlogr)
    with np.errstate(divide="ignore"):
        coef = np.exp(log_c) * (np.where(er > 0, np.log(er), 0.0) + 1.0)
    c_s = np.exp(log_c)

    def influence(p, lp):
        logr = _log_r(p, m, tallies)
        r = np.exp(logr)
        return ((r * logr) @ c_s - r @ coef)[:, None]

    second = mc_moments(prior, influence, cfg, covariance=False)
    return MetricEstimate(value, float(second.std_error[0]), first.count, cfg.seed, MONTE_CARLO)


def tally_log_probabilities(prior: DirichletPrior, n: int, budget: Optional[EnumerationBudget] = None):
    """Secret tallies t and log P(T = t) under the Dirichlet-multinomial law."""
    budget = budget or EnumerationBudget()
    t = compositions(n, prior.a, budget)
    log_m = log_multivariate_beta(prior.alpha + t) - log_multivariate_beta(prior.alpha)
    return t, log_multinomial(n, t) + log_m, log_m


def entropy_tallies(prior: DirichletPrior, n: int, budget: Optional[EnumerationBudget] = None) -> MetricEstimate:
    """H(T) for the secret tally T, exact."""
    _, log_pt, _ = tally_log_probabilities(prior, n, budget)
    return MetricEstimate.exact(max(0.0, -math.fsum(np.exp(log_pt) * log_pt)))


def mutual_info_secrets_vs_p(prior: DirichletPrior, n: int,
                             budget: Optional[EnumerationBudget] = None) -> MetricEstimate:
    """I(X_1..X_n; P), exact.

    Equals -sum_t P(t) log m_t - n H(X|P), where m_t = B(alpha + t) / B(alpha)
    is the probability of any one secret sequence with tally t.
    """
    _, log_pt, log_m = tally_log_probabilities(prior, n, budget)
    value = -math.fsum(np.exp(log_pt) * log_m) - n * secret_entropy_exact(prior)
    return MetricEstimate.exact(max(value, 0.0))


def _column_law(col: np.ndarray, count: int, b: int):
    parts = compositions(count, b)
    logp = log_multinomial(count, parts) + xlogy(parts, col).sum(axis=1)
    keep = np.isfinite(logp)
    return parts[keep], np.exp(logp[keep])


def report_law_given_tally(q: Protocol, t) -> dict:
    """P(S = s | T = t) as a dict from report tallies to probabilities.

    The reports of the t_x users holding x are multinomial with column x, so
    the law of S is the convolution of these column laws.
    """
    law = {(0,) * q.b: 1.0}
    for x, count in enumerate(t):
        if count == 0:
            continue
        parts, probs = _column_law(q.matrix[:, x], int(count), q.b)
        nxt = {}
        for s, ps in law.items():
            base = np.asarray(s)
            for row, pr in zip(parts, probs):
                key = tuple((base + row).tolist())
                nxt[key] = nxt.get(key, 0.0) + ps * pr
        law = nxt
    return law


@dataclass(frozen=True)
class TallyJoint:
    """Exact joint law of (S, T) with its information summaries."""

    mutual_information: float
    entropy_s: float
    entropy_t: float


def tally_joint(q: Protocol, prior: DirichletPrior, n: int,
                budget: Optional[EnumerationBudget] = None) -> TallyJoint:
    budget = budget or EnumerationBudget()
    _check(q, prior, n, budget)
    budget.guard(composition_count(n, q.a * q.b), "the (report, secret) count matrices")
    t_all, log_pt, _ = tally_log_probabilities(prior, n, budget)
    pt = np.exp(log_pt)
    conditionals = [report_law_given_tally(q, t) for t in t_all]
    ps = {}
    for w, law in zip(pt, conditionals):
        for s, v in law.items():
            ps[s] = ps.get(s, 0.0) + w * v
    terms = []
    for w, law in zip(pt, conditionals):
        for s, v in law.items():
            if v > 0 and w > 0:
                terms.append(w * v * math.log(v / ps[s]))
    h_s = -math.fsum(v * math.log(v) for v in ps.values() if v > 0)
    h_t = -math.fsum(pt * log_pt)
    return TallyJoint(max(math.fsum(terms), 0.0), max(h_s, 0.0), max(h_t, 0.0))


def mutual_info_reports_vs_tallies(q: Protocol, prior: DirichletPrior, n: int,
                                   budget: Optional[EnumerationBudget] = None) -> MetricEstimate:
    """I(S; T), exact, by summing over (s, t) pairs."""
    return MetricEstimate.exact(tally_joint(q, prior, n, budget).mutual_information)


def distribution_utility(q: Protocol, prior: DirichletPrior, n: int,
                         budget: Optional[EnumerationBudget] = None) -> MetricEstimate:
    """U^distr = I(Y;P) / I(X;P) for n users.

    The denominator is the exact value of I(X;P) (the identity protocol's
    numerator).

    Raises:
        DegeneratePrior: I(X;P) < 1e-12, e.g. n = 0.
    """
    budget = budget or EnumerationBudget()
    num = mutual_info_reports_vs_p(q, prior, n, budget)
    den = mutual_info_secrets_vs_p(prior, n, budget).value
    if den < 1e-12:
        raise DegeneratePrior(f"I(X;P) = {den} is too small to normalise by")
    return MetricEstimate(num.value / den, num.std_error / den, num.sample_count, num.seed, num.method)


def tally_utility(q: Protocol, prior: DirichletPrior, n: int,
                  budget: Optional[EnumerationBudget] = None) -> MetricEstimate:
    """U^tally = I(S;T) / H(T), exact."""
    joint = tally_joint(q, prior, n, budget)
    if joint.entropy_t < 1e-12:
        raise DegeneratePrior("H(T) vanishes")
    return MetricEstimate.exact(joint.mutual_information / joint.entropy_t)


def digit_utility(q: Protocol, prior: DirichletPrior, n: int,
                  budget: Optional[EnumerationBudget] = None) -> MetricEstimate:
    """U^digit = (I(Y;P) - h(P)) / (a - 1); defined for faithful protocols."""
    if not analyze_structure(q).faithful:
        raise NotFaithful("digit utility is defined for faithful protocols only")
    mi = mutual_info_reports_vs_p(q, prior, n, budget)
    k = q.a - 1
    return MetricEstimate((mi.value - prior_differential_entropy(prior)) / k, mi.std_error / k,
                          mi.sample_count, mi.seed, mi.method)


def avg_privacy_finite_n(q: Protocol, prior: DirichletPrior, n: int,
                         budget: Optional[EnumerationBudget] = None) -> MetricEstimate:
    """Average privacy evaluated with n users by enumeration.

    S(n) = 1 - E[H(Y|P) - H(Y|X,P)] / E[H(X|P)] for the length-n vectors,
    with every conditional entropy obtained by summing over tally vectors.
    Agreement across n checks that the metric is independent of n.
    """
    budget = budget or EnumerationBudget()
    _check(q, prior, n, budget)
    if n < 1:
        raise ValueError("need at least one user")
    s_all = compositions(n, q.b, budget)
    log_cs = log_multinomial(n, s_all)
    t_all = compositions(n, q.a, budget)
    log_ct = log_multinomial(n, t_all)
    hcol = column_entropies(q)
    m = q.matrix

    def terms(p):
        logr = _log_r(p, m, s_all)
        h_y = -(np.exp(logr + log_cs) * logr).sum(axis=1)
        with np.errstate(divide="ignore"):
            logp = np.maximum(np.log(p), _NEG_HUGE)
        logpt = logp @ t_all.T
        wt = np.exp(logpt + log_ct)
        h_yx = wt @ (t_all @ hcol)
        h_x = -(wt * logpt).sum(axis=1)
        return np.column_stack([h_y - h_yx, h_x])

    if budget.use_quadrature(q.a):
        a0, a1 = prior.alpha
        leak, h = beta_expectation(lambda t: terms(_two_letter(t)), a0, a1)
        return MetricEstimate(1.0 - leak / h, method=QUADRATURE)
    from .montecarlo import ratio_of_means
    summary = mc_moments(prior, lambda p, lp: terms(p), budget.mc)
    r, se = ratio_of_means(summary, 0, 1)
    return MetricEstimate(1.0 - r, se, summary.count, budget.mc.seed, MONTE_CARLO)
