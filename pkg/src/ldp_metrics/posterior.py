"""Posterior of the population distribution P given report tallies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp, xlogy

from .errors import (AllSamplesUnderflow, DimensionMismatch,
                     EffectiveSampleSizeTooLow, TallyLengthMismatch)
from .estimate import MetricEstimate, EXACT, MONTE_CARLO
from .finite import EnumerationBudget, compositions, composition_count, log_multinomial
from .montecarlo import map_chunks
from .prior import DirichletPrior, McConfig, jeffreys, log_multivariate_beta
from .protocol import Protocol

MIN_ESS = 100.0


def _as_tallies(tallies, b: int) -> np.ndarray:
    s = np.asarray(tallies)
    if s.ndim != 1 or s.size != b:
        raise TallyLengthMismatch(f"expected {b} report counts, got shape {s.shape}")
    if np.any(s < 0) or np.any(s != np.round(s)):
        raise ValueError("report counts must be nonnegative integers")
    return s.astype(np.int64)


@dataclass(frozen=True, eq=False)
class PosteriorDensity:
    """Posterior of P given report tallies s.

    The unnormalised log density is log f(p) + sum_y s_y log (Qp)_y, where f
    is the prior density. The normaliser C = E_prior[prod_y (Qp)_y^{s_y}]
    is attached once computed.
    """

    protocol: Protocol
    prior: DirichletPrior
    tallies: np.ndarray
    normalizer: Optional[MetricEstimate] = None

    @property
    def n(self) -> int:
        return int(self.tallies.sum())

    def log_likelihood(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        qp = p @ self.protocol.matrix.T
        return xlogy(self.tallies, qp).sum(axis=-1)

    def log_unnormalized(self, p) -> np.ndarray:
        return self.prior.log_density(p) + self.log_likelihood(p)

    def log_pdf(self, p) -> np.ndarray:
        if self.normalizer is None:
            raise ValueError("normaliser not set; use normalize_mc or grr_posterior")
        return self.log_unnormalized(p) - math.log(self.normalizer.value)

    def with_normalizer(self, c: MetricEstimate) -> "PosteriorDensity":
        return PosteriorDensity(self.protocol, self.prior, self.tallies, c)


def posterior_unnormalized(q: Protocol, prior: DirichletPrior, tallies) -> PosteriorDensity:
    if prior.a != q.a:
        raise DimensionMismatch("prior and protocol alphabets differ")
    return PosteriorDensity(q, prior, _as_tallies(tallies, q.b))


def _log_weights(density: PosteriorDensity):
    m = density.protocol.matrix
    s = density.tallies

    def fn(p, lp, i):
        return xlogy(s, p @ m.T).sum(axis=1)
    return fn


def _pass_max(density, config):
    fn = _log_weights(density)
    return max(map_chunks(density.prior, config, lambda p, lp, i: float(fn(p, lp, i).max())))


def normalize_mc(density: PosteriorDensity, config: Optional[McConfig] = None) -> MetricEstimate:
    """Monte-Carlo normaliser C = E_prior[prod_y (Qp)_y^{s_y}].

    Likelihoods are rescaled by their largest value over the whole stream
    before exponentiating.

    Raises:
        AllSamplesUnderflow: every sample has zero likelihood.
    """
    config = config or McConfig()
    fn = _log_weights(density)
    top = _pass_max(density, config)
    if not np.isfinite(top):
        raise AllSamplesUnderflow("every prior sample has zero likelihood")

    def sums(p, lp, i):
        w = np.exp(fn(p, lp, i) - top)
        return math.fsum(w), math.fsum(w * w), w.size

    parts = map_chunks(density.prior, config, sums)
    n = sum(q[2] for q in parts)
    s1 = math.fsum(q[0] for q in parts)
    s2 = math.fsum(q[1] for q in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    scale = math.exp(top)
    return MetricEstimate(scale * mean, scale * math.sqrt(var / n), n, config.seed, MONTE_CARLO)


@dataclass(frozen=True, eq=False)
class DirichletMixture:
    """Finite mixture sum_k w_k Dirichlet(alpha_k).

    Attributes:
        weights: component weights, summing to 1.
        alphas: component parameters, one row per component.
        log_normalizer: log of E_prior[likelihood] for the data that produced
            the mixture, when known.
    """

    weights: np.ndarray
    alphas: np.ndarray
    log_normalizer: Optional[float] = None

    def __post_init__(self):
        if np.any(self.alphas <= 0):
            raise ValueError("component parameters must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-9 or np.any(self.weights < 0):
            raise ValueError("mixture weights must be a probability vector")

    @property
    def size(self) -> int:
        return len(self.weights)

    def log_pdf(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        flat = p.reshape(-1, p.shape[-1])
        al = self.alphas[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(al == 1.0, 0.0, (al - 1.0) * np.log(flat)[None])
            comp = terms.sum(axis=-1) - log_multivariate_beta(self.alphas)[:, None]
            out = logsumexp(comp + np.log(self.weights)[:, None], axis=0)
        return out.reshape(p.shape[:-1])

    def pdf(self, p):
        return np.exp(self.log_pdf(p))

    def mean(self) -> np.ndarray:
        a0 = self.alphas.sum(axis=1, keepdims=True)
        return self.weights @ (self.alphas / a0)

    def variance(self) -> np.ndarray:
        a0 = self.alphas.sum(axis=1, keepdims=True)
        second = self.weights @ (self.alphas * (self.alphas + 1) / (a0 * (a0 + 1)))
        return second - self.mean() ** 2

    def marginal(self, x: int):
        """Marginal of P_x: list of (weight, Beta(a, b) parameters)."""
        a0 = self.alphas.sum(axis=1)
        return [(float(w), (float(al[x]), float(t - al[x]))) for w, al, t in zip(self.weights, self.alphas, a0)]

    def marginal_cdf(self, x: int, v) -> np.ndarray:
        a0 = self.alphas.sum(axis=1)
        v = np.asarray(v, dtype=float)
        cdfs = stats.beta.cdf(v[None, ...], self.alphas[:, x].reshape(-1, *([1] * v.ndim)),
                              (a0 - self.alphas[:, x]).reshape(-1, *([1] * v.ndim)))
        return np.tensordot(self.weights, cdfs, axes=1)

    def top(self, k: int) -> "DirichletMixture":
        """The k heaviest components, renormalised."""
        order = np.argsort(-self.weights, kind="stable")[:k]
        w = self.weights[order]
        return DirichletMixture(w / w.sum(), self.alphas[order], self.log_normalizer)


def _row_expansion(row: np.ndarray, count: int):
    parts = compositions(count, row.size)
    log_c = log_multinomial(count, parts) + xlogy(parts, row).sum(axis=1)
    keep = np.isfinite(log_c)
    return parts[keep], log_c[keep]


def tally_coefficients(q: Protocol, tallies, budget: Optional[EnumerationBudget] = None) -> dict:
    """Expand prod_y (Qp)_y^{s_y} = sum_t c_t p^t and return {t: log c_t}.

    Each factor (sum_x Q[y|x] p_x)^{s_y} is expanded multinomially and the
    expansions are multiplied row by row, so terms are grouped by the secret
    tally t rather than by individual secret sequences.
    """
    budget = budget or EnumerationBudget()
    s = _as_tallies(tallies, q.b)
    n = int(s.sum())
    budget.guard(composition_count(n, q.a), "posterior mixture components")
    poly = {(0,) * q.a: 0.0}
    for y in np.flatnonzero(s):
        budget.guard(composition_count(int(s[y]), q.a), "a row expansion")
        parts, log_c = _row_expansion(q.matrix[y], int(s[y]))
        nxt = {}
        for t, lt in poly.items():
            base = np.asarray(t)
            for row, lc in zip(parts, log_c):
                key = tuple((base + row).tolist())
                nxt.setdefault(key, []).append(lt + lc)
        poly = {k: float(logsumexp(v)) for k, v in nxt.items()}
    return poly


def posterior_dirichlet_mixture(q: Protocol, prior: DirichletPrior, tallies=None, reports=None,
                                budget: Optional[EnumerationBudget] = None) -> DirichletMixture:
    """Exact posterior as a mixture of Dirichlet(alpha + t) over secret tallies t.

    Pass either the report tallies or the raw report vector (output indices).
    Component t gets weight proportional to c_t B(alpha + t) / B(alpha); the
    weights sum to the normaliser C before normalisation.
    """
    if prior.a != q.a:
        raise DimensionMismatch("prior and protocol alphabets differ")
    if tallies is None:
        if reports is None:
            raise ValueError("give tallies or reports")
        tallies = np.bincount(np.asarray(reports, dtype=np.int64), minlength=q.b)
    coef = tally_coefficients(q, tallies, budget)
    ts = np.array(list(coef.keys()), dtype=float).reshape(len(coef), q.a)
    log_c = np.array(list(coef.values()))
    log_w = log_c + log_multivariate_beta(prior.alpha + ts) - log_multivariate_beta(prior.alpha)
    total = float(logsumexp(log_w))
    return DirichletMixture(np.exp(log_w - total), prior.alpha + ts, total)


def grr_posterior(a: int, epsilon: float, tallies, prior: Optional[DirichletPrior] = None,
                  budget: Optional[EnumerationBudget] = None) -> PosteriorDensity:
    """Posterior for GRR reports with the exact normaliser.

    C = sum_{k <= s} B(alpha + k) beta^|k| prod binom(s_x, k_x) / (B(alpha) (a + beta)^n),
    accumulated in log space. The prior defaults to Jeffreys.
    """
    from .catalog import grr

    q = grr(a, epsilon)
    prior = prior or jeffreys(a)
    density = posterior_unnormalized(q, prior, tallies)
    s = density.tallies
    budget = budget or EnumerationBudget()
    budget.guard(math.prod(int(v) + 1 for v in s), "the GRR posterior lattice")
    import itertools
    ks = np.array(list(itertools.product(*(range(int(v) + 1) for v in s))), dtype=np.int64)
    beta = math.expm1(epsilon)
    tot = ks.sum(axis=1)
    with np.errstate(divide="ignore"):
        lb = np.where(tot > 0, tot * (math.log(beta) if beta > 0 else -np.inf), 0.0)
    logs = (lb + (gammaln(s + 1.0) - gammaln(ks + 1.0) - gammaln(s - ks + 1.0)).sum(axis=1)
            + log_multivariate_beta(prior.alpha + ks) - log_multivariate_beta(prior.alpha)
            - density.n * math.log(a + beta))
    return density.with_normalizer(MetricEstimate.exact(math.exp(logsumexp(logs))))


@dataclass(frozen=True)
class PosteriorMoments:
    """Posterior mean and variance of each coordinate of P.

    ``mean_se`` is None on the exact path. ``method`` records which path
    produced the numbers.
    """

    mean: np.ndarray
    variance: np.ndarray
    mean_se: Optional[np.ndarray]
    method: str
    ess: Optional[float] = None


def posterior_moments(obj, config: Optional[McConfig] = None) -> PosteriorMoments:
    """Moments from a DirichletMixture (exact) or a PosteriorDensity
    (self-normalised importance sampling with prior draws).

    Raises:
        EffectiveSampleSizeTooLow: importance weights have ESS below 100.
    """
    if isinstance(obj, DirichletMixture):
        return PosteriorMoments(obj.mean(), obj.variance(), None, EXACT)
    density = obj
    config = config or McConfig()
    fn = _log_weights(density)
    top = _pass_max(density, config)
    if not np.isfinite(top):
        raise AllSamplesUnderflow("every prior sample has zero likelihood")

    def sums(p, lp, i):
        w = np.exp(fn(p, lp, i) - top)
        w2 = w * w
        return np.concatenate([[w.sum(), w2.sum()], w @ p, w @ (p * p), w2 @ p, w2 @ (p * p)])

    parts = np.stack(map_chunks(density.prior, config, sums))
    tot = np.array([math.fsum(parts[:, j]) for j in range(parts.shape[1])])
    a = density.prior.a
    sw, sw2 = tot[0], tot[1]
    wp, wpp, w2p, w2pp = (tot[2 + i * a:2 + (i + 1) * a] for i in range(4))
    ess = sw * sw / sw2
    if ess < MIN_ESS:
        raise EffectiveSampleSizeTooLow(f"effective sample size {ess:.1f} is below {MIN_ESS}")
    mean = wp / sw
    var = wpp / sw - mean ** 2
    se = np.sqrt(np.maximum(w2pp - 2 * mean * w2p + mean ** 2 * sw2, 0.0)) / sw
    return PosteriorMoments(mean, var, se, MONTE_CARLO, ess)
