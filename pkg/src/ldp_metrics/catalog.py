"""Built-in protocols and their closed-form metrics.

Closed forms assume the Jeffreys prior unless a prior is passed explicitly.
Every expectation over a Beta-distributed coordinate is a one-dimensional
Gauss-Jacobi quadrature.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .errors import (AlphabetTooLarge, BudgetExceeded, EpsilonZero,
                     OddAlphabet, OutputSpaceTooLarge, DimensionMismatch)
from .estimate import MetricEstimate, MONTE_CARLO, QUADRATURE
from .finite import (EnumerationBudget, composition_count, compositions,
                     log_multinomial)
from .montecarlo import entropy_rows, mc_moments, ratio_of_means
from .prior import (LOG_2PIE, DirichletPrior, McConfig, jeffreys,
                    log_multivariate_beta, secret_entropy_exact)
from .protocol import DEFAULT_OUTPUT_CAP, Protocol, build_protocol
from .quadrature import beta_expectation

UE_MAX_ALPHABET = 12


def _grr_matrix(a: int, epsilon: float) -> np.ndarray:
    beta = math.expm1(epsilon)
    m = np.full((a, a), 1.0 / (a + beta))
    np.fill_diagonal(m, (1.0 + beta) / (a + beta))
    return m


def grr(a: int, epsilon: float) -> Protocol:
    """Generalised randomised response: keep x with weight e^eps, else any other value.

    Diagonal e^eps / (e^eps + a - 1), off-diagonal 1 / (e^eps + a - 1).
    """
    if a < 2 or epsilon < 0 or not math.isfinite(epsilon):
        raise ValueError("grr needs a >= 2 and a finite epsilon >= 0")
    return build_protocol(_grr_matrix(a, epsilon))


def identity(a: int) -> Protocol:
    return build_protocol(np.eye(a))


def deterministic(mapping: Sequence[int], b: Optional[int] = None) -> Protocol:
    """Protocol reporting mapping[x]; outputs never hit are trimmed."""
    mapping = np.asarray(mapping, dtype=np.int64)
    b = int(mapping.max()) + 1 if b is None else b
    m = np.zeros((b, mapping.size))
    m[mapping, np.arange(mapping.size)] = 1.0
    return build_protocol(m)


def parity(a: int) -> Protocol:
    """Report x mod 2 (inputs are 0..a-1)."""
    if a % 2:
        raise OddAlphabet("parity needs an even alphabet size")
    return deterministic(np.arange(a) % 2, 2)


@dataclass(frozen=True)
class UeParams:
    """Unary encoding parameters: x stays in the report set with probability
    kappa, every other value enters it with probability lambda."""

    kappa: float
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "lam", float(self.lam))
        k, l = self.kappa, self.lam
        if not (0.0 <= l <= k <= 1.0):
            raise ValueError("need 0 <= lambda <= kappa <= 1")
        if k * (1 - l) <= 0:
            raise ValueError("kappa (1 - lambda) must be positive")

    @property
    def ldp(self) -> float:
        den = self.lam * (1 - self.kappa)
        return math.inf if den == 0 else math.log(self.kappa * (1 - self.lam) / den)


def _popcount(values: np.ndarray) -> np.ndarray:
    return np.array([bin(int(v)).count("1") for v in values], dtype=np.int64)


def unary_encoding(a: int, params: UeParams) -> Protocol:
    """Report a random subset of the alphabet, encoded as a bitmask.

    Output index y has bit x set exactly when x belongs to the reported set.
    Entries are kappa lam^(|y|-1) (1-lam)^(a-|y|) if x is in y and
    (1-kappa) lam^|y| (1-lam)^(a-|y|-1) otherwise.

    Raises:
        AlphabetTooLarge: a > 12 (4096 outputs).
    """
    if a > UE_MAX_ALPHABET:
        raise AlphabetTooLarge(f"unary encoding has 2^{a} outputs; limit is a <= {UE_MAX_ALPHABET}")
    if a < 2:
        raise ValueError("unary encoding needs a >= 2")
    k, l = params.kappa, params.lam
    ys = np.arange(2 ** a)
    size = _popcount(ys)[:, None]
    member = ((ys[:, None] >> np.arange(a)[None, :]) & 1).astype(bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        inside = k * np.power(l, np.maximum(size - 1, 0)) * np.power(1 - l, a - size)
        outside = (1 - k) * np.power(l, size) * np.power(1 - l, np.maximum(a - size - 1, 0))
    m = np.where(member, inside, outside)
    labels = [frozenset(np.flatnonzero(row).tolist()) for row in member]
    return build_protocol(m, labels_out=labels)


def rappor_params(epsilon: float) -> UeParams:
    h = math.exp(epsilon / 2)
    return UeParams(h / (h + 1), 1 / (h + 1))


def oue_params(epsilon: float) -> UeParams:
    return UeParams(0.5, 1 / (math.exp(epsilon) + 1))


def blh_params(epsilon: float) -> UeParams:
    e = math.exp(epsilon)
    return UeParams(e / (e + 1), 0.5)


def rappor_basic(a: int, epsilon: float) -> Protocol:
    return unary_encoding(a, rappor_params(epsilon))


def oue(a: int, epsilon: float) -> Protocol:
    return unary_encoding(a, oue_params(epsilon))


def blh_matrix(epsilon: float, a: int) -> Protocol:
    """Unary encoding with (kappa, lambda) = (e^eps / (e^eps + 1), 1/2) on an
    alphabet of size a (the hashed domain)."""
    return unary_encoding(a, blh_params(epsilon))


def hash_functions(a: int, g: int) -> np.ndarray:
    """All g^a maps from {0..a-1} to {0..g-1}, one per row."""
    return np.array(list(itertools.product(range(g), repeat=a)), dtype=np.int64).reshape(-1, a)


def local_hash(a: int, g: int, epsilon: float, cap: int = DEFAULT_OUTPUT_CAP) -> Protocol:
    """Pick a hash h: A -> {0..g-1} uniformly, report (h, GRR_g,eps(h(x))).

    Every one of the g^a maps is enumerated. Output labels are (h, y).
    """
    if not 1 <= g <= a:
        raise ValueError("need 1 <= g <= a")
    count = g ** a
    if count * g > cap:
        raise OutputSpaceTooLarge(f"local hash has {count * g} outputs, cap is {cap}")
    hs = hash_functions(a, g)
    base = _grr_matrix(g, epsilon) if g > 1 else np.ones((1, 1))
    blocks = base[:, hs].transpose(1, 0, 2).reshape(count * g, a) / count
    labels = [(tuple(h.tolist()), y) for h in hs for y in range(g)]
    return build_protocol(blocks, labels_out=labels)


def _beta_of(epsilon: float) -> float:
    return math.expm1(epsilon)


def grr_avg_privacy_closed(a: int, epsilon: float) -> MetricEstimate:
    """S_mu of GRR(a, eps) under the Jeffreys prior.

    S = 1 - [eps e^eps - a E[(1 + beta L) log(1 + beta L)]] / [(a + beta) H(X|P)]
    with beta = e^eps - 1 and L ~ Beta(1/2, (a-1)/2).
    """
    beta = _beta_of(epsilon)
    if beta == 0:
        return MetricEstimate(1.0, method=QUADRATURE)
    e = beta_expectation(lambda t: (1 + beta * t) * np.log1p(beta * t), 0.5, (a - 1) / 2)
    h = secret_entropy_exact(jeffreys(a))
    leak = (epsilon * (1 + beta) - a * e) / ((a + beta) * h)
    return MetricEstimate(1.0 - leak, method=QUADRATURE)


def grr_asymptotic_utility_closed(a: int, epsilon: float, strict: bool = False) -> MetricEstimate:
    """U^as of GRR(a, eps) under the Jeffreys prior.

    U = -1/2 log(2 pi e) + log beta - (a-2)/(2a-2) log(a + beta)
        - a/(2a-2) E[log(1 + beta L)],  L ~ Beta(1/2, (a-1)/2).

    At eps = 0 the value is -inf; with ``strict`` an EpsilonZero error is
    raised instead.
    """
    beta = _beta_of(epsilon)
    if beta == 0:
        if strict:
            raise EpsilonZero("asymptotic utility diverges at eps = 0")
        return MetricEstimate(-math.inf, method=QUADRATURE)
    k = 2 * a - 2
    e = beta_expectation(lambda t: np.log1p(beta * t), 0.5, (a - 1) / 2)
    value = -0.5 * LOG_2PIE + math.log(beta) - (a - 2) / k * math.log(a + beta) - a / k * e
    return MetricEstimate(value, method=QUADRATURE)


def _k_lattice(s: np.ndarray) -> np.ndarray:
    return np.array(list(itertools.product(*(range(int(v) + 1) for v in s))), dtype=np.int64)


def grr_mutual_info_closed(a: int, epsilon: float, n: int,
                           budget: Optional[EnumerationBudget] = None,
                           prior: Optional[DirichletPrior] = None) -> MetricEstimate:
    """I(Y_1..Y_n; P) for GRR(a, eps).

    I = n G - sum_s binom(n, s) F(s) log F(s), where F(s) is the probability
    of one report sequence with tally s,
    F(s) = sum_{k <= s} beta^|k| / (a + beta)^n prod binom(s_y, k_y) B(alpha + k) / B(alpha),
    and G = a E[((1 + beta L)/(a + beta)) log((1 + beta L)/(a + beta))].

    Only G needs quadrature, which requires an exchangeable prior; the
    default is Jeffreys.
    """
    budget = budget or EnumerationBudget()
    prior = prior or jeffreys(a)
    if prior.a != a:
        raise DimensionMismatch("prior alphabet differs from a")
    if not np.all(prior.alpha == prior.alpha[0]):
        raise ValueError("the closed form needs a symmetric Dirichlet prior")
    if n == 0:
        return MetricEstimate(0.0, method=QUADRATURE)
    budget.guard(composition_count(n, 2 * a), "the GRR (s, k) lattice")
    beta = _beta_of(epsilon)
    log_ab = math.log(a + beta)
    al = float(prior.alpha[0])
    g = a * beta_expectation(
        lambda t: xlogy((1 + beta * t) / (a + beta), (1 + beta * t) / (a + beta)), al, (a - 1) * al)
    log_b0 = log_multivariate_beta(prior.alpha)
    log_beta = math.log(beta) if beta > 0 else -math.inf
    tallies = compositions(n, a, budget)
    log_cs = log_multinomial(n, tallies)
    terms = []
    for s, lc in zip(tallies, log_cs):
        ks = _k_lattice(s)
        tot = ks.sum(axis=1)
        with np.errstate(invalid="ignore"):
            lb = np.where(tot > 0, tot * log_beta, 0.0)
        logs = (lb - n * log_ab + (gammaln(s + 1.0) - gammaln(ks + 1.0) - gammaln(s - ks + 1.0)).sum(axis=1)
                + log_multivariate_beta(prior.alpha + ks) - log_b0)
        log_f = logsumexp(logs)
        terms.append(math.exp(lc + log_f) * log_f)
    return MetricEstimate(n * g - math.fsum(terms), method=QUADRATURE)


def _binary_entropy(v: float) -> float:
    return float(entropy_rows(np.array([v, 1 - v])))


def _ue_r(g: int, a: int, kappa: float, lam: float):
    """R_g(B) = kappa B lam^(g-1) (1-lam)^(a-g) + (1-kappa)(1-B) lam^g (1-lam)^(a-g-1)."""
    def r(b):
        b = np.asarray(b, dtype=float)
        out = np.zeros_like(b)
        if g > 0:
            out = out + kappa * b * lam ** (g - 1) * (1 - lam) ** (a - g)
        if g < a:
            out = out + (1 - kappa) * (1 - b) * lam ** g * (1 - lam) ** (a - g - 1)
        return out
    return r


def _ue_output_entropy_term(a: int, params: UeParams) -> float:
    """sum_g binom(a, g) E[R_g log R_g], B_g ~ Beta(g/2, (a-g)/2) under Jeffreys."""
    total = []
    for g in range(a + 1):
        r = _ue_r(g, a, params.kappa, params.lam)
        if g in (0, a):
            v = float(r(np.array(1.0 if g == a else 0.0)))
            e = xlogy(v, v)
        else:
            e = beta_expectation(lambda b: xlogy(r(b), r(b)), g / 2, (a - g) / 2)
        total.append(math.comb(a, g) * e)
    return math.fsum(total)


def ue_avg_privacy_closed(a: int, params: UeParams) -> MetricEstimate:
    """S_mu of unary encoding under the Jeffreys prior.

    S = 1 - [-(a-1) H_b(lam) - H_b(kappa) - sum_g binom(a,g) E[R_g log R_g]] / H(X|P).
    """
    leak = (-(a - 1) * _binary_entropy(params.lam) - _binary_entropy(params.kappa)
            - _ue_output_entropy_term(a, params))
    return MetricEstimate(1.0 - leak / secret_entropy_exact(jeffreys(a)), method=QUADRATURE)


def _poly_mul(poly: dict, factor: dict) -> dict:
    out = {}
    for e1, c1 in poly.items():
        for e2, c2 in factor.items():
            key = tuple(u + v for u, v in zip(e1, e2))
            out[key] = out.get(key, 0.0) + c1 * c2
    return out


def _subset_power(members: Sequence[int], k: int, a: int) -> dict:
    """(sum_{x in members} p_x)^k as {exponent tuple: multinomial coefficient}."""
    out = {}
    if not members:
        return {(0,) * a: 1.0} if k == 0 else {}
    for parts in compositions(k, len(members)):
        e = [0] * a
        for x, v in zip(members, parts):
            e[x] = int(v)
        out[tuple(e)] = math.exp(float(log_multinomial(k, parts)))
    return out


def ue_mutual_info_closed(a: int, params: UeParams, n: int,
                          budget: Optional[EnumerationBudget] = None) -> MetricEstimate:
    """I(Y_1..Y_n; P) for unary encoding under the Jeffreys prior.

    Each output probability factors as
    q_y = lam^(|y|-1) (1-lam)^(a-|y|-1) (lam (1-kappa) + (kappa - lam) B_y)
    with B_y the mass of the reported set. Expanding prod_y q_y^{s_y} in the
    k_y and then each B_y^{k_y} over the members of y gives a polynomial in
    p whose Dirichlet expectation is a sum of beta-function ratios. Equal
    exponent vectors are merged before the expectation is taken.

    Raises:
        BudgetExceeded: the (s, k) lattice exceeds the budget.
        ValueError: lambda = 1.
    """
    budget = budget or EnumerationBudget()
    kappa, lam = params.kappa, params.lam
    if lam >= 1:
        raise ValueError("the expansion needs lambda < 1")
    if n == 0:
        return MetricEstimate(0.0, method=QUADRATURE)
    b = 2 ** a
    budget.guard(composition_count(n, 2 * b), "the UE (s, k) lattice")
    prior = jeffreys(a)
    log_b0 = log_multivariate_beta(prior.alpha)
    sizes = _popcount(np.arange(b))
    members = [[x for x in range(a) if (y >> x) & 1] for y in range(b)]
    cache = {}

    def expectation(s_vec):
        # E[prod_y q_y^{s_y}] summed over k <= s.
        active = [y for y in range(b) if s_vec[y] > 0]
        total = []
        for ks in itertools.product(*(range(s_vec[y] + 1) if sizes[y] > 0 else range(1) for y in active)):
            kk = dict(zip(active, ks))
            ksum = sum(ks)
            ssize = sum(s_vec[y] * sizes[y] for y in active)
            coef = (lam ** (ssize - ksum) * (1 - lam) ** (n * (a - 1) - ssize)
                    * (1 - kappa) ** (n - ksum) * (kappa - lam) ** ksum)
            for y in active:
                coef *= math.comb(s_vec[y], kk[y])
            if coef == 0:
                continue
            poly = {(0,) * a: 1.0}
            for y in active:
                if kk[y]:
                    key = (y, kk[y])
                    if key not in cache:
                        cache[key] = _subset_power(members[y], kk[y], a)
                    poly = _poly_mul(poly, cache[key])
            ex = np.array(list(poly.keys()), dtype=float)
            cf = np.array(list(poly.values()))
            moments = np.exp(log_multivariate_beta(prior.alpha + ex) - log_b0)
            total.append(coef * float(cf @ moments))
        return math.fsum(total)

    tallies = compositions(n, b, budget)
    log_cs = log_multinomial(n, tallies)
    terms = []
    for s, lc in zip(tallies, log_cs):
        f = expectation([int(v) for v in s])
        if f > 0:
            terms.append(math.exp(lc) * f * math.log(f))
    value = n * _ue_output_entropy_term(a, params) - math.fsum(terms)
    return MetricEstimate(value, method=QUADRATURE)


def lh_privacy_decomposition(a: int, g: int, epsilon: float, prior: DirichletPrior,
                             config: Optional[McConfig] = None) -> MetricEstimate:
    """Average privacy of local hashing as an average over hash functions.

    S = E_h[S_mu(h) + H(h(X)|P) / H(X|P) * S_{h**mu}(GRR_g)], where the GRR
    privacy is taken under the pushforward of the prior through h. The
    pushforward is handled by sampling p and mapping it through h. Hashes
    with H(h(X)|P) = 0 contribute S_mu(h) only.

    The standard error is that of the equivalent single ratio estimator.
    """
    if prior.a != a:
        raise DimensionMismatch("prior alphabet differs from a")
    config = config or McConfig()
    hs = hash_functions(a, g)
    base = _grr_matrix(g, epsilon) if g > 1 else np.ones((1, 1))
    hcol = entropy_rows(base.T)
    onehot = np.zeros((len(hs), a, g))
    for i, h in enumerate(hs):
        onehot[i, np.arange(a), h] = 1.0

    def fn(p, lp):
        hp = np.einsum("na,kag->nkg", p, onehot)
        h_hash = entropy_rows(hp)
        leak = entropy_rows(hp @ base.T) - hp @ hcol
        return np.column_stack([entropy_rows(p, lp), h_hash, leak, leak.mean(axis=1)])

    s = mc_moments(prior, fn, config)
    k = len(hs)
    h_x = s.mean[0]
    h_h = s.mean[1:1 + k]
    leak = s.mean[1 + k:1 + 2 * k]
    parts = []
    for hh, lk in zip(h_h, leak):
        s_h = 1.0 - hh / h_x
        parts.append(s_h if hh < 1e-12 else s_h + hh / h_x * (1.0 - lk / hh))
    _, se = ratio_of_means(s, 1 + 2 * k, 0)
    return MetricEstimate(math.fsum(parts) / k, se, s.count, config.seed, MONTE_CARLO)


def random_protocol(a: int, b: int, rng: np.random.Generator, concentration: float = 1.0) -> Protocol:
    """Protocol whose columns are independent Dirichlet(concentration) draws."""
    return build_protocol(rng.dirichlet(np.full(b, concentration), size=a).T)
