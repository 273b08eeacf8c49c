"""Dirichlet priors over the probability simplex and their constants.

Densities are taken with respect to Lebesgue measure on the first a-1
coordinates of the simplex. The differential entropy in that chart equals
the standard Dirichlet entropy: the 1/sqrt(a) factor of the delta-function
representation cancels the sqrt(a) surface-measure Jacobian.

All logarithms are natural and 0 log 0 is taken as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidPrior, NonPositiveArgument

LOG_2PIE = math.log(2.0 * math.pi * math.e)

# Asymptotic digamma coefficients B_{2k} / (2k), k = 1..7.
_PSI_SERIES = (1 / 12, -1 / 120, 1 / 252, -1 / 240, 1 / 132, -691 / 32760, 1 / 12)


def digamma(x):
    """Digamma function for positive arguments.

    Shifts every argument above 10 with psi(x) = psi(x + 1) - 1/x and then
    applies the asymptotic expansion, which is accurate to machine precision
    there.

    Args:
        x: positive scalar or array.

    Returns:
        psi(x), with the same shape as ``x`` (a float for scalar input).

    Raises:
        NonPositiveArgument: if any entry is <= 0 or NaN.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0):
        raise NonPositiveArgument("digamma is only defined here for x > 0")
    z = arr.copy()
    acc = np.zeros_like(z)
    small = z < 10.0
    while np.any(small):
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
        small = z < 10.0
    inv2 = 1.0 / (z * z)
    tail = np.zeros_like(z)
    for c in reversed(_PSI_SERIES):
        tail = (tail + c) * inv2
    out = acc + np.log(z) - 0.5 / z - tail
    return float(out) if out.ndim == 0 else out


def log_multivariate_beta(alpha) -> float:
    """log B(alpha) = sum log Gamma(alpha_x) - log Gamma(sum alpha_x).

    Works on the last axis, so a (k, a) array gives k values.
    """
    alpha = np.asarray(alpha, dtype=float)
    if not np.all(alpha > 0):
        raise NonPositiveArgument("beta function parameters must be positive")
    out = gammaln(alpha).sum(axis=-1) - gammaln(alpha.sum(axis=-1))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class DirichletPrior:
    """Dirichlet(alpha) prior on the simplex over an alphabet of size a >= 2."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        if alpha.size < 2:
            raise InvalidPrior("a Dirichlet prior needs an alphabet of size >= 2")
        if not np.all(np.isfinite(alpha)) or not np.all(alpha > 0):
            raise InvalidPrior("all Dirichlet parameters must be positive and finite")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @property
    def a(self) -> int:
        return int(self.alpha.size)

    @property
    def alpha0(self) -> float:
        return float(self.alpha.sum())

    @property
    def is_jeffreys(self) -> bool:
        return bool(np.all(self.alpha == 0.5))

    def __eq__(self, other):
        return isinstance(other, DirichletPrior) and np.array_equal(self.alpha, other.alpha)

    def __hash__(self):
        return hash(self.alpha.tobytes())

    def __repr__(self):
        return f"DirichletPrior(alpha={self.alpha.tolist()})"

    def log_density(self, p):
        """Log density at points p (shape (..., a)); -inf off the open simplex faces
        where a parameter below 1 would need log 0."""
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(self.alpha == 1.0, 0.0, (self.alpha - 1.0) * np.log(p))
        return terms.sum(axis=-1) - log_multivariate_beta(self.alpha)

    def mean(self) -> np.ndarray:
        return self.alpha / self.alpha0


def jeffreys(a: int) -> DirichletPrior:
    """Jeffreys prior Dirichlet(1/2, ..., 1/2) on an alphabet of size a."""
    if int(a) != a or a < 2:
        raise InvalidPrior("Jeffreys prior needs a >= 2")
    return DirichletPrior(np.full(int(a), 0.5))


@dataclass(frozen=True)
class McConfig:
    """Monte-Carlo settings.

    Samples are produced in fixed-size chunks. Chunk i is drawn from a Philox
    generator keyed by ``SeedSequence(entropy=seed, spawn_key=(i,))``, so a
    given (seed, batch_size) yields the same stream regardless of how many
    workers evaluate the chunks.
    """

    sample_count: int = 200_000
    seed: int = 0
    batch_size: int = 8192
    workers: int = 1

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @property
    def chunk_count(self) -> int:
        return -(-self.sample_count // self.batch_size)

    def chunk_size(self, index: int) -> int:
        return min(self.batch_size, self.sample_count - index * self.batch_size)


RNG_ALGORITHM = "philox4x64-10; SeedSequence(seed, spawn_key=(chunk,)); gamma: numpy Marsaglia-Tsang with U^(1/alpha) boost"


def chunk_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


def sample_chunk(prior: DirichletPrior, config: McConfig, index: int):
    """Draw chunk ``index`` of the stream.

    Gamma(alpha) variates are generated as Gamma(alpha + 1) * U^(1/alpha) in
    log space, which keeps tiny parameters from underflowing to exact zeros
    in log p.

    Returns:
        (p, log_p), both of shape (chunk_size, a).
    """
    rng = chunk_generator(config.seed, index)
    m = config.batch_size
    alpha = prior.alpha
    log_g = np.log(rng.standard_gamma(alpha + 1.0, size=(m, alpha.size)))
    log_g += np.log(rng.random((m, alpha.size))) / alpha
    log_p = log_g - logsumexp(log_g, axis=1, keepdims=True)
    log_p = log_p[: config.chunk_size(index)]
    return np.exp(log_p), log_p


def sample(prior: DirichletPrior, config: McConfig):
    """Yield (p, log_p) chunks of i.i.d. Dirichlet draws in stream order."""
    for i in range(config.chunk_count):
        yield sample_chunk(prior, config, i)


def draw(prior: DirichletPrior, count: int, seed: int = 0, batch_size: int = 8192) -> np.ndarray:
    """Return ``count`` draws as one (count, a) array."""
    cfg = McConfig(sample_count=count, seed=seed, batch_size=batch_size)
    return np.concatenate([p for p, _ in sample(prior, cfg)], axis=0)


def prior_differential_entropy(prior: DirichletPrior) -> float:
    """h(P) = log B(alpha) + (alpha0 - a) psi(alpha0) - sum (alpha_x - 1) psi(alpha_x)."""
    alpha = prior.alpha
    a0 = prior.alpha0
    return (log_multivariate_beta(alpha) + (a0 - prior.a) * digamma(a0)
            - float(np.dot(alpha - 1.0, digamma(alpha))))


def expected_log_p(prior: DirichletPrior) -> np.ndarray:
    """E[log P_x] = psi(alpha_x) - psi(alpha0)."""
    return digamma(prior.alpha) - digamma(prior.alpha0)


def secret_entropy_exact(prior: DirichletPrior) -> float:
    """H(X|P) = E[-sum P_x log P_x] = sum (alpha_x/alpha0)(psi(alpha0+1) - psi(alpha_x+1))."""
    alpha = prior.alpha
    a0 = prior.alpha0
    return float(np.dot(alpha / a0, digamma(a0 + 1.0) - digamma(alpha + 1.0)))


def c_mu_exact(prior: DirichletPrior) -> float:
    """C_mu = -1/2 log(2 pi e) - (1/(2a-2)) sum_x E[log P_x]."""
    return -0.5 * LOG_2PIE - float(expected_log_p(prior).sum()) / (2 * prior.a - 2)


def c_mu(prior: DirichletPrior, config: McConfig | None = None, method: str = "exact"):
    """Asymptotic utility of the identity protocol.

    Args:
        prior: Dirichlet prior.
        config: sampling settings, used only when ``method == "mc"``.
        method: "exact" (digamma form, valid for every Dirichlet prior) or "mc".

    Returns:
        MetricEstimate.
    """
    from .estimate import MetricEstimate
    from .montecarlo import mc_moments

    if method == "exact":
        return MetricEstimate.exact(c_mu_exact(prior))
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    config = config or McConfig()
    summary = mc_moments(prior, lambda p, lp: lp.sum(axis=1, keepdims=True), config)
    k = 2 * prior.a - 2
    return MetricEstimate(-0.5 * LOG_2PIE - summary.mean[0] / k, summary.std_error[0] / k,
                          summary.count, config.seed, "monte-carlo")


def baseline_secret_entropy(prior: DirichletPrior, config: McConfig | None = None,
                            method: str = "exact"):
    """H(X_i | P), exactly or by Monte Carlo (``method="mc"``)."""
    from .estimate import MetricEstimate
    from .montecarlo import mc_moments, entropy_rows

    if method == "exact":
        return MetricEstimate.exact(secret_entropy_exact(prior))
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    config = config or McConfig()
    summary = mc_moments(prior, lambda p, lp: entropy_rows(p, lp)[:, None], config)
    return MetricEstimate(summary.mean[0], summary.std_error[0], summary.count,
                          config.seed, "monte-carlo")
