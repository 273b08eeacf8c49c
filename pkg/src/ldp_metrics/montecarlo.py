"""Chunked, worker-count-invariant Monte-Carlo reduction over prior samples."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .prior import DirichletPrior, McConfig, sample_chunk


def map_chunks(prior: DirichletPrior, config: McConfig, fn, start: int = 0) -> list:
    """Apply ``fn(p, log_p, index)`` to every chunk from ``start`` on, in chunk order."""
    indices = range(start, config.chunk_count)

    def run(i):
        p, lp = sample_chunk(prior, config, i)
        return fn(p, lp, i)

    if config.workers == 1 or len(indices) <= 1:
        return [run(i) for i in indices]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(run, indices))


@dataclass(frozen=True)
class MomentSummary:
    """Sample mean and covariance of a vector-valued function of P.

    ``cov`` is the full k x k sample covariance, or only its diagonal when
    the reduction was run with ``covariance=False``.
    """

    mean: np.ndarray
    cov: np.ndarray
    count: int
    rejected: int

    @property
    def var(self) -> np.ndarray:
        return np.diag(self.cov) if self.cov.ndim == 2 else self.cov

    @property
    def std_error(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.var, 0.0) / max(self.count, 1))


def _fsum_arrays(arrays):
    stacked = np.stack(arrays)
    flat = stacked.reshape(stacked.shape[0], -1)
    out = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return out.reshape(stacked.shape[1:])


def mc_moments(prior: DirichletPrior, fn, config: McConfig, covariance: bool = True) -> MomentSummary:
    """Estimate E[fn(P)] and the covariance of fn(P) under the prior.

    Args:
        prior: sampling distribution.
        fn: maps (p, log_p) arrays of shape (m, a) to an (m, k) array. Rows
            containing a non-finite value are counted as rejected and dropped.
        config: sampling settings.
        covariance: if False only per-component variances are accumulated.

    Returns:
        MomentSummary. Per-chunk sums are combined with math.fsum, so the
        result does not depend on the worker count.
    """
    p0, lp0 = sample_chunk(prior, config, 0)
    f0 = np.asarray(fn(p0, lp0), dtype=float)
    ok0 = np.all(np.isfinite(f0), axis=1)
    shift = f0[ok0].mean(axis=0) if ok0.any() else np.zeros(f0.shape[1])

    def reduce(f):
        f = np.asarray(f, dtype=float)
        ok = np.all(np.isfinite(f), axis=1)
        d = f[ok] - shift
        s2 = d.T @ d if covariance else (d * d).sum(axis=0)
        return d.sum(axis=0), s2, int(ok.sum()), int((~ok).sum())

    parts = [reduce(f0)] + map_chunks(prior, config, lambda p, lp, i: reduce(fn(p, lp)), start=1)
    s1 = _fsum_arrays([q[0] for q in parts])
    s2 = _fsum_arrays([q[1] for q in parts])
    count = sum(q[2] for q in parts)
    rejected = sum(q[3] for q in parts)
    if count == 0:
        k = f0.shape[1]
        nan = np.full(k, np.nan)
        return MomentSummary(nan, np.full((k, k) if covariance else k, np.nan), 0, rejected)
    m1 = s1 / count
    outer = np.outer(m1, m1) if covariance else m1 * m1
    cov = (s2 / count - outer) * (count / max(count - 1, 1))
    return MomentSummary(shift + m1, cov, count, rejected)


def ratio_of_means(summary: MomentSummary, num: int, den: int):
    """Delta-method ratio E[f_num] / E[f_den] with its standard error."""
    mu_n, mu_d = summary.mean[num], summary.mean[den]
    r = mu_n / mu_d
    c = summary.cov
    var = c[num, num] - 2 * r * c[num, den] + r * r * c[den, den]
    return r, math.sqrt(max(var, 0.0) / summary.count) / abs(mu_d)


def entropy_rows(p, log_p=None):
    """Row-wise Shannon entropy -sum p log p with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if log_p is None:
            log_p = np.log(p)
        return -np.where(p > 0, p * log_p, 0.0).sum(axis=-1)
