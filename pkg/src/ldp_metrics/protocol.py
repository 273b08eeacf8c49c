"""Privacy protocols as column-stochastic matrices.

Orientation: ``matrix[y, x]`` is the probability of report y given secret x,
so columns are indexed by inputs and each column sums to one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (ColumnSumMismatch, DimensionMismatch, InvalidProtocol,
                     InvalidSimplexPoint, NegativeEntry, OutputSpaceTooLarge,
                     WeightMismatch)

COLUMN_TOL = 1e-9
DEFAULT_OUTPUT_CAP = 2 ** 20


@dataclass(frozen=True, eq=False)
class Protocol:
    """Validated b x a column-stochastic matrix with optional labels.

    Build instances through :func:`build_protocol`, which removes all-zero
    rows and checks the invariants.
    """

    matrix: np.ndarray
    labels_in: tuple
    labels_out: tuple

    @property
    def input_size(self) -> int:
        return self.matrix.shape[1]

    @property
    def output_size(self) -> int:
        return self.matrix.shape[0]

    a = input_size
    b = output_size

    def __repr__(self):
        return f"Protocol(a={self.a}, b={self.b})"


def build_protocol(matrix, labels_in: Optional[Sequence] = None,
                   labels_out: Optional[Sequence] = None, tol: float = COLUMN_TOL) -> Protocol:
    """Validate a probability table and return a Protocol.

    Args:
        matrix: b x a table with ``matrix[y][x]`` = P(Y=y | X=x).
        labels_in: optional labels for the a inputs.
        labels_out: optional labels for the b outputs; kept for the rows that
            survive trimming of identically-zero rows.
        tol: absolute tolerance on column sums.

    Raises:
        NegativeEntry: some entry is below zero.
        ColumnSumMismatch: a column misses 1 by more than ``tol``; reports the
            worst column.
        InvalidProtocol: shape or finiteness problems.
    """
    m = np.array(matrix, dtype=float)
    if m.ndim != 2:
        raise InvalidProtocol("protocol matrix must be two-dimensional")
    b, a = m.shape
    if a < 2 or b < 1:
        raise InvalidProtocol(f"need a >= 2 inputs and b >= 1 outputs, got {b}x{a}")
    if not np.all(np.isfinite(m)):
        raise InvalidProtocol("protocol entries must be finite")
    if np.any(m < 0):
        y, x = np.argwhere(m < 0)[0]
        raise NegativeEntry(f"entry ({y}, {x}) = {m[y, x]} is negative")
    dev = m.sum(axis=0) - 1.0
    worst = int(np.argmax(np.abs(dev)))
    if abs(dev[worst]) > tol:
        raise ColumnSumMismatch(worst, float(dev[worst]))
    labels_in = tuple(labels_in) if labels_in is not None else tuple(range(a))
    labels_out = tuple(labels_out) if labels_out is not None else tuple(range(b))
    if len(labels_in) != a or len(labels_out) != b:
        raise InvalidProtocol("label counts do not match the matrix shape")
    keep = m.max(axis=1) > 0
    m = np.ascontiguousarray(m[keep])
    m.setflags(write=False)
    return Protocol(m, labels_in, tuple(l for l, k in zip(labels_out, keep) if k))


def as_simplex_point(p, a: Optional[int] = None, tol: float = 1e-12) -> np.ndarray:
    """Check that p is a probability vector (of length a, if given)."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or (a is not None and p.size != a):
        raise InvalidSimplexPoint(f"expected a probability vector of length {a}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise InvalidSimplexPoint("entries must be >= 0 and sum to 1")
    return p


def _row_ldp(m: np.ndarray) -> np.ndarray:
    hi = m.max(axis=1)
    pos = np.where(m > 0, m, np.inf).min(axis=1)
    has_zero = (m == 0).any(axis=1)
    with np.errstate(divide="ignore"):
        out = np.log(hi / pos)
    return np.where(has_zero & (hi > 0), np.inf, out)


def ldp_level(q: Protocol) -> float:
    """Smallest epsilon for which q is epsilon-LDP.

    A row holding both zero and positive entries makes the level infinite.
    Rows that vanish everywhere were trimmed on construction.
    """
    return float(max(0.0, _row_ldp(q.matrix).max()))


def pushforward(q: Protocol, p) -> np.ndarray:
    """Output distribution Q p for an input distribution p."""
    p = as_simplex_point(p, q.a)
    return q.matrix @ p


def compose(outer: Protocol, inner: Protocol) -> Protocol:
    """Postprocess ``inner`` by ``outer``: matrix product outer @ inner."""
    if outer.a != inner.b:
        raise DimensionMismatch(f"outer expects {outer.a} inputs, inner emits {inner.b} outputs")
    return build_protocol(outer.matrix @ inner.matrix, inner.labels_in, outer.labels_out)


def product(protocols: Sequence[Protocol], cap: int = DEFAULT_OUTPUT_CAP) -> Protocol:
    """Release the outputs of several protocols applied to the same input.

    Output labels are tuples of component labels, in row-major order.
    """
    if not protocols:
        raise ValueError("product of an empty list")
    a = protocols[0].a
    if any(q.a != a for q in protocols):
        raise DimensionMismatch("all protocols in a product must share the input alphabet")
    size = math.prod(q.b for q in protocols)
    if size > cap:
        raise OutputSpaceTooLarge(f"product output size {size} exceeds cap {cap}")
    m = protocols[0].matrix
    for q in protocols[1:]:
        m = (m[:, None, :] * q.matrix[None, :, :]).reshape(-1, a)
    if len(protocols) == 1:
        labels = [(l,) for l in protocols[0].labels_out]
    else:
        labels = list(itertools.product(*(q.labels_out for q in protocols)))
    return build_protocol(m, protocols[0].labels_in, labels)


def mixture(weights, protocols: Sequence[Protocol]) -> Protocol:
    """Pick protocol j with probability w_j and report (j, y)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size != len(protocols) or w.size == 0:
        raise WeightMismatch("need exactly one weight per protocol")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise WeightMismatch("weights must form a probability vector")
    a = protocols[0].a
    if any(q.a != a for q in protocols):
        raise DimensionMismatch("all mixture components must share the input alphabet")
    m = np.vstack([wj * q.matrix for wj, q in zip(w, protocols)])
    labels = [(j, y) for j, q in enumerate(protocols) for y in q.labels_out]
    return build_protocol(m, protocols[0].labels_in, labels)


@dataclass(frozen=True)
class ProtocolAnalysis:
    """Structural facts about a protocol.

    Attributes:
        ldp_level: LDP level, possibly inf.
        rank: numerical rank d of the matrix.
        faithful: whether d equals the input size.
        reachable_outputs: indices of outputs with positive probability.
        class_count: number of classes b' of the relation linking two outputs
            that are both possible under a common input.
        classes: the classes as tuples of output indices.
    """

    ldp_level: float
    rank: int
    faithful: bool
    reachable_outputs: tuple
    class_count: int
    classes: tuple


def numerical_rank(m: np.ndarray, rank_tolerance: float = 1e-10) -> int:
    """Rank from a column-pivoted QR with pivot threshold rank_tolerance * max|m|."""
    r = scipy.linalg.qr(m, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(r))
    return int((diag > rank_tolerance * np.abs(m).max()).sum())


def output_classes(m: np.ndarray) -> list:
    """Connected components of outputs that share an input with positive mass."""
    b, a = m.shape
    ys, xs = np.nonzero(m > 0)
    graph = coo_matrix((np.ones(ys.size), (ys, b + xs)), shape=(a + b, a + b))
    _, labels = connected_components(graph, directed=False)
    groups = {}
    for y in range(b):
        groups.setdefault(labels[y], []).append(y)
    return [tuple(g) for g in groups.values()]


def analyze_structure(q: Protocol, rank_tolerance: float = 1e-10) -> ProtocolAnalysis:
    d = numerical_rank(q.matrix, rank_tolerance)
    classes = output_classes(q.matrix)
    return ProtocolAnalysis(ldp_level(q), d, d == q.a, tuple(range(q.b)), len(classes), tuple(classes))


def worst_case_privacy(q: Protocol) -> float:
    """S^wc = exp(-LDP level); 0 when the level is infinite."""
    return math.exp(-ldp_level(q))


def _binary_entropy_over_u(log_u, u):
    # H_b(u) / u = -log u + g(u) with g(u) = -(1-u) log1p(-u) / u, g -> 1 as u -> 0.
    small = u < 1e-8
    safe = np.where(small, 0.5, u)
    g = np.where(small, 1.0 - u / 2, -(1.0 - safe) * np.log1p(-safe) / safe)
    return -log_u + g


def _two_point_ratios(ratio: np.ndarray, depths: np.ndarray) -> np.ndarray:
    """Pointwise privacy ratio for p = (1 - delta, delta), delta = exp(-L).

    With r = Q[y|x'] / Q[y|x] the posterior mass of x' after seeing y is
    pi = c delta with c = r / (1 - delta + r delta), and the ratio
    H_b(pi) / H_b(delta) is evaluated in log space so that L may be huge.
    """
    r = ratio[:, None]
    L = depths[None, :]
    delta = np.exp(-L)
    c = r / (1.0 - delta + r * delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_c = np.log(c)
        num = c * _binary_entropy_over_u(log_c - L, c * delta)
    num = np.where(c > 0, num, 0.0)
    den = _binary_entropy_over_u(-L, delta)
    return num / den


def worst_case_privacy_empirical(q: Protocol, depths=None, interior_samples: int = 2000,
                                 seed: int = 0) -> float:
    """Numerically minimise H(X | Y=y, P=p) / H(X | P=p) over y and p.

    Searches two-point distributions concentrated near a vertex, which is
    where the infimum is approached, plus random interior points. The result
    is the smallest ratio found and is therefore an upper bound on the true
    infimum.

    Args:
        q: protocol.
        depths: values of L = -log(delta) for the two-point search. The
            default grid reaches L = 1e6, where the remaining gap to the
            infimum is about eps * exp(-eps) / L.
        interior_samples: number of uniform interior points to try.
        seed: seed for the interior points.
    """
    m = q.matrix
    if depths is None:
        depths = np.concatenate([np.linspace(0.05, 5, 25), np.logspace(0.75, 6, 40)])
    depths = np.asarray(depths, dtype=float)
    best = math.inf
    # Pairs (x, x') in row y with Q[y|x] > 0; ratio Q[y|x'] / Q[y|x].
    for y in range(m.shape[0]):
        row = m[y]
        pos = row > 0
        if not pos.any():
            continue
        ratios = (row[None, :] / row[pos][:, None]).ravel()
        ratios = np.unique(ratios[ratios < 1.0])
        if ratios.size:
            best = min(best, float(_two_point_ratios(ratios, depths).min()))
    if interior_samples > 0:
        from .prior import DirichletPrior, draw
        p = draw(DirichletPrior(np.ones(q.a)), interior_samples, seed)
        from .montecarlo import entropy_rows
        h = entropy_rows(p)
        joint = p[:, None, :] * m[None, :, :]
        qy = joint.sum(axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            post = joint / qy[:, :, None]
            hy = entropy_rows(post)
            vals = np.where((qy > 0) & (h[:, None] > 0), hy / h[:, None], np.inf)
        best = min(best, float(vals.min()))
    return min(best, 1.0)


@dataclass(frozen=True, eq=False)
class PopulationSample:
    """One draw of the full model: P, secrets, reports and their tallies."""

    p: np.ndarray
    secrets: np.ndarray
    reports: np.ndarray
    report_tallies: np.ndarray
    secret_tallies: np.ndarray

    @property
    def n(self) -> int:
        return int(self.secrets.size)


def simulate_population(q: Protocol, prior, n: int, seed: int = 0) -> PopulationSample:
    """Draw P from the prior, n i.i.d. secrets from P, and one report per secret."""
    from .prior import chunk_generator, McConfig, sample_chunk

    if n < 0:
        raise ValueError("n must be >= 0")
    if prior.a != q.a:
        raise DimensionMismatch("prior and protocol alphabets differ")
    p = sample_chunk(prior, McConfig(sample_count=1, seed=seed, batch_size=1), 0)[0][0]
    rng = chunk_generator(seed, 1)
    secrets = rng.choice(q.a, size=n, p=p / p.sum())
    reports = np.empty(n, dtype=np.int64)
    for x in range(q.a):
        idx = np.flatnonzero(secrets == x)
        if idx.size:
            col = q.matrix[:, x]
            reports[idx] = rng.choice(q.b, size=idx.size, p=col / col.sum())
    return PopulationSample(p, secrets.astype(np.int64), reports,
                            np.bincount(reports, minlength=q.b), np.bincount(secrets, minlength=q.a))
