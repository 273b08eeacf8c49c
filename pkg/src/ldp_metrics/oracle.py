"""Brute-force reference values by enumerating every (secret, report) sequence.

Independent of the tally-grouped formulas: no multinomial coefficients and
no beta functions. Every prior expectation is a quadrature over the first
coordinate of P, so only two-letter input alphabets are supported.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded
from .prior import DirichletPrior
from .protocol import Protocol
from .quadrature import beta_expectation


@dataclass(frozen=True)
class JointOracle:
    i_reports_p: float
    i_reports_tallies: float
    h_tallies: float


def _mutual_information(joint: dict) -> float:
    left, right = {}, {}
    for (u, v), w in joint.items():
        left[u] = left.get(u, 0.0) + w
        right[v] = right.get(v, 0.0) + w
    return math.fsum(w * math.log(w / (left[u] * right[v])) for (u, v), w in joint.items() if w > 0)


def full_joint_oracle(q: Protocol, prior: DirichletPrior, n: int, max_sequences: int = 1_000_000) -> JointOracle:
    """I(Y;P), I(S;T) and H(T) from all a^n * b^n sequence pairs."""
    if q.a != 2 or prior.a != 2:
        raise ValueError("the brute-force oracle integrates over a two-letter simplex")
    if (q.a * q.b) ** n > max_sequences:
        raise BudgetExceeded("too many sequence pairs for brute force")
    a0, a1 = prior.alpha
    xs = list(itertools.product(range(q.a), repeat=n))
    ys = list(itertools.product(range(q.b), repeat=n))
    x_arr = np.array(xs, dtype=np.int64).reshape(len(xs), n)
    y_arr = np.array(ys, dtype=np.int64).reshape(len(ys), n)

    def seq_probs(t):
        p = np.column_stack([t, 1.0 - t])
        return np.prod(p[:, x_arr], axis=2)

    px = beta_expectation(seq_probs, a0, a1)
    m = q.matrix

    def report_terms(t):
        qp = np.column_stack([t, 1.0 - t]) @ m.T
        r = np.prod(qp[:, y_arr], axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            rlogr = np.where(r > 0, r * np.log(r), 0.0)
        return np.hstack([r, rlogr])

    e = beta_expectation(report_terms, a0, a1)
    k = len(ys)
    er, erlogr = e[:k], e[k:]
    with np.errstate(divide="ignore", invalid="ignore"):
        i_yp = math.fsum(erlogr) - math.fsum(np.where(er > 0, er * np.log(er), 0.0))

    joint, pt = {}, {}
    for xi, xv in enumerate(xs):
        t = tuple(np.bincount(xv, minlength=q.a).tolist())
        pt[t] = pt.get(t, 0.0) + px[xi]
        for yv in ys:
            w = px[xi] * math.prod(m[y, x] for x, y in zip(xv, yv))
            s = tuple(np.bincount(yv, minlength=q.b).tolist())
            joint[(s, t)] = joint.get((s, t), 0.0) + w
    h_t = -math.fsum(v * math.log(v) for v in pt.values() if v > 0)
    return JointOracle(i_yp, _mutual_information(joint), h_t)
