"""Closed-form moments of ``Y = a + b^T Z + Z^T diag(lam) Z``, ``Z ~ N(0, I)``.

Y is a shifted sum of scaled noncentral chi-square variables. Only its
cumulant generating function and first two moments are provided.
"""

from __future__ import annotations

import numpy as np

from .errors import OutOfDomain
from .reduction import QuadraticReduction


def mgf_exponent(theta: float, qf: QuadraticReduction) -> float:
    """Cumulant generating function ``eta(theta) = log E[exp(theta Y)]``.

    Defined where ``1 - 2 theta lam_j > 0`` for every j; raises
    :class:`OutOfDomain` naming the first violating index otherwise.
    """
    theta = float(theta)
    s = 1.0 - 2.0 * theta * qf.lam
    bad = np.flatnonzero(~(s > 0))
    if bad.size:
        j = int(bad[0])
        raise OutOfDomain(
            f"theta={theta} outside the domain: 1 - 2*theta*lam[{j}] = {s[j]:.3e} <= 0", index=j
        )
    terms = theta * theta * qf.b**2 / s - np.log1p(-2.0 * theta * qf.lam)
    return float(qf.a * theta + 0.5 * np.sum(terms))


def mgf(theta: float, qf: QuadraticReduction) -> float:
    return float(np.exp(mgf_exponent(theta, qf)))


def mgf_domain(qf: QuadraticReduction) -> tuple[float, float]:
    """Open interval of theta on which the MGF is finite."""
    pos = qf.lam[qf.lam > 0]
    neg = qf.lam[qf.lam < 0]
    hi = 0.5 / pos.max() if pos.size else np.inf
    lo = 0.5 / neg.min() if neg.size else -np.inf
    return float(lo), float(hi)


def mean(qf: QuadraticReduction) -> float:
    return float(qf.a + np.sum(qf.lam))


def variance(qf: QuadraticReduction) -> float:
    return float(np.sum(qf.b**2 + 2.0 * qf.lam**2))


def second_moment(qf: QuadraticReduction) -> float:
    return mean(qf) ** 2 + variance(qf)
