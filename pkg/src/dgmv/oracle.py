"""Seeded Monte Carlo checks of the analytic quantities.

Sample ``i`` is drawn from a Philox counter-based generator keyed by
``(seed, i // BLOCK_SIZE)``, so every draw is a pure function of the seed and
its global index. Streams only decide which worker computes which blocks; the
per-block moment accumulators are merged in a fixed pairwise tree, so
estimates are bit-identical for any number of streams or threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .instruments import greeks, reprice
from .market import FactorModel, PortfolioSpec
from .reduction import QuadraticReduction, _ensure_validated, aggregate

BLOCK_SIZE = 1 << 15
_U53 = 2.0**-53


@dataclass(frozen=True)
class McConfig:
    samples: int
    seed: int = 0
    streams: int = 1

    def __post_init__(self):
        if int(self.samples) < 1:
            raise ValueError("samples must be >= 1")
        if int(self.streams) < 1:
            raise ValueError("streams must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def block_normals(seed: int, block: int, size: int, dim: int) -> np.ndarray:
    """Standard normals for one block, shape (size, dim), by inverse CDF."""
    gen = np.random.Philox(key=(int(block) << 64) | int(seed))
    raw = gen.random_raw(size * dim)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
    return ndtri(u).reshape(size, dim)


@dataclass(frozen=True)
class _Moments:
    """Count, mean and central power sums (orders 2-4), per column."""

    n: int
    mean: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    m4: np.ndarray

    @classmethod
    def of(cls, x: np.ndarray) -> "_Moments":
        mu = x.mean(axis=0)
        d = x - mu
        d2 = d * d
        return cls(x.shape[0], mu, d2.sum(axis=0), (d2 * d).sum(axis=0), (d2 * d2).sum(axis=0))

    def merge(self, o: "_Moments") -> "_Moments":
        na, nb = self.n, o.n
        n = na + nb
        d = o.mean - self.mean
        mean = self.mean + d * (nb / n)
        m2 = self.m2 + o.m2 + d * d * (na * nb / n)
        m3 = (
            self.m3 + o.m3
            + d**3 * (na * nb * (na - nb) / n**2)
            + 3.0 * d * (na * o.m2 - nb * self.m2) / n
        )
        m4 = (
            self.m4 + o.m4
            + d**4 * (na * nb * (na * na - na * nb + nb * nb) / n**3)
            + 6.0 * d * d * (na * na * o.m2 + nb * nb * self.m2) / n**2
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n
        )
        return _Moments(n, mean, m2, m3, m4)


def _tree_merge(parts: list) -> _Moments:
    if len(parts) == 1:
        return parts[0]
    mid = len(parts) // 2
    return _tree_merge(parts[:mid]).merge(_tree_merge(parts[mid:]))


def _thread_cap() -> int:
    env = os.environ.get("DGMV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_blocks(fn: Callable[[np.ndarray], np.ndarray], dim: int, cfg: McConfig) -> _Moments:
    """Apply ``fn`` to every block of normals and merge the moments.

    ``fn`` maps a (size, dim) array of normals to a (size, k) array of
    per-sample statistics.
    """
    n_blocks = -(-int(cfg.samples) // BLOCK_SIZE)
    results: list = [None] * n_blocks

    def work(stream: int):
        for b in range(stream, n_blocks, cfg.streams):
            size = min(BLOCK_SIZE, cfg.samples - b * BLOCK_SIZE)
            z = block_normals(cfg.seed, b, size, dim)
            vals = np.asarray(fn(z), dtype=float)
            results[b] = _Moments.of(vals.reshape(size, -1))

    workers = min(cfg.streams, _thread_cap())
    if workers <= 1:
        for s in range(cfg.streams):
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, range(cfg.streams)))
    return _tree_merge(results)


@dataclass(frozen=True)
class Estimate:
    mean_est: float
    var_est: float
    se_mean: float
    se_var: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


def _estimate(mom: _Moments, col: int) -> Estimate:
    n = mom.n
    mean = float(mom.mean[col])
    if n < 2:
        return Estimate(mean, 0.0, float("nan"), float("nan"))
    var = float(mom.m2[col]) / (n - 1)
    c2 = float(mom.m2[col]) / n
    c4 = float(mom.m4[col]) / n
    se_var = np.sqrt(max(c4 - c2 * c2 * (n - 3) / (n - 1), 0.0) / n)
    return Estimate(mean, var, float(np.sqrt(var / n)), float(se_var))


def simulate_quadratic(qf: QuadraticReduction, cfg: McConfig) -> Estimate:
    """Sample mean and variance of ``Y = a + b^T Z + Z^T diag(lam) Z``."""
    mom = run_blocks(qf.evaluate, qf.n, cfg)
    return _estimate(mom, 0)


def simulate_mgf(qf: QuadraticReduction, theta: float, cfg: McConfig) -> Estimate:
    """Sample estimate of ``E[exp(theta Y)]`` (``mean_est``) with its standard
    error (``se_mean``)."""
    mom = run_blocks(lambda z: np.exp(theta * qf.evaluate(z)), qf.n, cfg)
    return _estimate(mom, 0)


@dataclass(frozen=True)
class ExactEstimate:
    mean_est: float
    var_est: float
    se_mean: float
    se_var: float
    approx_gap: float
    se_gap: float
    approx_mean_est: float
    approx_var_est: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


def simulate_exact(spec: PortfolioSpec, model: FactorModel, cfg: McConfig) -> ExactEstimate:
    """Full-repricing P&L of the book over one horizon against its
    delta-gamma approximation.

    ``approx_gap`` is the sample mean of ``|dV - dV_approx|``. Options are
    repriced with time to expiry reduced by the horizon.
    """
    model = _ensure_validated(model)
    bundles = [greeks(d, model) for d in spec.instruments]
    x = spec.positions
    a, delta, gamma = aggregate(bundles, x, model.dt)
    values0 = np.array([g.value for g in bundles])
    chol_t = model.chol_eff.T
    levels = model.levels
    # fail fast on unrepriceable books before sampling
    for d in spec.instruments:
        reprice(d, levels[None, :], model.dt)

    def fn(z):
        ds = z @ chol_t
        approx = a + ds @ delta + 0.5 * np.einsum("si,ij,sj->s", ds, gamma, ds)
        new_levels = levels + ds
        exact = np.zeros(z.shape[0])
        for k, d in enumerate(spec.instruments):
            if x[k] != 0:
                exact += x[k] * (reprice(d, new_levels, model.dt) - values0[k])
        return np.column_stack([exact, np.abs(exact - approx), approx])

    mom = run_blocks(fn, model.n, cfg)
    ex, gap, ap = (_estimate(mom, c) for c in range(3))
    return ExactEstimate(
        ex.mean_est, ex.var_est, ex.se_mean, ex.se_var,
        gap.mean_est, gap.se_mean, ap.mean_est, ap.var_est,
    )
