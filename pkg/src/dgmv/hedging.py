"""Variance-minimizing static hedge of one instrument with others plus cash.

The book is short one unit of the target and long ``x_k`` of each hedger.
Cash is riskless at zero rate so it only absorbs the budget: it is set to make
the hedge self-financing, ``x_cash = -sum_k x_k V_k``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import moments
from .errors import DimensionMismatch
from .instruments import GreekBundle
from .market import FactorModel
from .reduction import PD_RTOL, _ensure_validated, problem_matrices, reduce_portfolio


@dataclass(frozen=True)
class HedgeProblem:
    target: GreekBundle
    hedgers: Sequence[GreekBundle]
    model: FactorModel

    def __post_init__(self):
        n = self.target.n
        for k, g in enumerate(self.hedgers):
            if g.n != n:
                raise DimensionMismatch(f"hedger {k} has dimension {g.n}, target has {n}")


@dataclass
class HedgeSolution:
    hedge_positions: np.ndarray
    cash_position: float
    residual_variance: float
    financing: float
    unhedged_variance: float
    normal_residual: float = 0.0
    rank_deficient: bool = False
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "hedge_positions": self.hedge_positions.tolist(),
            "cash_position": self.cash_position,
            "residual_variance": self.residual_variance,
            "unhedged_variance": self.unhedged_variance,
            "financing": self.financing,
            "normal_residual": self.normal_residual,
            "rank_deficient": self.rank_deficient,
        }


class SingularNormalEquationsWarning(RuntimeWarning):
    pass


def solve_hedge(hp: HedgeProblem) -> HedgeSolution:
    """Minimize the variance of the delta-gamma hedging error.

    With no hedgers the unhedged position is returned. Redundant hedgers make
    the normal equations singular; the minimum-norm minimizer is returned and
    a :class:`SingularNormalEquationsWarning` is emitted.
    """
    model = _ensure_validated(hp.model)
    bundles = [hp.target, *hp.hedgers]
    h = problem_matrices(bundles, model)
    h = h["sigma_hat"] + h["Q"]
    h_free = h[1:, 1:]
    rhs = h[1:, 0]

    unhedged = moments.variance(reduce_portfolio([hp.target], [-1.0], model))
    n_free = len(hp.hedgers)
    rank_deficient = False
    if n_free == 0:
        x = np.zeros(0)
    else:
        w = np.linalg.eigvalsh(h_free)
        if w[0] > PD_RTOL * max(w[-1], 0.0):
            x = np.linalg.solve(h_free, rhs)
        else:
            rank_deficient = True
            x, *_ = np.linalg.lstsq(h_free, rhs, rcond=None)
            warnings.warn(
                "hedging instruments are redundant; returning the minimum-norm hedge",
                SingularNormalEquationsWarning,
                stacklevel=2,
            )

    qf = reduce_portfolio(bundles, np.concatenate([[-1.0], x]), model)
    residual = moments.variance(qf)
    values = np.array([g.value for g in hp.hedgers])
    cash = -float(x @ values) if n_free else 0.0
    normal_res = float(np.max(np.abs(h_free @ x - rhs))) if n_free else 0.0
    return HedgeSolution(
        hedge_positions=x,
        cash_position=cash,
        residual_variance=residual,
        financing=cash + hp.target.value,
        unhedged_variance=unhedged,
        normal_residual=normal_res,
        rank_deficient=rank_deficient,
    )
