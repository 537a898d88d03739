"""Equality-constrained minimum-variance programs.

Both programs minimize ``0.5 x^T H x``. The budget program (``solve_p6``)
imposes ``values @ x = 1``; the target program (``solve_p5``) additionally
imposes ``a + mean_row @ x = target``. Short positions are allowed.

Multipliers follow the convention ``H x = A^T nu`` at the optimum.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import Infeasible, NotPD, SolverError, ZeroValues
from .reduction import PD_RTOL, MVProblem

FEAS_TOL = 1e-10
RANK_RTOL = 1e-12


@dataclass
class MVSolution:
    positions: np.ndarray
    variance: float
    mean: float
    multipliers: np.ndarray
    kkt_residual: float
    constraint_residual: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "positions": self.positions.tolist(),
            "mean": self.mean,
            "variance": self.variance,
            "multipliers": self.multipliers.tolist(),
            "kkt_residual": self.kkt_residual,
            "constraint_residual": self.constraint_residual,
            "diagnostics": self.diagnostics,
        }


def _check_pd(h: np.ndarray):
    w = np.linalg.eigvalsh(h)
    if not w[0] > PD_RTOL * max(w[-1], 0.0):
        raise NotPD(f"H is not positive definite (smallest eigenvalue {w[0]:.3e})")


def _kkt_solve(h, a_mat, rhs):
    """Solve ``[[H, A^T], [A, 0]] (x, -nu) = (0, rhs)`` with one step of
    iterative refinement."""
    m, k = h.shape[0], a_mat.shape[0]
    kkt = np.zeros((m + k, m + k))
    kkt[:m, :m] = h
    kkt[:m, m:] = a_mat.T
    kkt[m:, :m] = a_mat
    full_rhs = np.concatenate([np.zeros(m), rhs])
    sol = scipy.linalg.solve(kkt, full_rhs, assume_a="sym")
    sol = sol + scipy.linalg.solve(kkt, full_rhs - kkt @ sol, assume_a="sym")
    return sol[:m], -sol[m:]


def _finish(problem: MVProblem, x, a_mat, rhs, nu, diagnostics) -> MVSolution:
    h = problem.h_matrix
    stat = h @ x - a_mat.T @ nu
    feas = a_mat @ x - rhs
    kkt_res = float(max(np.max(np.abs(stat)), np.max(np.abs(feas))))
    return MVSolution(
        positions=x,
        variance=problem.variance(x),
        mean=problem.mean(x),
        multipliers=nu,
        kkt_residual=kkt_res,
        constraint_residual=float(np.max(np.abs(feas))),
        diagnostics=diagnostics,
    )


def solve_p5(problem: MVProblem, target: Optional[float] = None) -> MVSolution:
    """Minimum variance at a prescribed approximate mean, full budget.

    If the mean row and the value row are parallel the constraints are either
    inconsistent (:class:`Infeasible`) or redundant, in which case the budget
    solution is returned with minimum-norm multipliers.
    """
    target = problem.target if target is None else target
    if target is None:
        raise ValueError("solve_p5 needs a target mean")
    _check_pd(problem.h_matrix)
    v = problem.values
    if not np.any(v):
        raise ZeroValues("all instrument values are zero; the budget constraint is void")

    a_mat = np.vstack([problem.mean_row, v])
    rhs = np.array([target - problem.a, 1.0])
    sv = np.linalg.svd(a_mat, compute_uv=False)
    rank = int(np.sum(sv > RANK_RTOL * sv[0]))
    diagnostics = {"constraint_rank": rank}

    if rank == 2:
        x, nu = _kkt_solve(problem.h_matrix, a_mat, rhs)
        return _finish(problem, x, a_mat, rhs, nu, diagnostics)

    # Parallel rows: the budget row alone determines the solution if consistent.
    x, _ = _kkt_solve(problem.h_matrix, v[None, :], rhs[1:])
    if abs(a_mat[0] @ x - rhs[0]) > FEAS_TOL * max(1.0, abs(rhs[0])):
        raise Infeasible(
            f"target {target} is unattainable: the mean and budget constraints are parallel "
            f"and every budget-feasible book has mean {problem.mean(x):.12g}"
        )
    nu, *_ = np.linalg.lstsq(a_mat.T, problem.h_matrix @ x, rcond=None)
    diagnostics["redundant_constraints"] = True
    return _finish(problem, x, a_mat, rhs, nu, diagnostics)


def solve_p6(problem: MVProblem) -> MVSolution:
    """Global minimum-variance book under the budget constraint only."""
    _check_pd(problem.h_matrix)
    v = problem.values
    if not np.any(v):
        raise ZeroValues("all instrument values are zero; the budget constraint is void")
    a_mat = v[None, :]
    rhs = np.array([1.0])
    x, nu = _kkt_solve(problem.h_matrix, a_mat, rhs)
    return _finish(problem, x, a_mat, rhs, nu, {"constraint_rank": 1})


@dataclass
class FrontierPoint:
    target: float
    status: str
    mean: float = float("nan")
    variance: float = float("nan")
    positions: Optional[np.ndarray] = None
    message: str = ""


def frontier(problem: MVProblem, targets: Sequence[float], workers: int = 1) -> list[FrontierPoint]:
    """Solve the target program for each target, in input order.

    Failures are reported per point with ``status`` set to the exception
    class name.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("frontier needs at least one target")

    def one(t):
        try:
            sol = solve_p5(problem, float(t))
        except SolverError as exc:
            return FrontierPoint(float(t), type(exc).__name__, message=str(exc))
        return FrontierPoint(float(t), "ok", sol.mean, sol.variance, sol.positions)

    if workers <= 1:
        return [one(t) for t in targets]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, targets))


def frontier_csv(points: Sequence[FrontierPoint], m: int) -> str:
    """Tabular frontier: ``target,mean,variance,x_1..x_m``; failed points
    leave the numeric fields empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["target", "mean", "variance"] + [f"x_{k + 1}" for k in range(m)])
    for pt in points:
        if pt.status == "ok":
            writer.writerow([repr(float(v)) for v in (pt.target, pt.mean, pt.variance, *pt.positions)])
        else:
            writer.writerow([repr(pt.target)] + [""] * (m + 2))
    return buf.getvalue()
