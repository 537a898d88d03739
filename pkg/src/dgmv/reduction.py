"""Delta-gamma reduction of a book to a diagonal quadratic form and to QP data.

With ``dS = C Z``, ``Z ~ N(0, I)`` and ``C = L U`` (``L`` the Cholesky factor of
``sigma * dt``, ``U`` the eigenvectors of ``0.5 L^T Gamma L``), the
approximate P&L is ``Y = a + b^T Z + Z^T diag(lam) Z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import BadDimension, DimensionMismatch, EigenFailure, SingularH
from .instruments import GreekBundle
from .market import FactorModel, validate_factor_model

PD_RTOL = 1e-12


@dataclass(frozen=True)
class QuadraticReduction:
    a: float
    b: np.ndarray
    lam: np.ndarray
    c_matrix: Optional[np.ndarray] = None
    u_matrix: Optional[np.ndarray] = None

    @classmethod
    def from_coefficients(cls, a, b, lam) -> "QuadraticReduction":
        """A bare quadratic form with no factor basis attached."""
        b = np.array(b, dtype=float).reshape(-1)
        lam = np.array(lam, dtype=float).reshape(-1)
        if b.shape != lam.shape:
            raise DimensionMismatch(f"b has length {b.size}, lam has length {lam.size}")
        return cls(float(a), b, lam)

    @property
    def n(self) -> int:
        return self.b.shape[0]

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """Y at standard normal draws ``z`` of shape (N, n)."""
        return self.a + z @ self.b + (z * z) @ self.lam


@dataclass(frozen=True)
class MVProblem:
    """Data of the minimum-variance programs.

    The approximate mean of the book at positions ``x`` is
    ``a + x @ (p_vector + theta_vector)`` and its variance is ``0.5 x^T H x``.
    ``theta_vector`` holds ``theta_k * dt``; ``a`` is a position-independent
    offset (zero for books built by :func:`assemble_problem`).
    """

    h_matrix: np.ndarray
    p_vector: np.ndarray
    values: np.ndarray
    a: float = 0.0
    target: Optional[float] = None
    theta_vector: Optional[np.ndarray] = None

    def __post_init__(self):
        m = len(self.values)
        if self.theta_vector is None:
            object.__setattr__(self, "theta_vector", np.zeros(m))
        for name in ("h_matrix", "p_vector", "values", "theta_vector"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.h_matrix.shape != (m, m) or self.p_vector.shape != (m,) or self.theta_vector.shape != (m,):
            raise DimensionMismatch("H, p, theta and values disagree on the number of instruments")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def mean_row(self) -> np.ndarray:
        return self.p_vector + self.theta_vector

    def mean(self, x) -> float:
        return float(self.a + np.asarray(x) @ self.mean_row)

    def variance(self, x) -> float:
        x = np.asarray(x)
        return float(0.5 * x @ self.h_matrix @ x)

    def with_target(self, target: Optional[float]) -> "MVProblem":
        return MVProblem(self.h_matrix, self.p_vector, self.values, self.a, target, self.theta_vector)


def _ensure_validated(model: FactorModel) -> FactorModel:
    return model if model.is_validated else validate_factor_model(model)


def _check_bundles(bundles: Sequence[GreekBundle], n: Optional[int] = None) -> int:
    if len(bundles) == 0:
        raise BadDimension("need at least one instrument")
    n = bundles[0].n if n is None else n
    for k, g in enumerate(bundles):
        if g.delta.shape != (n,) or g.gamma.shape != (n, n):
            raise DimensionMismatch(f"instrument {k} has dimension {g.delta.shape[0]}, expected {n}")
    return n


def aggregate(bundles: Sequence[GreekBundle], positions, dt: float = 1.0):
    """Portfolio ``(a, delta, gamma)``: position-weighted sums of the bundles,
    with ``a = sum_k x_k theta_k * dt``."""
    x = np.asarray(positions, dtype=float).reshape(-1)
    _check_bundles(bundles)
    if x.shape[0] != len(bundles):
        raise DimensionMismatch(f"{x.shape[0]} positions for {len(bundles)} instruments")
    delta = np.einsum("k,ki->i", x, np.stack([g.delta for g in bundles]))
    gamma = np.einsum("k,kij->ij", x, np.stack([g.gamma for g in bundles]))
    gamma = 0.5 * (gamma + gamma.T)
    a = float(x @ np.array([g.theta for g in bundles])) * dt
    return a, delta, gamma


def reduce(a: float, delta, gamma, model: FactorModel) -> QuadraticReduction:
    """Diagonalize the delta-gamma P&L ``a + delta^T dS + 0.5 dS^T gamma dS``."""
    model = _ensure_validated(model)
    n = model.n
    delta = np.asarray(delta, dtype=float).reshape(-1)
    gamma = np.asarray(gamma, dtype=float)
    if delta.shape != (n,) or gamma.shape != (n, n):
        raise DimensionMismatch(f"delta/gamma do not match model dimension {n}")

    c_tilde = model.chol_eff
    if not np.any(gamma):
        lam = np.zeros(n)
        u = np.eye(n)
    else:
        half = 0.5 * (c_tilde.T @ gamma @ c_tilde)
        half = 0.5 * (half + half.T)
        try:
            lam, u = np.linalg.eigh(half)
        except np.linalg.LinAlgError as exc:
            raise EigenFailure("symmetric eigendecomposition did not converge") from exc
    c = c_tilde @ u
    b = c.T @ delta
    return QuadraticReduction(float(a), b, lam, c, u)


def reduce_portfolio(bundles: Sequence[GreekBundle], positions, model: FactorModel) -> QuadraticReduction:
    a, delta, gamma = aggregate(bundles, positions, model.dt)
    return reduce(a, delta, gamma, model)


def problem_matrices(bundles: Sequence[GreekBundle], model: FactorModel) -> dict:
    """``M``, ``p``, ``sigma_hat`` and ``Q`` for a list of bundles.

    ``M[i, k]`` is instrument ``k``'s delta to factor ``i``;
    ``p_k = 0.5 tr(Gamma_k S)``, ``sigma_hat = 2 M^T S M`` and
    ``Q_ij = tr(Gamma_i S Gamma_j S)`` with ``S = sigma * dt``.
    """
    model = _ensure_validated(model)
    _check_bundles(bundles, model.n)
    s = model.sigma_eff
    m_mat = np.stack([g.delta for g in bundles], axis=1)
    gs = np.stack([g.gamma @ s for g in bundles])
    p = 0.5 * np.trace(gs, axis1=1, axis2=2)
    sigma_hat = 2.0 * m_mat.T @ s @ m_mat
    q = np.einsum("iab,jba->ij", gs, gs)
    sigma_hat = 0.5 * (sigma_hat + sigma_hat.T)
    q = 0.5 * (q + q.T)
    return {"M": m_mat, "p": p, "sigma_hat": sigma_hat, "Q": q}


def assemble_problem(
    bundles: Sequence[GreekBundle], model: FactorModel, target: Optional[float] = None
) -> MVProblem:
    """Build the minimum-variance QP for the given instruments.

    Raises :class:`SingularH` when ``H = sigma_hat + Q`` is not positive
    definite (e.g. redundant instruments); the exception carries the
    eigenvector of the smallest eigenvalue as ``direction``.
    """
    model = _ensure_validated(model)
    mats = problem_matrices(bundles, model)
    h = mats["sigma_hat"] + mats["Q"]
    w, v = np.linalg.eigh(h)
    if not w[0] > PD_RTOL * max(w[-1], 0.0):
        raise SingularH(
            f"H is not positive definite (eigenvalues in [{w[0]:.3e}, {w[-1]:.3e}]); "
            "the book contains redundant or riskless instruments",
            direction=v[:, 0],
        )
    values = np.array([g.value for g in bundles])
    theta = np.array([g.theta for g in bundles]) * model.dt
    return MVProblem(h, mats["p"], values, 0.0, target, theta)
