"""Factor model and portfolio book.

Factor increments over the horizon are ``dS ~ N(0, sigma * dt)``; the drift is
carried for completeness but must be zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadDimension,
    NonzeroDrift,
    NotPositiveDefinite,
    NotSymmetric,
    ZeroBookValue,
)

SYMMETRY_RTOL = 1e-12
BOOK_RTOL = 1e-10


@dataclass(frozen=True)
class FactorModel:
    """Law of the factor increments over one horizon.

    Parameters
    ----------
    sigma : (n, n) array
        Covariance of factor increments per unit time.
    dt : float
        Horizon length, in the same time units as ``sigma``.
    levels : (n,) array
        Current factor values.
    drift : (n,) array, optional
        Must be zero if given.
    """

    sigma: np.ndarray
    dt: float = 1.0
    levels: Optional[np.ndarray] = None
    drift: Optional[np.ndarray] = None
    chol: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return int(np.shape(self.sigma)[0])

    @property
    def sigma_eff(self) -> np.ndarray:
        """Covariance of the increment over the horizon, ``sigma * dt``."""
        return np.asarray(self.sigma) * self.dt

    @property
    def chol_eff(self) -> np.ndarray:
        """Lower Cholesky factor of ``sigma_eff``."""
        if self.chol is None:
            raise ValueError("model has not been validated; call validate_factor_model")
        return self.chol * np.sqrt(self.dt)

    @property
    def is_validated(self) -> bool:
        return self.chol is not None


def validate_factor_model(model: FactorModel) -> FactorModel:
    """Check the model and return a copy with the Cholesky factor cached.

    Asymmetry below ``SYMMETRY_RTOL * max|sigma|`` is removed by averaging
    with the transpose; anything larger raises :class:`NotSymmetric`.
    """
    sigma = np.array(model.sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] == 0:
        raise BadDimension(f"sigma must be a non-empty square matrix, got shape {sigma.shape}")
    n = sigma.shape[0]
    if not np.all(np.isfinite(sigma)):
        raise BadDimension("sigma contains non-finite entries")
    if not (np.isfinite(model.dt) and model.dt > 0):
        raise BadDimension(f"dt must be positive, got {model.dt}")

    scale = np.max(np.abs(sigma))
    asym = np.max(np.abs(sigma - sigma.T))
    if asym > SYMMETRY_RTOL * scale:
        raise NotSymmetric(f"sigma is not symmetric: max |S_ij - S_ji| = {asym:.3e}")
    sigma = 0.5 * (sigma + sigma.T)

    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("sigma is not positive definite") from exc
    if not np.all(np.diag(chol) > 0):
        raise NotPositiveDefinite("sigma is not positive definite (zero pivot)")

    levels = None
    if model.levels is not None:
        levels = np.array(model.levels, dtype=float).reshape(-1)
        if levels.shape != (n,):
            raise BadDimension(f"levels must have length {n}, got {levels.shape[0]}")

    drift = None
    if model.drift is not None:
        drift = np.array(model.drift, dtype=float).reshape(-1)
        if drift.shape != (n,):
            raise BadDimension(f"drift must have length {n}, got {drift.shape[0]}")
        if np.any(drift != 0.0):
            raise NonzeroDrift("only zero drift is supported")

    return replace(model, sigma=sigma, dt=float(model.dt), levels=levels, drift=drift, chol=chol)


@dataclass(frozen=True)
class PortfolioSpec:
    """An ordered book of instruments with share positions.

    ``book_value`` is the portfolio value ``sum_k x_k V_k``. When ``values`` is
    supplied it is checked against the positions.
    """

    instruments: Sequence
    positions: np.ndarray
    book_value: float
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float).reshape(-1)
        object.__setattr__(self, "positions", positions)
        if len(self.instruments) < 1:
            raise BadDimension("portfolio needs at least one instrument")
        if positions.shape[0] != len(self.instruments):
            raise BadDimension(
                f"{positions.shape[0]} positions for {len(self.instruments)} instruments"
            )
        if self.values is not None:
            values = np.asarray(self.values, dtype=float).reshape(-1)
            object.__setattr__(self, "values", values)
            implied = float(positions @ values)
            tol = BOOK_RTOL * max(abs(implied), abs(self.book_value), 1e-300)
            if abs(implied - self.book_value) > tol:
                raise BadDimension(
                    f"book_value {self.book_value} disagrees with positions @ values = {implied}"
                )


def make_portfolio(instruments: Sequence, positions, model: FactorModel) -> PortfolioSpec:
    """Price the instruments under ``model`` and build a consistent book."""
    from .instruments import greeks

    values = np.array([greeks(d, model).value for d in instruments])
    positions = np.asarray(positions, dtype=float)
    return PortfolioSpec(list(instruments), positions, float(positions @ values), values)


def weights_from_shares(spec: PortfolioSpec) -> np.ndarray:
    """Fractions of wealth ``x_k / V`` held in each instrument."""
    if spec.book_value == 0:
        raise ZeroBookValue("book value is zero; weights are undefined")
    return spec.positions / spec.book_value
