"""Per-instrument value and sensitivities.

Options are priced with Black-Scholes on a single factor, treating the factor
level as the underlying price. Greeks are taken with respect to that level and
to calendar time (theta = -dV/dtau).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import (
    AsymmetricCustomGamma,
    BadDimension,
    BadOptionParams,
    CustomNotRepriceable,
    ExpiryCrossed,
    NegativeUnderlying,
)
from .market import FactorModel

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Kind(str, Enum):
    LINEAR = "Linear"
    CASH = "Cash"
    CALL = "EuropeanCall"
    PUT = "EuropeanPut"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class GreekBundle:
    value: float
    theta: float
    delta: np.ndarray
    gamma: np.ndarray

    @property
    def n(self) -> int:
        return self.delta.shape[0]

    @classmethod
    def make(cls, value, theta, delta, gamma, *, atol=1e-12) -> "GreekBundle":
        """Build a bundle from array-likes, symmetrizing ``gamma``.

        Raises :class:`AsymmetricCustomGamma` when ``gamma`` is asymmetric
        beyond ``atol`` relative to its largest entry.
        """
        delta = np.array(delta, dtype=float).reshape(-1)
        gamma = np.array(gamma, dtype=float)
        n = delta.shape[0]
        if gamma.shape != (n, n):
            raise BadDimension(f"gamma must be {n}x{n}, got {gamma.shape}")
        scale = max(np.max(np.abs(gamma)) if gamma.size else 0.0, 1.0)
        if np.max(np.abs(gamma - gamma.T), initial=0.0) > atol * scale:
            raise AsymmetricCustomGamma("gamma matrix is not symmetric")
        gamma = 0.5 * (gamma + gamma.T)
        return cls(float(value), float(theta), delta, gamma)


@dataclass(frozen=True)
class InstrumentDef:
    kind: Kind
    factor_index: int = 0
    strike: Optional[float] = None
    vol: Optional[float] = None
    rate: float = 0.0
    expiry: Optional[float] = None
    custom_greeks: Optional[GreekBundle] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def is_option(self) -> bool:
        return self.kind in (Kind.CALL, Kind.PUT)


def linear(factor_index: int) -> InstrumentDef:
    return InstrumentDef(Kind.LINEAR, factor_index)


def cash() -> InstrumentDef:
    return InstrumentDef(Kind.CASH)


def call(factor_index, strike, vol, expiry, rate=0.0) -> InstrumentDef:
    return InstrumentDef(Kind.CALL, factor_index, strike, vol, rate, expiry)


def put(factor_index, strike, vol, expiry, rate=0.0) -> InstrumentDef:
    return InstrumentDef(Kind.PUT, factor_index, strike, vol, rate, expiry)


def custom(bundle: GreekBundle) -> InstrumentDef:
    return InstrumentDef(Kind.CUSTOM, custom_greeks=bundle)


# --- Black-Scholes -----------------------------------------------------------


def _d1_d2(s, k, vol, rate, tau):
    sq = vol * np.sqrt(tau)
    d1 = (np.log(s / k) + (rate + 0.5 * vol * vol) * tau) / sq
    return d1, d1 - sq


def bs_price(s, k, vol, rate, tau, is_call=True):
    """Black-Scholes price; vectorized over ``s``.

    Non-positive underlying levels are mapped to the ``s -> 0`` limit extended
    linearly through put-call parity (call 0, put ``K exp(-r tau) - s``).
    """
    s = np.asarray(s, dtype=float)
    pos = s > 0
    s_safe = np.where(pos, s, 1.0)
    d1, d2 = _d1_d2(s_safe, k, vol, rate, tau)
    disc = k * np.exp(-rate * tau)
    if is_call:
        v = s_safe * ndtr(d1) - disc * ndtr(d2)
        v = np.where(pos, v, 0.0)
    else:
        v = disc * ndtr(-d2) - s_safe * ndtr(-d1)
        v = np.where(pos, v, disc - s)
    return v if v.ndim else float(v)


def bs_greeks(s, k, vol, rate, tau, is_call=True):
    """Return ``(value, delta, gamma, theta)`` for a European option.

    ``theta`` is the calendar-time derivative, i.e. ``-dV/dtau``.
    """
    d1, d2 = _d1_d2(s, k, vol, rate, tau)
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * d1 * d1)
    disc = k * np.exp(-rate * tau)
    sqt = np.sqrt(tau)
    gamma = pdf / (s * vol * sqt)
    decay = -s * pdf * vol / (2.0 * sqt)
    if is_call:
        value = s * ndtr(d1) - disc * ndtr(d2)
        delta = ndtr(d1)
        theta = decay - rate * disc * ndtr(d2)
    else:
        value = disc * ndtr(-d2) - s * ndtr(-d1)
        delta = ndtr(d1) - 1.0
        theta = decay + rate * disc * ndtr(-d2)
    return float(value), float(delta), float(gamma), float(theta)


# --- dispatch ------------------------------------------------------------------


def _check_option(d: InstrumentDef):
    for name in ("strike", "vol", "expiry"):
        v = getattr(d, name)
        if v is None or not np.isfinite(v) or v <= 0:
            raise BadOptionParams(f"{d.kind.value} needs {name} > 0, got {v}")
    if not np.isfinite(d.rate):
        raise BadOptionParams(f"rate must be finite, got {d.rate}")


def _check_index(d: InstrumentDef, n: int):
    if not 0 <= d.factor_index < n:
        raise BadDimension(f"factor_index {d.factor_index} outside [0, {n})")


def greeks(d: InstrumentDef, model: FactorModel) -> GreekBundle:
    """Value and sensitivities of one instrument at the current factor levels."""
    n = model.n
    delta = np.zeros(n)
    gamma = np.zeros((n, n))

    if d.kind is Kind.CASH:
        return GreekBundle(1.0, 0.0, delta, gamma)

    if d.kind is Kind.CUSTOM:
        g = d.custom_greeks
        if g is None:
            raise BadDimension("Custom instrument without greeks")
        if g.delta.shape != (n,):
            raise BadDimension(f"custom delta has length {g.delta.shape[0]}, model has n={n}")
        return GreekBundle.make(g.value, g.theta, g.delta, g.gamma)

    _check_index(d, n)
    if model.levels is None:
        raise BadDimension("factor levels are required to price instruments")
    s = float(model.levels[d.factor_index])
    i = d.factor_index

    if d.kind is Kind.LINEAR:
        delta[i] = 1.0
        return GreekBundle(s, 0.0, delta, gamma)

    _check_option(d)
    if s <= 0:
        raise NegativeUnderlying(f"option underlying level must be positive, got {s}")
    value, dlt, gmm, theta = bs_greeks(s, d.strike, d.vol, d.rate, d.expiry, d.kind is Kind.CALL)
    delta[i] = dlt
    gamma[i, i] = gmm
    return GreekBundle(value, theta, delta, gamma)


def reprice(d: InstrumentDef, levels: np.ndarray, elapsed: float) -> np.ndarray:
    """Exact value of ``d`` at factor levels ``levels`` (shape (N, n)) after
    ``elapsed`` units of calendar time."""
    levels = np.atleast_2d(levels)
    if d.kind is Kind.CASH:
        return np.ones(levels.shape[0])
    if d.kind is Kind.CUSTOM:
        raise CustomNotRepriceable("Custom instruments carry greeks only and cannot be repriced")
    _check_index(d, levels.shape[1])
    s = levels[:, d.factor_index]
    if d.kind is Kind.LINEAR:
        return s.copy()
    _check_option(d)
    tau = d.expiry - elapsed
    if tau <= 0:
        raise ExpiryCrossed(f"horizon {elapsed} reaches option expiry {d.expiry}")
    return bs_price(s, d.strike, d.vol, d.rate, tau, d.kind is Kind.CALL)
