"""European options on zero-coupon bonds, priced in closed form at time 0.

The discounted bond has deterministic volatility, so the option value is a
Black-type formula driven by the integrated squared forward volatility.
Only time-0 prices are provided; the put comes from parity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, ModelState, bond_price, discount_vol, l_fn, m_fn
from .numerics import integrate_adaptive, norm_cdf

__all__ = ["OptionSpec", "forward_vol", "sigma_sq", "call_price", "put_price"]


@dataclass(frozen=True)
class OptionSpec:
    """European option with expiry S, written on a bond maturing at T >= S."""

    S: float
    T: float
    K: float
    kind: str = "call"

    def __post_init__(self):
        if not 0.0 < self.S <= self.T:
            raise ValueError(f"need 0 < S <= T, got S={self.S}, T={self.T}")
        if self.K <= 0.0:
            raise ValueError("strike must be positive")
        if self.kind not in ("call", "put"):
            raise ValueError(f"kind must be 'call' or 'put', got {self.kind!r}")


def forward_vol(t: float, spec: OptionSpec, params: ModelParams) -> float:
    """Volatility of the forward bond price at time t <= S.

    Equals discount_vol(t, T) - discount_vol(t, S) identically.
    """
    if t < 0.0 or t > spec.S:
        raise ValueError(f"need 0 <= t <= S, got t={t}, S={spec.S}")
    b, sigma = params.b, params.sigma
    return sigma / b * (math.exp(-b * (spec.T - t)) - math.exp(-b * (spec.S - t))
                        + l_fn(t, params) * (m_fn(spec.T - t, params)
                                             - m_fn(spec.S - t, params)))


def sigma_sq(spec: OptionSpec, params: ModelParams) -> float:
    """Integrated squared forward volatility over [0, S]; zero iff S = T or sigma = 0."""
    if spec.S == spec.T or params.sigma == 0.0:
        return 0.0
    b, sigma = params.b, params.sigma

    def integrand(t):
        t = np.asarray(t, dtype=float)
        return (sigma / b * (np.exp(-b * (spec.T - t)) - np.exp(-b * (spec.S - t))
                             + l_fn(t, params) * (m_fn(spec.T - t, params)
                                                  - m_fn(spec.S - t, params)))) ** 2

    return integrate_adaptive(integrand, 0.0, spec.S).value


def _discount_legs(spec: OptionSpec, params: ModelParams) -> tuple[float, float]:
    state0 = ModelState(t=0.0, r=params.r0, u=0.0)
    return bond_price(state0, spec.T, params), bond_price(state0, spec.S, params)


def call_price(spec: OptionSpec, params: ModelParams) -> float:
    """Time-0 price of a European call on the T-bond with expiry S."""
    if spec.kind != "call":
        raise ValueError("spec.kind must be 'call'")
    p_long, p_short = _discount_legs(spec, params)
    total_var = sigma_sq(spec, params)
    if total_var <= 0.0:
        # Degenerate limit: the forward bond price is deterministic.
        return max(p_long - spec.K * p_short, 0.0)
    vol = math.sqrt(total_var)
    d_plus = (math.log(p_long / (spec.K * p_short)) + 0.5 * total_var) / vol
    d_minus = d_plus - vol
    return p_long * norm_cdf(d_plus) - spec.K * p_short * norm_cdf(d_minus)


def put_price(spec: OptionSpec, params: ModelParams) -> float:
    """Time-0 price of a European put, via put-call parity."""
    if spec.kind != "put":
        raise ValueError("spec.kind must be 'put'")
    as_call = OptionSpec(S=spec.S, T=spec.T, K=spec.K, kind="call")
    p_long, p_short = _discount_legs(spec, params)
    return call_price(as_call, params) - p_long + spec.K * p_short
