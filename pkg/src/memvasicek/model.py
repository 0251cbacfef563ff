"""Closed-form quantities of the memory-extended Vasicek short rate model.

The short rate follows a mean-reverting Gaussian SDE whose driving noise
carries an exponential-kernel memory controlled by two parameters ``p``
and ``q``; ``p = 0`` recovers the classical Vasicek model exactly.  Bond
prices stay log-affine in the two-dimensional state (short rate ``r``,
auxiliary memory state ``u``), which is what every routine here exploits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .numerics import integrate_adaptive

__all__ = [
    "ModelParams",
    "ModelState",
    "AffineCoefficients",
    "TransitionMoments",
    "l_fn",
    "m_fn",
    "c_factor",
    "a_factor",
    "d_factor",
    "affine_coefficients",
    "affine_price",
    "bond_price",
    "yield_at",
    "discount_vol",
    "transition_moments",
]

ArrayLike = Union[float, np.ndarray]

# Below this distance the confluent (p + q == b) formula for m is used;
# the generic one loses roughly nine digits near the confluence.
CONFLUENCE_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the model.

    a     : drift level (per year, rate units)
    b     : mean-reversion speed (per year)
    sigma : volatility (rate per sqrt-year); 0 is accepted as the
            deterministic degenerate limit
    p     : memory strength; 0 switches the memory off
    q     : memory decay rate (per year)
    r0    : initial short rate (decimal)
    """

    a: float
    b: float
    sigma: float
    p: float
    q: float
    r0: float

    def __post_init__(self):
        checks = (
            (self.a > 0.0, "a must be positive"),
            (self.b > 0.0, "b must be positive"),
            (self.sigma >= 0.0, "sigma must be non-negative"),
            (self.q > 0.0, "q must be positive"),
            (self.p > -self.q, "p must exceed -q"),
            (self.r0 >= 0.0, "r0 must be non-negative"),
        )
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"invalid model parameters: {msg}")
        for name in ("a", "b", "sigma", "p", "q", "r0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"invalid model parameters: {name} not finite")


@dataclass(frozen=True)
class ModelState:
    """State of the Markov system at time ``t``: short rate and memory."""

    t: float
    r: float
    u: float = 0.0

    def __post_init__(self):
        if self.t < 0.0:
            raise ValueError("state time must be non-negative")
        if self.t == 0.0 and self.u != 0.0:
            raise ValueError("memory state must vanish at t = 0")


@dataclass(frozen=True)
class AffineCoefficients:
    """Log-affine bond price loadings for a fixed (t, T) pair.

    The bond price is ``exp(-A - C*r + D*u)``.  Instances may be cached
    per (t, T) and reused across states.
    """

    A: float
    C: float
    D: float
    t: float
    T: float


@dataclass(frozen=True)
class TransitionMoments:
    """Exact one-step Gaussian transition of (r, u) over [t0, t1].

    r1 = rate_drift + rate_decay * r0 + memory_to_rate * u0 + noise_r
    u1 = u0 + noise_u
    with (noise_r, noise_u) centered Gaussian of covariance
    [[var_rate, cov], [cov, var_memory]].
    """

    t0: float
    t1: float
    rate_decay: float
    rate_drift: float
    memory_to_rate: float
    var_rate: float
    cov: float
    var_memory: float


def l_fn(t: ArrayLike, params: ModelParams) -> ArrayLike:
    """Memory damping weight; strictly positive and tending to 1."""
    p, q = params.p, params.q
    if p == 0.0:
        return np.ones_like(t, dtype=float) if np.ndim(t) else 1.0
    denom = (p + 2.0 * q) ** 2 * np.exp(2.0 * q * np.asarray(t, dtype=float)) - p * p
    out = 1.0 - 2.0 * q * p / denom
    return out if np.ndim(t) else float(out)


def m_fn(t: ArrayLike, params: ModelParams) -> ArrayLike:
    """Accumulated memory kernel; m(0) = 0 and m is identically 0 for p = 0.

    Uses the explicit formula, switching to the confluent branch when
    p + q is within :data:`CONFLUENCE_TOL` of b.
    """
    p, q, b = params.p, params.q, params.b
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    if p == 0.0:
        out = np.zeros_like(t)
        return float(out) if scalar else out
    pq = p + q
    if abs(pq - b) < CONFLUENCE_TOL:
        out = p / pq - p * np.exp(-pq * t) / pq - p * t * np.exp(-b * t)
    else:
        out = (p / pq
               + b * p * np.exp(-pq * t) / ((pq - b) * pq)
               - p * np.exp(-b * t) / (pq - b))
    # m(0) = 0 is an identity; keep it exact instead of leaving rounding dust.
    out = np.where(t == 0.0, 0.0, out)
    return float(out) if scalar else out


def _check_tenor(t: float, T: float) -> float:
    if t < 0.0 or t > T:
        raise ValueError(f"need 0 <= t <= T, got t={t}, T={T}")
    return T - t


def c_factor(t: float, T: float, params: ModelParams) -> float:
    """Rate loading of the log bond price; in [0, 1/b), increasing in T - t."""
    tau = _check_tenor(t, T)
    return -math.expm1(-params.b * tau) / params.b


def a_factor(t: float, T: float, params: ModelParams) -> float:
    """Level term of the log bond price; zero at t = T.

    The squared-kernel integral is evaluated by adaptive quadrature at
    tolerances tight enough that pricing error is dominated by the model,
    not the integration.
    """
    tau = _check_tenor(t, T)
    if tau == 0.0:
        return 0.0
    a, b, sigma, p, q = params.a, params.b, params.sigma, params.p, params.q

    def integrand(s):
        return (m_fn(s, params) + np.exp(-b * s) - 1.0) ** 2

    kernel = integrate_adaptive(integrand, 0.0, tau).value
    m_tau = m_fn(tau, params)
    memory_tail = (sigma ** 2 * q * m_tau ** 2
                   / (b ** 2 * ((p + 2.0 * q) ** 2 * math.exp(2.0 * q * t) - p * p)))
    return (a / b * (tau - c_factor(t, T, params))
            - sigma ** 2 / (2.0 * b ** 2) * kernel
            - memory_tail)


def d_factor(t: float, T: float, params: ModelParams) -> float:
    """Memory-state loading of the log bond price; zero at t = T and for p = 0."""
    tau = _check_tenor(t, T)
    return params.sigma / params.b * math.exp(-(params.p + params.q) * t) * m_fn(tau, params)


def affine_coefficients(t: float, T: float, params: ModelParams) -> AffineCoefficients:
    """Bundle (A, C, D) for a (t, T) pair so callers can cache and reuse."""
    return AffineCoefficients(
        A=a_factor(t, T, params),
        C=c_factor(t, T, params),
        D=d_factor(t, T, params),
        t=t,
        T=T,
    )


def affine_price(coeffs: AffineCoefficients, r: ArrayLike, u: ArrayLike) -> ArrayLike:
    """Bond price surface exp(-A - C*r + D*u); broadcasts over (r, u)."""
    return np.exp(-coeffs.A - coeffs.C * r + coeffs.D * u)


def bond_price(state: ModelState, T: float, params: ModelParams) -> float:
    """Zero-coupon bond price at the given state; equals 1 at T = t."""
    if state.t > T:
        raise ValueError(f"bond already matured: t={state.t} > T={T}")
    coeffs = affine_coefficients(state.t, T, params)
    return float(affine_price(coeffs, state.r, state.u))


def yield_at(state: ModelState, T: float, params: ModelParams) -> float:
    """Continuously compounded yield; exp(-(T-t)*Y) reproduces the bond price."""
    if state.t >= T:
        raise ValueError(f"yield needs t < T, got t={state.t}, T={T}")
    coeffs = affine_coefficients(state.t, T, params)
    return (coeffs.A + coeffs.C * state.r - coeffs.D * state.u) / (T - state.t)


def discount_vol(t: float, T: float, params: ModelParams) -> float:
    """Volatility of the discounted T-bond at time t; zero at t = T."""
    tau = _check_tenor(t, T)
    return params.sigma / params.b * (math.exp(-params.b * tau) - 1.0
                                      + l_fn(t, params) * m_fn(tau, params))


def _memory_diffusion(s: ArrayLike, params: ModelParams) -> ArrayLike:
    """Diffusion loading of the memory state u."""
    return np.exp((params.p + params.q) * np.asarray(s, dtype=float)) * l_fn(s, params)


def _rate_memory_coupling(t: ArrayLike, s: ArrayLike, params: ModelParams) -> ArrayLike:
    """Deterministic weight with which u at time s feeds the rate at time t."""
    sigma, p, b = params.sigma, params.p, params.b
    kappa = b - (params.p + params.q)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if abs(kappa) < 1e-12:
        seg = (t - s) * np.exp(kappa * s)
    else:
        seg = np.exp(kappa * s) * np.expm1(kappa * (t - s)) / kappa
    out = -sigma * p * np.exp(-b * t) * seg
    return out if out.ndim else float(out)


def transition_moments(t0: float, t1: float, params: ModelParams) -> TransitionMoments:
    """Exact Gaussian transition law of (r, u) over [t0, t1].

    Mean propagation is analytic; the three covariance entries come from
    adaptive quadrature of the squared diffusion loadings.  With sigma = 0
    the transition is the deterministic mean recursion with u pinned at 0.
    """
    if t1 < t0 or t0 < 0.0:
        raise ValueError(f"need 0 <= t0 <= t1, got [{t0}, {t1}]")
    a, b = params.a, params.b
    dt = t1 - t0
    decay = math.exp(-b * dt)
    drift = a / b * -math.expm1(-b * dt)
    if params.sigma == 0.0:
        return TransitionMoments(t0, t1, decay, drift, 0.0, 0.0, 0.0, 0.0)
    coupling = _rate_memory_coupling(t1, t0, params)

    def load_rate(s):
        return (params.sigma * np.exp(-b * (t1 - s))
                + _rate_memory_coupling(t1, s, params) * _memory_diffusion(s, params))

    def load_memory(s):
        return _memory_diffusion(s, params)

    var_rate = integrate_adaptive(lambda s: load_rate(s) ** 2, t0, t1).value
    cov = integrate_adaptive(lambda s: load_rate(s) * load_memory(s), t0, t1).value
    var_memory = integrate_adaptive(lambda s: load_memory(s) ** 2, t0, t1).value
    return TransitionMoments(t0, t1, decay, drift, coupling,
                             var_rate, cov, var_memory)
