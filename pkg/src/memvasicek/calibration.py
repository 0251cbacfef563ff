"""Least-squares fit of the time-0 model yield curve to observed yields.

The six parameters are searched in an unconstrained log-style
reparameterization so every iterate is a valid parameter set, with
multi-start Nelder-Mead and a deterministic polish stage.  A restricted
mode pins the memory strength at zero, which reproduces a classical
Vasicek fit; the full fit always seeds one start from that restricted
solution, so the nested-model inequality holds by construction.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, ModelState, yield_at
from .numerics import NumericalError, nelder_mead

__all__ = ["YieldQuote", "QuoteSet", "CalibrationResult", "objective", "calibrate"]

_MIN_RATE = -0.05  # sanity floor for quoted yields


@dataclass(frozen=True)
class YieldQuote:
    """One observed point of the yield curve (maturity in years, decimal rate)."""

    maturity: float
    rate: float

    def __post_init__(self):
        if self.maturity <= 0.0:
            raise ValueError("quote maturity must be positive")
        if not self.rate > _MIN_RATE:
            raise ValueError(f"quoted yield {self.rate} below sanity floor {_MIN_RATE}")


@dataclass(frozen=True)
class QuoteSet:
    """Quotes sorted by maturity with no duplicates."""

    quotes: tuple[YieldQuote, ...]

    def __post_init__(self):
        if not self.quotes:
            raise ValueError("QuoteSet must contain at least one quote")
        mats = [q.maturity for q in self.quotes]
        if any(b <= a for a, b in zip(mats, mats[1:])):
            raise ValueError("quotes must be strictly increasing in maturity")

    @classmethod
    def from_pairs(cls, pairs) -> "QuoteSet":
        quotes = sorted((YieldQuote(m, r) for m, r in pairs),
                        key=lambda quote: quote.maturity)
        return cls(tuple(quotes))

    @property
    def maturities(self) -> np.ndarray:
        return np.array([q.maturity for q in self.quotes])

    @property
    def rates(self) -> np.ndarray:
        return np.array([q.rate for q in self.quotes])

    def __len__(self) -> int:
        return len(self.quotes)

    def __iter__(self):
        return iter(self.quotes)


@dataclass(frozen=True)
class CalibrationResult:
    params: ModelParams
    sse: float
    residuals: np.ndarray
    iterations: int
    converged: bool
    restarts_used: int


def _model_yields(params: ModelParams, quotes: QuoteSet) -> np.ndarray:
    state0 = ModelState(t=0.0, r=params.r0, u=0.0)
    return np.array([yield_at(state0, q.maturity, params) for q in quotes])


def objective(params: ModelParams, quotes: QuoteSet) -> float:
    """Sum of squared yield errors; +inf (never an exception) on bad input."""
    try:
        res = _model_yields(params, quotes) - quotes.rates
    except (NumericalError, ValueError, OverflowError, FloatingPointError):
        return math.inf
    if not np.isfinite(res).all():
        return math.inf
    return float(res @ res)


# --- unconstrained reparameterization -------------------------------------
#
# (alpha, beta, s, kappa, pi, rho) -> a=e^alpha, b=e^beta, sigma=e^s,
# q=e^kappa, p=-q+e^pi, r0=e^rho.  Every point of R^6 maps into the valid
# parameter region.

def _decode(x: np.ndarray) -> ModelParams:
    a, b, sigma, q, ep, r0 = np.exp(x[:6])
    return ModelParams(a=a, b=b, sigma=sigma, p=ep - q, q=q, r0=r0)


def _encode(params: ModelParams) -> np.ndarray:
    return np.log([params.a, params.b, params.sigma, params.q,
                   params.p + params.q, max(params.r0, 1e-12)])


def _default_init(quotes: QuoteSet) -> ModelParams:
    long_end = max(float(quotes.rates[-1]), 1e-4)
    short_end = max(float(quotes.rates[0]), 1e-6)
    b = 1.5
    return ModelParams(a=b * long_end, b=b, sigma=0.3, p=0.05, q=0.1,
                       r0=short_end)


def _search(fn, starts, max_iter: int) -> tuple[np.ndarray | None, float, int, bool]:
    """Run Nelder-Mead from every usable start, then polish the winner.

    The polish stage rebuilds fresh simplexes of shrinking size around the
    incumbent, which recovers from premature simplex collapse.  Starts at
    which the objective is not finite are skipped.
    """
    best_x, best_f, total_iters, best_conv = None, math.inf, 0, False
    for x0 in starts:
        if not math.isfinite(fn(x0)):
            continue
        res = nelder_mead(fn, x0, step0=np.full(len(x0), 0.25),
                          tol_f=1e-13, tol_x=1e-11, max_iter=max_iter)
        total_iters += res.iterations
        if res.f_best < best_f:
            best_x, best_f, best_conv = res.x_best, res.f_best, res.converged
    if best_x is None:
        return None, math.inf, total_iters, False
    for scale in (0.1, 0.02, 0.004, 0.0008):
        res = nelder_mead(fn, best_x, step0=np.full(len(best_x), scale),
                          tol_f=1e-18, tol_x=1e-14, max_iter=max_iter)
        total_iters += res.iterations
        if res.f_best < best_f:
            best_x, best_f, best_conv = res.x_best, res.f_best, res.converged
    return best_x, best_f, total_iters, best_conv


def calibrate(quotes: QuoteSet, init: ModelParams | None = None,
              n_restarts: int = 20, seed: int = 0,
              restrict_p_zero: bool = False,
              max_iter: int = 600) -> CalibrationResult:
    """Fit the model yield curve to ``quotes`` by multi-start Nelder-Mead.

    Deterministic for fixed (quotes, init, n_restarts, seed).  With
    ``restrict_p_zero`` the memory strength is pinned at zero (classical
    fit on a, b, sigma, r0); otherwise all six parameters are free and the
    restricted optimum is included among the starting points.
    """
    if len(quotes) < 6 and not restrict_p_zero:
        warnings.warn(
            f"calibrating 6 parameters against {len(quotes)} quotes; "
            "the fit is underdetermined", stacklevel=2)
    if n_restarts < 1:
        raise ValueError("n_restarts must be >= 1")
    init = init or _default_init(quotes)
    x_init = _encode(init)
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)

    if restrict_p_zero:
        kappa = x_init[3]

        def fn(v: np.ndarray) -> float:
            try:
                params = ModelParams(a=math.exp(v[0]), b=math.exp(v[1]),
                                     sigma=math.exp(v[2]), p=0.0,
                                     q=math.exp(kappa), r0=math.exp(v[3]))
            except (ValueError, OverflowError):
                return math.inf
            return objective(params, quotes)

        x0 = x_init[[0, 1, 2, 5]]
        starts = [x0] + [x0 + rng.normal(scale=0.5, size=4)
                         for _ in range(n_restarts - 1)]
        best_v, best_f, iters, conv = _search(fn, starts, max_iter)
        if best_v is None:
            best = ModelParams(a=init.a, b=init.b, sigma=init.sigma, p=0.0,
                               q=math.exp(kappa), r0=init.r0)
        else:
            best = ModelParams(a=math.exp(best_v[0]), b=math.exp(best_v[1]),
                               sigma=math.exp(best_v[2]), p=0.0,
                               q=math.exp(kappa), r0=math.exp(best_v[3]))
    else:
        def fn(v: np.ndarray) -> float:
            try:
                params = _decode(v)
            except (ValueError, OverflowError):
                return math.inf
            return objective(params, quotes)

        restricted = calibrate(quotes, init=init, n_restarts=n_restarts,
                               seed=seed, restrict_p_zero=True,
                               max_iter=max_iter)
        starts = [x_init] + [x_init + rng.normal(scale=0.5, size=6)
                             for _ in range(n_restarts - 1)]
        starts.append(_encode(restricted.params))
        best_v, best_f, iters, conv = _search(fn, starts, max_iter)
        iters += restricted.iterations
        best = _decode(best_v) if best_v is not None else init

    residuals = _model_yields(best, quotes) - quotes.rates
    sse = float(residuals @ residuals)
    return CalibrationResult(
        params=best,
        sse=sse,
        residuals=residuals,
        iterations=iters,
        converged=conv and math.isfinite(sse),
        restarts_used=len(starts),
    )
