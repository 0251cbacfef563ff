"""Shared numerical kernels: adaptive quadrature, normal CDF, tridiagonal
solves, and a derivative-free simplex minimizer.

Everything here is pure and stateless, so concurrent callers are safe.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "NumericalError",
    "QuadratureError",
    "SingularTridiagonalError",
    "QuadResult",
    "OptimResult",
    "integrate_adaptive",
    "norm_cdf",
    "solve_tridiagonal",
    "solve_tridiagonal_many",
    "nelder_mead",
]


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class QuadratureError(NumericalError):
    """Adaptive quadrature failed; ``best_estimate`` holds the last iterate."""

    def __init__(self, message: str, best_estimate: float = math.nan,
                 error_estimate: float = math.inf):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class SingularTridiagonalError(NumericalError):
    """Zero pivot during a Thomas sweep; ``index`` is the offending row."""

    def __init__(self, index: int):
        super().__init__(f"zero pivot in tridiagonal solve at row {index}")
        self.index = index


@dataclass(frozen=True)
class QuadResult:
    """Definite integral with an absolute error estimate."""

    value: float
    error_estimate: float
    evaluations: int


@dataclass(frozen=True)
class OptimResult:
    """Simplex search outcome; ``f_best`` is the objective at ``x_best``."""

    x_best: np.ndarray
    f_best: float
    iterations: int
    converged: bool
    simplex_diameter: float


# 15-point Kronrod extension of 7-point Gauss (nodes/weights on [-1, 1]).
_GK_NODES_HALF = np.array([
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0,
])
_GK_WEIGHTS_HALF = np.array([
    0.0229353220105292, 0.0630920926299785, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278,
])
_G7_WEIGHTS_HALF = np.array([
    0.1294849661688697, 0.2797053914892767,
    0.3818300505051189, 0.4179591836734694,
])

_NODES = np.concatenate((-_GK_NODES_HALF[:7], _GK_NODES_HALF[::-1]))
_W_KRONROD = np.concatenate((_GK_WEIGHTS_HALF[:7], _GK_WEIGHTS_HALF[::-1]))
_W_GAUSS = np.zeros(15)
_W_GAUSS[1:14:2] = np.concatenate((_G7_WEIGHTS_HALF[:3],
                                   _G7_WEIGHTS_HALF[::-1]))
# Nudge the center weights until each rule's weight total is exactly the
# float 2.0 under numpy's summation order, so constants integrate exactly.
for _w in (_W_KRONROD, _W_GAUSS):
    for _ in range(4):
        _w[7] += 2.0 - np.sum(_w)

_MAX_PANELS = 2 ** 14


def _sample(f: Callable[[float], float], x: np.ndarray,
            vectorized: bool | None) -> tuple[np.ndarray, bool]:
    """Evaluate f at all abscissae, discovering vectorization on first use."""
    if vectorized is None or vectorized:
        try:
            y = np.asarray(f(x), dtype=float)
            if y.shape == x.shape:
                return y, True
        except Exception:
            if vectorized:
                raise
    return np.array([float(f(xi)) for xi in x]), False


def _panel(f, lo: float, hi: float, vectorized):
    """One Gauss-Kronrod pass over [lo, hi] -> (value, error, vectorized)."""
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = center + half * _NODES
    y, vectorized = _sample(f, x, vectorized)
    bad = ~np.isfinite(y)
    if bad.any():
        raise QuadratureError(
            f"integrand returned a non-finite value at x={x[bad][0]!r}")
    k15 = half * float(np.sum(_W_KRONROD * y))
    g7 = half * float(np.sum(_W_GAUSS * y))
    return k15, abs(k15 - g7), vectorized


def integrate_adaptive(f: Callable[[float], float], lo: float, hi: float,
                       abs_tol: float = 1e-12,
                       rel_tol: float = 1e-10) -> QuadResult:
    """Integrate ``f`` over [lo, hi] by globally adaptive Gauss-Kronrod.

    Panels are bisected worst-error-first until the summed error estimate
    drops below ``max(abs_tol, rel_tol * |integral|)``.  ``f`` may accept
    numpy arrays (preferred, detected automatically) or plain floats.

    Raises :class:`QuadratureError` if the panel budget is exhausted or the
    integrand produces NaN/inf.
    """
    if not (lo <= hi):
        raise ValueError(f"integration bounds out of order: [{lo}, {hi}]")
    if abs_tol <= 0.0:
        raise ValueError("abs_tol must be positive")
    if lo == hi:
        return QuadResult(0.0, 0.0, 1)

    vec: bool | None = None
    value, err, vec = _panel(f, lo, hi, vec)
    # Heap of (-error, tiebreak, lo, hi, value, error); worst panel first.
    tie = 0
    heap = [(-err, tie, lo, hi, value, err)]
    n_panels = 1
    total_val, total_err = value, err

    while total_err > max(abs_tol, rel_tol * abs(total_val)):
        if n_panels >= _MAX_PANELS:
            raise QuadratureError(
                f"quadrature did not converge within {_MAX_PANELS} panels "
                f"(estimate {total_val!r}, error {total_err:.3e})",
                best_estimate=total_val, error_estimate=total_err)
        _, _, a, b, v, e = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        v1, e1, vec = _panel(f, a, mid, vec)
        v2, e2, vec = _panel(f, mid, b, vec)
        total_val += (v1 + v2) - v
        total_err += (e1 + e2) - e
        tie += 1
        heapq.heappush(heap, (-e1, tie, a, mid, v1, e1))
        tie += 1
        heapq.heappush(heap, (-e2, tie, mid, b, v2, e2))
        n_panels += 1

    # Guard against cancellation in the incremental error sum.
    total_err = max(total_err, 0.0)
    return QuadResult(total_val, total_err, 15 * (2 * n_panels - 1))


_SQRT2 = math.sqrt(2.0)


def norm_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / _SQRT2)


def solve_tridiagonal(sub: Sequence[float], diag: Sequence[float],
                      sup: Sequence[float],
                      rhs: Sequence[float]) -> np.ndarray:
    """Solve a tridiagonal system by the Thomas algorithm (no pivoting).

    ``sub`` and ``sup`` have length n-1; ``diag`` and ``rhs`` length n.
    Intended for the diagonally dominant systems produced by the PDE
    sweeps; a zero pivot raises :class:`SingularTridiagonalError`.
    """
    diag = np.asarray(diag, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    sub = np.asarray(sub, dtype=float)
    sup = np.asarray(sup, dtype=float)
    n = diag.shape[0]
    if rhs.shape[0] != n or sub.shape[0] != n - 1 or sup.shape[0] != n - 1:
        raise ValueError("inconsistent tridiagonal dimensions")

    c = np.empty(n - 1)
    d = np.empty(n)
    piv = diag[0]
    if piv == 0.0:
        raise SingularTridiagonalError(0)
    if n > 1:
        c[0] = sup[0] / piv
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - sub[i - 1] * c[i - 1]
        if piv == 0.0:
            raise SingularTridiagonalError(i)
        if i < n - 1:
            c[i] = sup[i] / piv
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / piv

    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def solve_tridiagonal_many(sub: np.ndarray, diag: np.ndarray,
                           sup: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a batch of independent tridiagonal systems along the last axis.

    ``diag`` and ``rhs`` have shape (..., n); ``sub`` and ``sup`` shape
    (..., n-1).  The elimination loop runs over n with vectorized batch
    arithmetic, which is what makes the ADI sweeps cheap.
    """
    n = diag.shape[-1]
    c = np.empty_like(sub)
    d = np.empty_like(rhs)
    piv = diag[..., 0]
    if np.any(piv == 0.0):
        raise SingularTridiagonalError(0)
    if n > 1:
        c[..., 0] = sup[..., 0] / piv
    d[..., 0] = rhs[..., 0] / piv
    for i in range(1, n):
        piv = diag[..., i] - sub[..., i - 1] * c[..., i - 1]
        if np.any(piv == 0.0):
            raise SingularTridiagonalError(i)
        if i < n - 1:
            c[..., i] = sup[..., i] / piv
        d[..., i] = (rhs[..., i] - sub[..., i - 1] * d[..., i - 1]) / piv

    x = np.empty_like(rhs)
    x[..., -1] = d[..., -1]
    for i in range(n - 2, -1, -1):
        x[..., i] = d[..., i] - c[..., i] * x[..., i + 1]
    return x


def _simplex_diameter(simplex: np.ndarray) -> float:
    m = simplex.shape[0]
    best = 0.0
    for i in range(m - 1):
        d = np.linalg.norm(simplex[i + 1:] - simplex[i], axis=1).max()
        best = max(best, float(d))
    return best


def nelder_mead(objective: Callable[[np.ndarray], float], x0: Sequence[float],
                step0: Sequence[float], tol_f: float = 1e-12,
                tol_x: float = 1e-10, max_iter: int = 2000) -> OptimResult:
    """Minimize ``objective`` with the Nelder-Mead simplex method.

    The initial simplex is ``x0`` plus one vertex per coordinate offset in
    ``step0``.  NaN objective values are treated as +inf so the simplex
    simply moves away from them.  Convergence is declared when the
    function spread over the simplex falls below ``tol_f`` or the simplex
    diameter falls below ``tol_x``.
    """
    x0 = np.asarray(x0, dtype=float)
    step0 = np.asarray(step0, dtype=float)
    if x0.shape != step0.shape or x0.ndim != 1:
        raise ValueError("x0 and step0 must be 1-d vectors of equal length")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    def fn(x: np.ndarray) -> float:
        v = float(objective(x))
        return math.inf if math.isnan(v) else v

    f0 = fn(x0)
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at x0")

    n = x0.shape[0]
    simplex = np.tile(x0, (n + 1, 1))
    fvals = np.full(n + 1, f0)
    for i in range(n):
        step = step0[i] if step0[i] != 0.0 else 1e-4
        simplex[i + 1, i] += step
        fvals[i + 1] = fn(simplex[i + 1])

    alpha, gamma, rho, shrink = 1.0, 2.0, 0.5, 0.5
    iterations = 0
    converged = False

    order = np.argsort(fvals, kind="stable")
    simplex, fvals = simplex[order], fvals[order]

    while iterations < max_iter:
        spread = fvals[-1] - fvals[0]
        diameter = _simplex_diameter(simplex)
        if spread < tol_f or diameter < tol_x:
            converged = True
            break
        iterations += 1

        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - simplex[-1])
        fr = fn(xr)
        if fr < fvals[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = fn(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + rho * (xr - centroid)
            else:
                xc = centroid + rho * (simplex[-1] - centroid)
            fc = fn(xc)
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
            else:
                # Contraction failed: shrink everything toward the best vertex.
                simplex[1:] = simplex[0] + shrink * (simplex[1:] - simplex[0])
                for i in range(1, n + 1):
                    fvals[i] = fn(simplex[i])

        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]

    return OptimResult(
        x_best=simplex[0].copy(),
        f_best=float(fvals[0]),
        iterations=iterations,
        converged=converged,
        simplex_diameter=_simplex_diameter(simplex),
    )
