"""Memory-extended Vasicek short rate model toolkit.

Closed-form bond and bond-option pricing for a Vasicek-type model whose
driving noise carries exponential-kernel memory, plus the Monte Carlo and
2D PDE engines that cross-validate the closed forms, and least-squares
yield-curve calibration.
"""
from .calibration import CalibrationResult, QuoteSet, YieldQuote, calibrate, objective
from .model import (AffineCoefficients, ModelParams, ModelState,
                    TransitionMoments, a_factor, affine_coefficients,
                    affine_price, bond_price, c_factor, d_factor,
                    discount_vol, l_fn, m_fn, transition_moments, yield_at)
from .numerics import (NumericalError, OptimResult, QuadratureError,
                       QuadResult, SingularTridiagonalError,
                       integrate_adaptive, nelder_mead, norm_cdf,
                       solve_tridiagonal, solve_tridiagonal_many)
from .options import OptionSpec, call_price, forward_vol, put_price, sigma_sq
from .pde import PdeGrid, PdeSolution, default_grid, solve, value_at
from .simulation import (McEstimate, PathSet, SimConfig, mc_bond_price,
                         mc_claim_price, paths_to_csv, simulate)

__version__ = "0.1.0"

__all__ = [
    "AffineCoefficients", "CalibrationResult", "McEstimate", "ModelParams",
    "ModelState", "NumericalError", "OptimResult", "OptionSpec", "PathSet",
    "PdeGrid", "PdeSolution", "QuadResult", "QuadratureError", "QuoteSet",
    "SimConfig", "SingularTridiagonalError", "TransitionMoments",
    "YieldQuote", "a_factor", "affine_coefficients", "affine_price",
    "bond_price", "c_factor", "calibrate", "call_price", "d_factor",
    "default_grid", "discount_vol", "forward_vol", "integrate_adaptive",
    "l_fn", "m_fn", "mc_bond_price", "mc_claim_price", "nelder_mead",
    "norm_cdf", "objective", "paths_to_csv", "put_price", "sigma_sq",
    "simulate", "solve", "solve_tridiagonal", "solve_tridiagonal_many",
    "transition_moments", "value_at", "yield_at",
]
