import math

import numpy as np
import pytest

from memvasicek import (ModelParams, ModelState, NumericalError, PdeGrid,
                        affine_coefficients, affine_price, bond_price,
                        default_grid, solve, value_at)

from conftest import BOND_DEMO


def _ones(x, y):
    return np.ones(np.broadcast(x, y).shape)


class TestPdeGrid:
    def test_rejects_non_uniform_nodes(self):
        with pytest.raises(ValueError):
            PdeGrid(x_nodes=np.array([0.0, 0.1, 0.3]),
                    y_nodes=np.linspace(-1, 1, 5), n_time=10, S=1.0)

    def test_rejects_decreasing_nodes(self):
        with pytest.raises(ValueError):
            PdeGrid(x_nodes=np.array([0.0, -0.1, -0.2]),
                    y_nodes=np.linspace(-1, 1, 5), n_time=10, S=1.0)

    def test_rejects_tiny_axes_and_bad_time(self):
        with pytest.raises(ValueError):
            PdeGrid(x_nodes=np.array([0.0, 1.0]),
                    y_nodes=np.linspace(-1, 1, 5), n_time=10, S=1.0)
        with pytest.raises(ValueError):
            PdeGrid(x_nodes=np.linspace(0, 1, 5),
                    y_nodes=np.linspace(-1, 1, 5), n_time=0, S=1.0)


class TestDefaultGrid:
    def test_memoryless_width_formula(self):
        prm = ModelParams(a=0.12, b=1.9, sigma=0.35, p=0.0, q=0.12, r0=0.025)
        S = 1.0
        grid = default_grid(prm, S)
        # With the memory off, the u-axis deviation has a closed form.
        sd_u = math.sqrt((math.exp(2.0 * prm.q * S) - 1.0) / (2.0 * prm.q))
        assert grid.y_nodes[-1] == pytest.approx(6.0 * sd_u, rel=1e-9)
        assert grid.y_nodes[0] == pytest.approx(-6.0 * sd_u, rel=1e-9)

    def test_contains_initial_state(self, bond_demo):
        for r0 in np.arange(0.0, 0.101, 0.01):
            prm = ModelParams(a=bond_demo.a, b=bond_demo.b,
                              sigma=bond_demo.sigma, p=bond_demo.p,
                              q=bond_demo.q, r0=float(r0))
            grid = default_grid(prm, 1.0)
            assert grid.x_nodes[0] <= r0 <= grid.x_nodes[-1]
            assert grid.y_nodes[0] <= 0.0 <= grid.y_nodes[-1]

    def test_degenerate_sigma_gets_minimum_width(self):
        prm = ModelParams(a=0.095, b=1.9, sigma=0.0, p=0.034, q=0.12, r0=0.05)
        grid = default_grid(prm, 1.0)
        assert grid.x_nodes[-1] - grid.x_nodes[0] >= 0.02 - 1e-12


@pytest.fixture(scope="module")
def small_solution():
    grid = default_grid(BOND_DEMO, 1.0, nx=41, ny=41, n_time=30)
    return solve(BOND_DEMO, 1.0, _ones, grid)


class TestValueAt:
    def test_node_query_is_exact(self, small_solution):
        grid = small_solution.grid
        i, j = 20, 13
        got = value_at(small_solution, float(grid.x_nodes[i]),
                       float(grid.y_nodes[j]))
        assert got == small_solution.surface[i, j]

    def test_cell_midpoint_is_mean_of_corners(self, small_solution):
        grid = small_solution.grid
        i, j = 7, 22
        xm = 0.5 * float(grid.x_nodes[i] + grid.x_nodes[i + 1])
        ym = 0.5 * float(grid.y_nodes[j] + grid.y_nodes[j + 1])
        corners = small_solution.surface[i:i + 2, j:j + 2]
        assert value_at(small_solution, xm, ym) == pytest.approx(
            corners.mean(), rel=1e-13)

    def test_outside_hull_rejected(self, small_solution):
        grid = small_solution.grid
        with pytest.raises(ValueError):
            value_at(small_solution, float(grid.x_nodes[-1]) + 1.0, 0.0)


class TestSolve:
    def test_bond_payoff_matches_closed_form(self, bond_demo):
        grid = default_grid(bond_demo, 1.0, nx=101, ny=101, n_time=100)
        sol = solve(bond_demo, 1.0, _ones, grid)
        for r0 in (0.0, 0.05, 0.1):
            exact = bond_price(ModelState(t=0.0, r=r0), 1.0, bond_demo)
            assert value_at(sol, r0, 0.0) == pytest.approx(exact, rel=5e-3)
        assert np.isfinite(sol.surface).all()
        assert sol.surface.min() >= -1e-6 * sol.surface.max()
        assert {"max_courant", "boundary_flux"} <= set(sol.diagnostics)

    def test_affine_terminal_evolves_exactly(self, bond_demo):
        # The log-affine bond price solves the PDE, so feeding the affine
        # surface at S must reproduce the affine surface at 0 up to scheme
        # error.
        S, T = 1.0, 2.0
        c_term = affine_coefficients(S, T, bond_demo)
        c_zero = affine_coefficients(0.0, T, bond_demo)
        grid = default_grid(bond_demo, S, nx=101, ny=101, n_time=100)
        sol = solve(bond_demo, S, lambda x, y: affine_price(c_term, x, y), grid)
        for r, u in ((bond_demo.r0, 0.0), (0.05, 0.5), (-0.1, -1.0)):
            want = float(affine_price(c_zero, r, u))
            assert value_at(sol, r, u) == pytest.approx(want, rel=1e-4)

    def test_frozen_rate_limit(self):
        xbar = 0.05
        prm = ModelParams(a=1.9 * xbar, b=1.9, sigma=1e-8, p=0.034, q=0.12,
                          r0=xbar)
        grid = default_grid(prm, 1.0, nx=101, ny=101, n_time=100)
        sol = solve(prm, 1.0, _ones, grid)
        assert value_at(sol, xbar, 0.0) == pytest.approx(
            math.exp(-xbar), abs=1e-4)

    def test_monotone_in_terminal_data(self, bond_demo):
        grid = default_grid(bond_demo, 1.0, nx=61, ny=61, n_time=40)
        low = solve(bond_demo, 1.0, lambda x, y: 0.5 * _ones(x, y), grid)
        high = solve(bond_demo, 1.0, _ones, grid)
        eps = 1e-6 * high.surface.max()
        assert (low.surface <= high.surface + eps).all()

    def test_discount_bound_on_positive_rates(self, bond_demo):
        grid = PdeGrid(x_nodes=np.linspace(0.0, 0.3, 61),
                       y_nodes=np.linspace(-3.0, 3.0, 61), n_time=60, S=1.0)
        sol = solve(bond_demo, 1.0, _ones, grid)
        assert sol.surface.min() > 0.0
        assert sol.surface.max() <= 1.0 + 1e-12

    def test_refinement_study(self, bond_demo):
        exact = bond_price(ModelState(t=0.0, r=bond_demo.r0), 1.0, bond_demo)
        errors = []
        for nx, nt in ((51, 50), (101, 100), (201, 200)):
            grid = default_grid(bond_demo, 1.0, nx=nx, ny=nx, n_time=nt)
            sol = solve(bond_demo, 1.0, _ones, grid)
            errors.append(abs(value_at(sol, bond_demo.r0, 0.0) - exact) / exact)
        # Monotone decrease with 10% slack, and empirical spatial order
        # of at least 1.5 across the two refinement levels.
        assert errors[1] <= 1.1 * errors[0]
        assert errors[2] <= 1.1 * errors[1]
        order = math.log2(errors[0] / errors[2]) / 2.0
        assert order >= 1.5

    def test_terminal_must_be_finite(self, bond_demo):
        grid = default_grid(bond_demo, 1.0, nx=21, ny=21, n_time=10)
        with pytest.raises(ValueError):
            solve(bond_demo, 1.0,
                  lambda x, y: np.full(np.broadcast(x, y).shape, np.nan), grid)

    def test_grid_horizon_mismatch(self, bond_demo):
        grid = default_grid(bond_demo, 1.0, nx=21, ny=21, n_time=10)
        with pytest.raises(ValueError):
            solve(bond_demo, 2.0, _ones, grid)

    def test_scalar_terminal_is_wrapped(self, bond_demo):
        grid = default_grid(bond_demo, 1.0, nx=31, ny=31, n_time=20)
        vec = solve(bond_demo, 1.0, _ones, grid)
        scal = solve(bond_demo, 1.0, lambda x, y: 1.0, grid)
        np.testing.assert_allclose(scal.surface, vec.surface, rtol=0, atol=0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_detected(self, bond_demo):
        # A grossly unstable configuration (one huge time step on a wide
        # grid with violent terminal data) must abort, not return garbage.
        grid = PdeGrid(x_nodes=np.linspace(-5e4, 5e4, 31),
                       y_nodes=np.linspace(-5e4, 5e4, 31), n_time=1, S=1.0)
        terminal = lambda x, y: np.exp(np.minimum(np.abs(x) + np.abs(y), 700.0))
        with pytest.raises(NumericalError, match="step"):
            solve(bond_demo, 1.0, terminal, grid)