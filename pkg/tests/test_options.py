import math

import numpy as np
import pytest

from memvasicek import (ModelState, OptionSpec, bond_price, call_price,
                        discount_vol, forward_vol, put_price, sigma_sq)

import classical
from conftest import random_classical_params, random_params

# Regression constant: integrated squared forward volatility for the option
# demo parameters at S = 0.5, T = 1, frozen from a 1e6-panel Simpson run
# over independently coded kernels (classical.l_ref / m_ref).
SIG2_OPTION_DEMO = 0.002701327168157295


def _random_spec(rng, strike_lo=0.5, strike_hi=1.2):
    S = rng.uniform(0.1, 3.0)
    return OptionSpec(S=S, T=S + rng.uniform(0.05, 3.0),
                      K=rng.uniform(strike_lo, strike_hi))


class TestOptionSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            OptionSpec(S=0.0, T=1.0, K=0.5)
        with pytest.raises(ValueError):
            OptionSpec(S=2.0, T=1.0, K=0.5)
        with pytest.raises(ValueError):
            OptionSpec(S=0.5, T=1.0, K=0.0)
        with pytest.raises(ValueError):
            OptionSpec(S=0.5, T=1.0, K=0.5, kind="straddle")

    def test_expiry_equal_to_maturity_allowed(self):
        OptionSpec(S=1.0, T=1.0, K=0.5)


class TestForwardVol:
    def test_identical_legs(self, option_demo):
        spec = OptionSpec(S=1.0, T=1.0, K=0.5)
        for t in (0.0, 0.3, 1.0):
            assert forward_vol(t, spec, option_demo) == 0.0

    def test_difference_identity(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            prm = random_params(rng)
            spec = _random_spec(rng)
            t = rng.uniform(0.0, spec.S)
            lhs = forward_vol(t, spec, prm)
            rhs = discount_vol(t, spec.T, prm) - discount_vol(t, spec.S, prm)
            assert lhs == pytest.approx(rhs, abs=1e-14)

    def test_classical_reduction(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            prm = random_classical_params(rng)
            spec = _random_spec(rng)
            t = rng.uniform(0.0, spec.S)
            expect = classical.forward_vol(prm.sigma, prm.b, t, spec.S, spec.T)
            assert forward_vol(t, spec, prm) == pytest.approx(
                expect, rel=1e-12, abs=1e-15)

    def test_domain_error(self, option_demo):
        with pytest.raises(ValueError):
            forward_vol(0.9, OptionSpec(S=0.5, T=1.0, K=0.3), option_demo)


class TestSigmaSq:
    def test_degenerate_zero(self, option_demo):
        assert sigma_sq(OptionSpec(S=1.0, T=1.0, K=0.5), option_demo) == 0.0

    def test_classical_analytic(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            prm = random_classical_params(rng)
            spec = _random_spec(rng)
            expect = classical.sigma_sq(prm.sigma, prm.b, spec.S, spec.T)
            assert sigma_sq(spec, prm) == pytest.approx(expect, abs=1e-10)

    def test_frozen_regression_value(self, option_demo):
        got = sigma_sq(OptionSpec(S=0.5, T=1.0, K=0.3), option_demo)
        assert got == pytest.approx(SIG2_OPTION_DEMO, abs=1e-10)

    def test_live_simpson_oracle(self, option_demo):
        p, q, b, s = (option_demo.p, option_demo.q, option_demo.b,
                      option_demo.sigma)

        def squared_vol(t):
            return (s / b * (np.exp(-b * (1.0 - t)) - np.exp(-b * (0.5 - t))
                             + classical.l_ref(t, p, q)
                             * (classical.m_ref(1.0 - t, p, q, b)
                                - classical.m_ref(0.5 - t, p, q, b)))) ** 2

        brute = classical.simpson(squared_vol, 0.0, 0.5, 200_000)
        got = sigma_sq(OptionSpec(S=0.5, T=1.0, K=0.3), option_demo)
        assert got == pytest.approx(brute, abs=1e-11)

    def test_additivity_surrogate(self, option_demo):
        # Building the integrand from the two discounted-bond volatilities
        # must agree with the direct forward-volatility quadrature.
        from memvasicek import integrate_adaptive

        spec = OptionSpec(S=0.5, T=1.5, K=0.4)

        def via_difference(t):
            t = np.asarray(t, dtype=float)
            vals = [(discount_vol(float(ti), spec.T, option_demo)
                     - discount_vol(float(ti), spec.S, option_demo)) ** 2
                    for ti in np.atleast_1d(t)]
            return np.array(vals) if t.ndim else vals[0]

        direct = sigma_sq(spec, option_demo)
        alt = integrate_adaptive(via_difference, 0.0, spec.S).value
        assert alt == pytest.approx(direct, abs=2e-12)

    def test_nonnegative(self):
        rng = np.random.default_rng(24)
        for _ in range(50):
            assert sigma_sq(_random_spec(rng), random_params(rng)) >= 0.0


class TestCallPrice:
    def test_sure_exercise_limit(self, option_demo):
        spec = OptionSpec(S=0.5, T=1.0, K=1e-12)
        p_long = bond_price(ModelState(t=0.0, r=option_demo.r0), 1.0, option_demo)
        assert call_price(spec, option_demo) == pytest.approx(p_long, abs=1e-9)

    def test_classical_reduction(self):
        rng = np.random.default_rng(25)
        for _ in range(100):
            prm = random_classical_params(rng)
            spec = _random_spec(rng)
            expect = classical.call_price(prm.a, prm.b, prm.sigma, prm.r0,
                                          spec.S, spec.T, spec.K)
            assert call_price(spec, prm) == pytest.approx(expect, rel=1e-12,
                                                          abs=1e-15)

    def test_bounds(self):
        rng = np.random.default_rng(26)
        state = ModelState(t=0.0, r=0.0)
        for _ in range(100):
            prm = random_params(rng)
            spec = _random_spec(rng)
            state = ModelState(t=0.0, r=prm.r0)
            price = call_price(spec, prm)
            p_long = bond_price(state, spec.T, prm)
            p_short = bond_price(state, spec.S, prm)
            intrinsic = max(p_long - spec.K * p_short, 0.0)
            assert intrinsic - 1e-14 <= price <= p_long + 1e-14

    def test_decreasing_in_strike(self, option_demo):
        spec_at = lambda K: OptionSpec(S=0.5, T=1.0, K=K)
        prices = [call_price(spec_at(K), option_demo)
                  for K in np.linspace(0.2, 1.3, 23)]
        assert all(b <= a + 1e-15 for a, b in zip(prices, prices[1:]))

    def test_continuous_in_expiry(self, option_demo):
        # Fine expiry scan up to and including the degenerate S = T corner.
        grid = np.arange(0.98, 1.0 + 1e-12, 1e-4)
        prices = [call_price(OptionSpec(S=float(S), T=1.0, K=0.02),
                             option_demo) for S in grid]
        jumps = np.abs(np.diff(prices))
        assert jumps.max() <= 1e-6

    def test_no_kink_at_degenerate_corner(self, option_demo):
        # At the demo strike the price has a visible slope in S, so check
        # smoothness via second differences instead of raw jumps.
        grid = np.arange(0.98, 1.0 + 1e-12, 1e-4)
        prices = np.array([call_price(OptionSpec(S=float(S), T=1.0, K=0.3),
                                      option_demo) for S in grid])
        assert np.abs(np.diff(prices, 2)).max() <= 1e-8

    def test_degenerate_total_variance_returns_intrinsic(self, option_demo):
        spec = OptionSpec(S=1.0, T=1.0, K=0.3)
        state = ModelState(t=0.0, r=option_demo.r0)
        p_long = bond_price(state, 1.0, option_demo)
        expect = max(p_long - 0.3 * p_long, 0.0)
        assert call_price(spec, option_demo) == pytest.approx(expect, rel=1e-14)

    def test_kind_mismatch(self, option_demo):
        with pytest.raises(ValueError):
            call_price(OptionSpec(S=0.5, T=1.0, K=0.3, kind="put"), option_demo)


class TestPutPrice:
    def test_worthless_put_limit(self, option_demo):
        spec = OptionSpec(S=0.5, T=1.0, K=1e-12, kind="put")
        assert put_price(spec, option_demo) == pytest.approx(0.0, abs=1e-9)

    def test_parity(self):
        rng = np.random.default_rng(27)
        for _ in range(100):
            prm = random_params(rng)
            spec = _random_spec(rng)
            call = call_price(spec, prm)
            put = put_price(OptionSpec(S=spec.S, T=spec.T, K=spec.K,
                                       kind="put"), prm)
            state = ModelState(t=0.0, r=prm.r0)
            residual = (call - put
                        - bond_price(state, spec.T, prm)
                        + spec.K * bond_price(state, spec.S, prm))
            assert abs(residual) < 1e-14

    def test_classical_reduction(self):
        rng = np.random.default_rng(28)
        for _ in range(50):
            prm = random_classical_params(rng)
            spec = _random_spec(rng)
            expect = classical.put_price(prm.a, prm.b, prm.sigma, prm.r0,
                                         spec.S, spec.T, spec.K)
            got = put_price(OptionSpec(S=spec.S, T=spec.T, K=spec.K,
                                       kind="put"), prm)
            assert got == pytest.approx(expect, rel=1e-12, abs=1e-13)

    def test_increasing_in_strike(self, option_demo):
        prices = [put_price(OptionSpec(S=0.5, T=1.0, K=K, kind="put"),
                            option_demo) for K in np.linspace(0.6, 1.4, 17)]
        assert all(b >= a - 1e-15 for a, b in zip(prices, prices[1:]))

    def test_kind_mismatch(self, option_demo):
        with pytest.raises(ValueError):
            put_price(OptionSpec(S=0.5, T=1.0, K=0.3), option_demo)
