import numpy as np
import pytest

from memvasicek import ModelParams

# Reference parameter sets used across the validation suite.
BOND_DEMO = ModelParams(a=0.12, b=1.9, sigma=0.35, p=0.034, q=0.12, r0=0.025)
OPTION_DEMO = ModelParams(a=0.08, b=1.5, sigma=0.3, p=0.07, q=0.08, r0=0.025)

# Fitted parameter sets for three qualitatively different curve shapes,
# used as forward-pricing and calibration fixtures.
FITTED_CURVES = {
    "humped": ModelParams(a=0.1635, b=1.8952, sigma=0.7247,
                          p=0.0909, q=0.2100, r0=0.0240),
    "rising": ModelParams(a=0.0822, b=1.5561, sigma=0.3007,
                          p=0.0696, q=0.0758, r0=0.0259),
    "steep": ModelParams(a=0.1216, b=1.6806, sigma=0.6246,
                         p=0.1170, q=0.1623, r0=1.0010e-5),
}

# Standard Treasury-style maturity grid (in years).
TEN_MATURITIES = (1 / 12, 3 / 12, 6 / 12, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 20.0)


@pytest.fixture
def bond_demo():
    return BOND_DEMO


@pytest.fixture
def option_demo():
    return OPTION_DEMO


def random_classical_params(rng: np.random.Generator) -> ModelParams:
    """Random valid parameter set with the memory switched off."""
    return ModelParams(
        a=rng.uniform(0.02, 0.3),
        b=rng.uniform(0.3, 2.5),
        sigma=rng.uniform(0.05, 0.6),
        p=0.0,
        q=rng.uniform(0.02, 0.5),
        r0=rng.uniform(0.0, 0.12),
    )


def random_params(rng: np.random.Generator) -> ModelParams:
    """Random valid parameter set with memory on (p may be negative)."""
    q = rng.uniform(0.05, 0.5)
    return ModelParams(
        a=rng.uniform(0.02, 0.3),
        b=rng.uniform(0.3, 2.5),
        sigma=rng.uniform(0.05, 0.6),
        p=rng.uniform(-0.8 * q, 0.3),
        q=q,
        r0=rng.uniform(0.0, 0.12),
    )
