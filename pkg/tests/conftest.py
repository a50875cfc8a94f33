"""Shared fixtures: the expensive Monte Carlo and long-horizon deviation
runs are computed once per session and reused across test modules."""

from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from erwalk.core import ErwParams
from erwalk import deviations, simulation

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

MASTER_SEED = 20240801


@pytest.fixture(scope="session")
def mc_quarter():
    """Reinforced walk at alpha=1/4, beta=0: 10^6 replicas to n=10^4 with
    checkpoints at 10^2 and 10^3."""
    params = ErwParams(Fraction(1, 4), Fraction(0))
    config = simulation.SimConfig(
        params=params,
        horizon=10**4,
        replicas=10**6,
        seed=MASTER_SEED,
        checkpoints=(100, 1000),
    )
    return simulation.simulate(config)


@pytest.fixture(scope="session")
def mc_ks_terminals(mc_quarter):
    """Terminal accumulators for the normal-approximation checks at
    alpha in {-1/2, 0, 1/4} (the 1/4 run is shared)."""
    out = {Fraction(1, 4): mc_quarter.terminal}
    for alpha in (Fraction(-1, 2), Fraction(0)):
        params = ErwParams(alpha, Fraction(0))
        config = simulation.SimConfig(
            params=params, horizon=10**4, replicas=10**6, seed=MASTER_SEED
        )
        out[alpha] = simulation.simulate(config).terminal
    return out


@pytest.fixture(scope="session")
def critical_family_1e6():
    """Even deviation series at the critical memory strength, horizon 10^6."""
    params = ErwParams(Fraction(1, 2), Fraction(0))
    return deviations.deviations_even_family(params, 4, 10**6)
