import pytest
from hypothesis import HealthCheck, settings

import magnon_transport as mt

settings.register_profile(
    "artifact",
    deadline=None,
    max_examples=50,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("artifact")


@pytest.fixture(scope="session")
def chain251() -> mt.ChainSpec:
    return mt.ChainSpec(251)


@pytest.fixture(scope="session")
def trap_default() -> mt.TrapConfig:
    return mt.TrapConfig(omega0=0.5, x_start=50.0, distance=150.0)


@pytest.fixture(scope="session")
def small_chain() -> mt.ChainSpec:
    return mt.ChainSpec(61)


@pytest.fixture(scope="session")
def small_trap() -> mt.TrapConfig:
    return mt.TrapConfig(omega0=0.5, x_start=14.0, distance=30.0)
