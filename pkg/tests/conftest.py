import numpy as np
import pytest

from patient_exchange.market import DemandCurve, MarketConfig, PatienceDistribution, example_config
from patient_exchange.verify import example_equilibrium


@pytest.fixture(scope="session")
def example():
    return example_config()


@pytest.fixture(scope="session")
def example_eq():
    return example_equilibrium()


@pytest.fixture
def mm1():
    return MarketConfig(3.0, 12.0, 1.0, 1, DemandCurve.constant(1), PatienceDistribution.uniform(1.0))


@pytest.fixture
def two_tick():
    # equal service on both ticks, lam/mu = 0.5
    return MarketConfig(1.0, 2.0, 1.0, 2, DemandCurve.constant(2), PatienceDistribution.uniform(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(RESULTS):
        chk = RESULTS[name]
        tr.write_line(f"{name} {'PASS' if chk.passed else 'FAIL'}")
        for line in chk.lines():
            tr.write_line(f"    {line}")
