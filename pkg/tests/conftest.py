import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ldoup.params import reference_model

settings.register_profile("ldoup", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ldoup")


@pytest.fixture(scope="session")
def wvagou():
    return reference_model("wvag-ou")


@pytest.fixture(scope="session")
def ouwvag():
    return reference_model("ou-wvag")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def theta_square(lim=10.0, k=21):
    g = np.linspace(-lim, lim, k)
    return np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.LINES):
        terminalreporter.write_line(mod.LINES[n])
