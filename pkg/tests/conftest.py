import numpy as np
import pytest

from horolab import config as config_mod
from horolab.experiments import Context


@pytest.fixture(scope="session")
def standard_cfg():
    return config_mod.load(config_mod.resolve("schottky-n2-standard"))


@pytest.fixture(scope="session")
def ctx(standard_cfg):
    """Shared build of the bundled two-generator example."""
    return Context(standard_cfg)


@pytest.fixture(scope="session")
def group(ctx):
    return ctx.group


@pytest.fixture(scope="session")
def density(ctx):
    return ctx.density


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import OUTCOMES
    except ImportError:
        return
    if not OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(OUTCOMES):
        terminalreporter.write_line(OUTCOMES[n])
