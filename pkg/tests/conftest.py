import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nanorace.arena import ArenaConfig, build_arena

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=25)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def empty_arena():
    return build_arena(ArenaConfig(obstacles=[], gates=[]))


@pytest.fixture
def default_arena():
    return build_arena()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    lines = test_acceptance.REPORT
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: s.split()[1]):
        terminalreporter.write_line(line)
