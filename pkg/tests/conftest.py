import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def short_config():
    """Default config shortened to one 2 s reference lap, noise off."""
    from loggpctl.control import ReferenceConfig
    from loggpctl.harness.config import ExperimentConfig, NoiseConfig

    return ExperimentConfig(reference=ReferenceConfig(period=2.0, repetitions=1),
                            noise=NoiseConfig(enabled=False))


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record an acceptance verdict: ``acceptance("AC1", ok, "detail")``.

    Verdicts are echoed at once and again in the terminal summary, one
    PASS/FAIL line per criterion.
    """

    def record(name, ok, detail=""):
        line = f"{name} {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
