import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tricolor.opo import OpoParams

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FITTED = dict(delta0=0.2, delta=0.26, excess_pump_phase_noise=15.0)


@pytest.fixture
def fitted_params():
    return OpoParams(sigma=1.34, **FITTED)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
