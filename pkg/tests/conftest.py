import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def linear_gaussian(n, seed, slope=2.0):
    """A = W + N(0,1), Y = slope*A + W + N(0,1)."""
    from shiftmix import make_dataset

    r = np.random.default_rng(seed)
    w = r.normal(size=n)
    a = w + r.normal(size=n)
    y = slope * a + w + r.normal(size=n)
    return make_dataset({"W": w, "A": a, "Y": y}, {"W": "covariate", "A": "exposure", "Y": "outcome"})


ACCEPTANCE_LINES = []


def record(number, passed, text):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
