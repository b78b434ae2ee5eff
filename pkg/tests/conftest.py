import os
import sys

import hypothesis
import numpy as np
import pytest

np.seterr(all="warn", under="ignore")  # underflow to 0 is expected in tails

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def poly():
    from qsdlab.model_measure import polynomial_sigma

    return polynomial_sigma(1.5, 2.0)


@pytest.fixture(scope="session")
def dec400(poly):
    from qsdlab.spectral_solver import solve

    return solve(poly, 400)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
