import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from zerodelay import StateSpaceModel, validate_model

from .frozen import A_EX

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA = {}


@pytest.fixture(scope="session")
def example_model():
    return validate_model(StateSpaceModel(A_EX, np.eye(2)))


@pytest.fixture
def measure(request):
    """Record the measured values of an acceptance criterion for the summary."""
    marker = request.node.get_closest_marker("criterion")
    number = marker.args[0] if marker else request.node.name
    entry = _CRITERIA.setdefault(number, {"detail": [], "outcome": None})

    def record(text):
        entry["detail"].append(text)
        print(f"[criterion {number}] {text}")

    return record


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    entry = _CRITERIA.setdefault(marker.args[0], {"detail": [], "outcome": None})
    entry["outcome"] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA, key=lambda k: (not isinstance(k, int), k)):
        entry = _CRITERIA[number]
        status = entry["outcome"] or "NOT RUN"
        detail = "; ".join(entry["detail"])
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
