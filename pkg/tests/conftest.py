import os

import pytest
from hypothesis import HealthCheck, settings

from dynephase import pom
from dynephase.trajectories import SdeConfig, simulate_ostensible

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SCHEMES = pom.SCHEMES

# Seed and grid shared by every Monte Carlo check, so they all see one sample.
MC_SEED = 20240917
MC_CONFIG = SdeConfig(steps=2000, v0=1e-6, seed=MC_SEED, trajectories=100_000)


@pytest.fixture(scope="session")
def h100():
    """All four H matrices at dimension 100."""
    return {s: pom.build_h(s, 100) for s in SCHEMES}


@pytest.fixture(scope="session")
def mc_samples():
    return simulate_ostensible(MC_CONFIG)


# -- acceptance report ---------------------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = _CRITERION_MARKERS.get(report.nodeid)
    if marker is not None:
        number, title = marker
        props = dict(report.user_properties)
        _CRITERIA[number] = (title, report.outcome, props.get("runtime"), props.get("budget"))


_CRITERION_MARKERS = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _CRITERION_MARKERS[item.nodeid] = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome, runtime, budget = _CRITERIA[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        timing = f"{runtime:9.4f} s / {budget:g} s" if runtime is not None else "not timed"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  [{timing}]  {title}")
