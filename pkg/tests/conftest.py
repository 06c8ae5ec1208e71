import os

import pytest
from hypothesis import HealthCheck, settings

from pilotwave import _accel

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=15, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(params=_accel.available_backends())
def each_backend(request):
    with _accel.backend(request.param):
        yield request.param


# -- acceptance report -------------------------------------------------------------

ACCEPT_SEED = 12345
ACCEPT_N = 10_000
SWEEP_T = (0.0, 0.5, 1.0, 2.0, 4.0)
LIMIT_T, LIMIT_T_FINAL = 40.0, 10.0

_criteria_lines = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion; returns ``ok``."""

    def record(number, title, ok, detail):
        mark = "PASS" if ok else "FAIL"
        _criteria_lines[number] = f"[{mark}] {number:>2}. {title}: {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria_lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_criteria_lines):
            terminalreporter.write_line(_criteria_lines[number])


@pytest.fixture(scope="session")
def delay_curve():
    """Wrong-fraction curve on the acceptance seed plus the independent-limit point."""
    from pilotwave.ensemble import run_retarded_ensemble, sweep_delay
    from pilotwave.retarded import RetardedConfig

    curve = dict(sweep_delay(SWEEP_T, ACCEPT_N, ACCEPT_SEED))
    limit = run_retarded_ensemble(ACCEPT_N, ACCEPT_SEED, RetardedConfig(T=LIMIT_T, t_final=LIMIT_T_FINAL))
    return curve, limit
