import time
from contextlib import contextmanager

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CRITERIA_LINES = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[CRITERIA_LINES] = {}


@pytest.fixture
def criterion(request):
    """Context manager recording one PASS/FAIL line for a numbered acceptance criterion."""
    lines = request.config.stash[CRITERIA_LINES]

    @contextmanager
    def record(number: int, title: str):
        notes: dict = {}
        start = time.perf_counter()
        status = "FAIL"
        try:
            yield notes
            status = "PASS"
        finally:
            detail = ", ".join(f"{k}={v}" for k, v in notes.items())
            line = f"{status} criterion {number:2d}: {title} [{time.perf_counter() - start:.1f}s] {detail}".rstrip()
            lines[number] = line
            print(line)
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[CRITERIA_LINES]
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
