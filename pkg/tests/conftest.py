import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


import time
from contextlib import contextmanager

import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Time a block, enforce its runtime budget and log a PASS/FAIL line."""

    @contextmanager
    def run(number: int, title: str, budget: float):
        start = time.perf_counter()
        status, detail = "PASS", ""
        try:
            yield
        except BaseException as exc:
            status, detail = "FAIL", f" ({type(exc).__name__})"
            raise
        finally:
            elapsed = time.perf_counter() - start
            if status == "PASS" and elapsed >= budget:
                status, detail = "FAIL", f" (over budget {budget:g}s)"
            line = f"criterion {number:>2} {status}  {elapsed:7.2f}s  {title}{detail}"
            ACCEPTANCE_LINES.append(line)
            print(line)
        assert elapsed < budget, f"criterion {number} took {elapsed:.2f}s, budget {budget}s"

    return run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
