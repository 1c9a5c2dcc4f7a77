import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import time

import pytest

_ACCEPTANCE_LINES: list[str] = []


class _Criterion:
    def __init__(self):
        self.start = time.perf_counter()

    def report(self, number: int, ok: bool, limit: float, detail: str = "") -> bool:
        elapsed = time.perf_counter() - self.start
        ok = ok and elapsed <= limit
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'} [{elapsed:6.1f}s / {limit:g}s] {detail}".rstrip()
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok


@pytest.fixture
def criterion():
    return _Criterion()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
