"""Shared Monte Carlo cache and the acceptance summary printed after the run."""

from __future__ import annotations

import time

import pytest

from glslasso.montecarlo import McSettings, run_cell

_LINES: list[str] = []


class CellCache:
    """Runs each (config, reps, settings) cell once per session and remembers its runtime."""

    def __init__(self):
        self._store = {}

    def get(self, config, reps, settings=McSettings()):
        key = (config, reps, settings)
        if key not in self._store:
            t0 = time.perf_counter()
            results = run_cell(config, reps, settings)
            self._store[key] = (results, time.perf_counter() - t0)
        return self._store[key]


@pytest.fixture(scope="session")
def mc_cells():
    return CellCache()


@pytest.fixture
def criterion():
    """Record one pass/fail line; the caller asserts afterwards."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":").rstrip("abcdefgh"))):
            terminalreporter.write_line(line)
