"""Shared fixtures and the acceptance summary printer."""

from __future__ import annotations

import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


def report(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def short_cfg():
    """A small, fast run configuration for integration tests."""
    from jitsim import SimConfig

    def make(**kw):
        base = dict(sim_time_s=10.0, drain_s=5.0)
        base.update(kw)
        return SimConfig(**base)

    return make
