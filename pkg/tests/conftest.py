import sys
from pathlib import Path

import pytest

from sparsesense.dsar import DsarConfig
from sparsesense.simulate import SimulationConfig

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def small_cfg():
    return SimulationConfig(cycles=60, model=DsarConfig(p=2, window=24, refresh_interval=12))


ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str) -> None:
    """Log one acceptance line; printed in the terminal summary."""
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
