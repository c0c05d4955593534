import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(Path(__file__).resolve().parent))

BENCHMARKS = ROOT / "benchmarks"
TEST_BENCHMARKS = Path(__file__).resolve().parent / "benchmarks"

# acceptance verdicts, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def matvec():
    from stagg.benchmark import load_benchmark

    return load_benchmark(BENCHMARKS / "matvec")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
