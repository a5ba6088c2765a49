import numpy as np
import pytest

from wearguard.ingest import StreamConfig


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, passed, detail)``."""

    def record(number, passed, detail=""):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        label = f"criterion {number:>2}" if isinstance(number, int) else number
        request.config._acceptance_lines.append(f"{label}: {status}  {detail}")

    return record


@pytest.fixture
def small_stream():
    # 100 Hz working rate, 10-sample windows: long runs stay short in samples
    return StreamConfig(working_rate=100, window_len=10, feature_rate=10, batch_len=10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
