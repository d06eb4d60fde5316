import numpy as np
import pytest

_ACCEPTANCE = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    _ACCEPTANCE[number] = (passed, detail)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
