import numpy as np
import pytest

from esorl.dynamics import make_example1, make_example2


@pytest.fixture(scope="session")
def ex1():
    return make_example1()


@pytest.fixture(scope="session")
def ex2():
    return make_example2()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def log(label: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
