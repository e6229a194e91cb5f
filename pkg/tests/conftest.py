import numpy as np
import pytest


def naive_dft(v):
    """Direct O(n^2) summation of the unitary DFT."""
    v = np.asarray(v, dtype=np.complex128)
    n = v.size
    j = np.arange(n)
    F = np.exp(-2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)
    return F @ v


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> None:
    """Store one acceptance verdict; printed in the terminal summary."""
    ACCEPTANCE[number] = (title, bool(passed), detail)
    print(f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
