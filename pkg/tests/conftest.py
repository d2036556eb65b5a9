import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def direct_recursion(num, den, x):
    """Plain difference equation over a dense array; independent of the ring code."""
    x = np.asarray(x, dtype=float)
    y = np.zeros_like(x)
    for n in range(len(x)):
        acc = 0.0
        for lag, b in num:
            if n - lag >= 0:
                acc += b * x[n - lag]
        for lag, a in den:
            if lag and n - lag >= 0:
                acc -= a * y[n - lag]
        y[n] = acc
    return y


def impulse(n):
    x = np.zeros(n)
    x[0] = 1.0
    return x


@pytest.fixture
def acceptance():
    def record(number: int, title: str, ok: bool, detail: str = ""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
