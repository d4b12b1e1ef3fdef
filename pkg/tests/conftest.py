import numpy as np
import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


def brute_force_autoconvolution(x: np.ndarray, case: str) -> np.ndarray:
    """Quadruple loop over cell pairs whose midpoints add up to a data node.

    Cells ``(i, j)`` and ``(i2, j2)`` (1-based) have midpoints summing to
    ``((i + i2 - 1) h, (j + j2 - 1) h)``, so the pair contributes
    ``h^2 x_ij x_i2j2`` to node ``(k, l) = (i + i2 - 1, j + j2 - 1)``.
    """
    n = x.shape[0]
    h = 1.0 / n
    m = n if case == "limited" else 2 * n
    y = np.zeros((m, m))
    for k in range(1, m + 1):
        for l in range(1, m + 1):
            s = 0.0
            for i in range(1, n + 1):
                for j in range(1, n + 1):
                    i2, j2 = k + 1 - i, l + 1 - j
                    if 1 <= i2 <= n and 1 <= j2 <= n:
                        s += x[i - 1, j - 1] * x[i2 - 1, j2 - 1]
            y[k - 1, l - 1] = h * h * s
    return y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_line():
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
