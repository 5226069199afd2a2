import numpy as np
import pytest
from scipy.optimize import bisect

from nonstat_glb.design import DiscountedState


def bisect_root(f, lo=-50.0, hi=50.0):
    return bisect(f, lo, hi, xtol=1e-12, maxiter=500)


def random_state(rng, d, n, gamma=None, lam=None, L=1.0, binary=True):
    gamma = rng.uniform(0.8, 0.999) if gamma is None else gamma
    lam = rng.uniform(0.2, 2.0) if lam is None else lam
    st = DiscountedState(d, lam, gamma)
    for _ in range(n):
        x = rng.standard_normal(d)
        x *= L * rng.uniform(0.1, 1.0) / np.linalg.norm(x)
        r = float(rng.integers(2)) if binary else rng.uniform()
        st.update(x, r)
    return st


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def _verdict(criterion: int, ok: bool, detail: str):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _verdict


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
