import time
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def rk4_oscillator(kappa, s, u0, v0, steps=4000):
    """Integrate u'' = -kappa u from 0 to s with classical RK4."""
    h = s / steps
    y = np.array([u0, v0], float)

    def rhs(y):
        return np.array([y[1], -kappa * y[0]])

    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y[0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance bookkeeping: one line per criterion at the end of the run
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    @contextmanager
    def run(number, title, limit=None):
        t0 = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            dt = time.perf_counter() - t0
            in_time = limit is None or dt < limit
            ACCEPTANCE[number] = (title, ok and in_time, dt, limit)
        assert in_time, f"criterion {number} took {dt:.1f}s, limit {limit}s"

    return run


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, dt, limit = ACCEPTANCE[number]
        budget = f" (limit {limit:g}s)" if limit else ""
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'} {title} [{dt:.2f}s{budget}]")
