import numpy as np
import pytest
from hypothesis import settings

from ldf.panel import ForecastPanel

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")

# lines collected by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


def random_gaussian_panel(rng, T, K, spread=1.0):
    """Gaussian panel with model-specific biases and variances; outcomes from a noisy level."""
    y = rng.normal(size=T)
    means = y[:, None] * rng.uniform(0.5, 1.5, size=K) + rng.normal(0, spread, size=(T, K))
    variances = rng.uniform(0.2, 2.0, size=(T, K))
    return ForecastPanel.gaussian(means, variances, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_panel(rng):
    return random_gaussian_panel(rng, 60, 5)
