from __future__ import annotations

import os
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from viability.ledger import TradingStrategy

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# acceptance criteria report one line each; collected here so they are shown
# in the terminal summary even when output capture is on
CRITERIA_LINES = []


def record_criterion(label, passed, detail):
    line = f"CRITERION {label}: {'PASS' if passed else 'FAIL'} - {detail}"
    CRITERIA_LINES.append(line)
    print(line)
    return passed


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)


def random_strategy(tree, rng, exact=True, density=0.6, max_units=4):
    """Random buy/sell increments; rational quarters in exact mode."""
    up, down = [], []
    for _ in range(tree.n_nodes):
        a = b = 0
        if rng.random() < density:
            amount = int(rng.integers(1, max_units * 4 + 1))
            val = Fraction(amount, 4) if exact else amount / 4.0
            if rng.random() < 0.5:
                a = val
            else:
                b = val
        up.append(a)
        down.append(b)
    return TradingStrategy(tuple(up), tuple(down))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
