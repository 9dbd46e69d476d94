import numpy as np
import pytest

import hjbkit as hk

DATA = __file__.rsplit("/", 1)[0] + "/data"

# one PASS/FAIL line per acceptance criterion, echoed in the final report
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def ou_model(controls=((0.0,), (0.5,), (1.0,)), reward="quadratic"):
    """Mean-reverting factor with a small control list.

    drift -y + delta, discount -1, reward 1 - delta^2 (or a bounded
    y-dependent alternative), terminal 0.  The no-action policy is optimal
    and the stationary value is exactly 1 for the quadratic reward.
    """
    controls = np.atleast_2d(np.asarray(controls, float))

    def drift(y, d):
        y = np.asarray(y, float)
        d = np.asarray(d, float)
        return -y + np.broadcast_to(d, y.shape)

    def discount(y, d):
        return np.full(np.asarray(y, float).shape[:-1], -1.0)

    if reward == "quadratic":
        def running(y, d):
            y = np.asarray(y, float)
            out = 1.0 - np.sum(np.asarray(d, float) ** 2, axis=-1)
            return np.broadcast_to(out, y.shape[:-1]).copy()
    else:  # bounded, y-dependent
        def running(y, d):
            y = np.asarray(y, float)
            return 1.0 / (1.0 + np.sum(y ** 2, axis=-1))

    def terminal(y):
        return np.zeros(np.asarray(y, float).shape[:-1])

    return hk.ControlModel(
        dim=1, drift=drift, discount_rate=discount, running_reward=running,
        terminal_reward=terminal, controls=controls, lip_L1=2.0, lip_L2=-1.0,
    )


def constant_model(f=1.0, h=-1.0, g=0.0):
    """Driftless single-control model with constant coefficients."""

    def drift(y, d):
        return np.zeros(np.asarray(y, float).shape)

    return hk.ControlModel(
        dim=1,
        drift=drift,
        discount_rate=lambda y, d: np.full(np.asarray(y, float).shape[:-1], h),
        running_reward=lambda y, d: np.full(np.asarray(y, float).shape[:-1], f),
        terminal_reward=lambda y: np.full(np.asarray(y, float).shape[:-1], g),
        controls=np.array([[0.0]]),
        lip_L1=1.0,
        lip_L2=1e-6,
    )


def zero_policy(k=1):
    return lambda y, t: np.zeros((np.asarray(y).shape[0], k))


@pytest.fixture
def merton_market():
    return hk.MarketModel(
        short_rate=0.02, excess_drift=0.04, volatility=0.2, correlation=0.5,
        risk_aversion=0.5, discount=0.1, position_cap=2.0,
        consumption_cap=1.0, factor_drift=0.0, lip_L1=0.01, lip_L2=0.01,
    )
