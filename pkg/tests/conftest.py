import math

import numpy as np
import pytest

from gatedsurrogate.oracle import Bounds


def matern_reference(a, b, nu, length_scale, signal_variance):
    """Scalar Matérn covariance written from the closed forms, loop by loop."""
    r = math.sqrt(sum((ai - bi) ** 2 for ai, bi in zip(a, b)))
    t = r / length_scale
    if nu == 0.5:
        m = math.exp(-t)
    elif nu == 1.5:
        m = (1 + math.sqrt(3) * t) * math.exp(-math.sqrt(3) * t)
    else:
        m = (1 + math.sqrt(5) * t + 5 * t * t / 3) * math.exp(-math.sqrt(5) * t)
    return signal_variance * m


def dense_posterior(x_train, y_train, x_query, p):
    """Posterior by explicit matrix inverse; shares no code with the solver path."""
    n = len(x_train)
    k = np.array([[matern_reference(a, b, p.nu, p.length_scale, p.signal_variance)
                   for b in x_train] for a in x_train]) + p.noise_variance * np.eye(n)
    k_inv = np.linalg.inv(k)
    ks = np.array([matern_reference(a, x_query, p.nu, p.length_scale, p.signal_variance)
                   for a in x_train])
    mean = ks @ k_inv @ y_train
    var = p.signal_variance - ks @ k_inv @ ks
    return mean, max(var, 0.0)


@pytest.fixture
def unit12():
    return Bounds.unit(12)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line; printed again in the terminal summary."""
    def record(name, ok, detail):
        line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
