import numpy as np
import pytest

from particle_oed.core import Ensemble
from particle_oed.models.linear import LinearModel


def scalar_model(truth=1.0, lower=-3.0, upper=3.0, noise=0.0):
    """M(theta; sigma) = theta * sigma."""
    return LinearModel(1, [truth], lower, upper, noise,
                       row_fn=lambda t: t[:, None], row_deriv=lambda t: np.ones((len(t), 1)))


def ensemble_1d(points, noise=None, channels=None):
    points = np.asarray(points, dtype=float)
    n = len(points)
    return Ensemble(points[:, None], np.zeros(n, int) if channels is None else channels,
                    np.zeros(n) if noise is None else noise)


def central_diff(f, x, h):
    """Central-difference gradient of scalar ``f`` at array ``x`` (any shape)."""
    x = np.array(x, dtype=float)
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        out[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


@pytest.fixture
def scalar():
    return scalar_model


ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
