from fractions import Fraction as F

import numpy as np
import pytest

from causalvar.decomp import InfluenceMatrix
from causalvar.panel import LagSpec, TimeSeriesPanel
from causalvar.structure import CausalStructure
from causalvar.var import VarModel

NAMES6 = tuple(f"y{i}" for i in range(1, 7))

WORKED_OMEGA = [
    [F(1, 3), F(2, 3), 0, 0, 0, 0],
    [F(2, 3), F(1, 3), 0, 0, 0, 0],
    [0, 0, F(1, 4), F(3, 4), 0, 0],
    [0, 0, F(1, 5), F(4, 5), 0, 0],
    [F(1, 4), 0, F(1, 4), 0, F(1, 4), F(1, 4)],
    [0, F(1, 6), F(1, 6), F(1, 3), F(1, 6), F(1, 6)],
]


@pytest.fixture
def worked_omega():
    """Two closed classes {y1,y2}, {y3,y4} feeding the transient pair {y5,y6}."""
    return InfluenceMatrix(np.array([[float(x) for x in row] for row in WORKED_OMEGA]), NAMES6)


@pytest.fixture
def worked_structure():
    return CausalStructure(
        classes=(("y1", "y2"), ("y3", "y4")),
        transient=("y5", "y6"),
        edges=((("y1", "y2"), ("y5", "y6")), (("y3", "y4"), ("y5", "y6"))),
    )


def random_stable_model(rng, n, p, radius=0.9, lags=None):
    """Reduced-form VAR with random coefficients scaled to the given companion radius."""
    from causalvar.var import companion_matrix, spectral_radius

    lags = LagSpec.parse(lags or p)
    A = rng.normal(size=(lags.max_lag, n, n))
    mask = np.zeros(lags.max_lag, bool)
    mask[[lag - 1 for lag in lags]] = True
    A[~mask] = 0.0
    rho = spectral_radius(companion_matrix(A))
    A *= (radius / rho) ** (1.0 / lags.max_lag)
    while spectral_radius(companion_matrix(A)) >= radius + 1e-9:
        A *= 0.99
    L = rng.normal(size=(n, n))
    sigma = L @ L.T + n * np.eye(n) * 0.1
    names = tuple(f"y{i}" for i in range(1, n + 1))
    coefs = {lag: A[lag - 1] for lag in lags}
    return VarModel(names, lags, np.zeros(n), coefs, sigma)


def simulate(model, T, rng, burn=200):
    n = model.n
    A = model.coef_stack()
    p = A.shape[0]
    chol = np.linalg.cholesky(model.sigma)
    y = np.zeros((T + burn + p, n))
    for t in range(p, T + burn + p):
        acc = model.intercept + chol @ rng.standard_normal(n)
        for lag in range(1, p + 1):
            acc = acc + A[lag - 1] @ y[t - lag]
        y[t] = acc
    return TimeSeriesPanel(model.names, y[burn + p:].T)


ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """Record ``(passed, detail)`` for an acceptance criterion before asserting it."""

    def record(key, passed, detail=""):
        ACCEPTANCE[key] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {key}  {detail}")
