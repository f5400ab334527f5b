import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_discrete_lyapunov

from causalvar.decomp import (
    cholesky_factor,
    fevd,
    influence,
    limit_fevd,
    limit_fevd_svar,
    ma_coefficients,
    solve_lyapunov,
)
from causalvar.errors import ContractError
from causalvar.panel import LagSpec
from causalvar.var import RestrictionPattern, VarModel, companion, fit_var

from conftest import random_stable_model, simulate


def test_scalar_limit_variance():
    m = VarModel(("a",), LagSpec((1,)), np.zeros(1), {1: np.array([[0.5]])}, np.eye(1))
    A = companion(m).A
    X = solve_lyapunov(A, np.eye(1))
    assert X[0, 0] == pytest.approx(4 / 3, abs=1e-14)
    np.testing.assert_array_equal(limit_fevd(m).omega, [[1.0]])


def test_kron_and_doubling_agree_with_scipy():
    rng = np.random.default_rng(0)
    for _ in range(10):
        m = random_stable_model(rng, 3, 2, radius=0.95)
        A = companion(m).A
        Q = np.zeros_like(A)
        Q[:3, :3] = m.sigma
        ref = solve_discrete_lyapunov(A, Q)
        for method in ("kron", "doubling"):
            np.testing.assert_allclose(solve_lyapunov(A, Q, method=method), ref, atol=1e-9 * np.abs(ref).max())


def test_lyapunov_unknown_method():
    with pytest.raises(ContractError):
        solve_lyapunov(np.zeros((1, 1)), np.eye(1), method="bogus")


def test_ma_coefficients_recursion():
    m = VarModel(("a",), LagSpec((1, 2)), np.zeros(1), {1: np.array([[0.5]]), 2: np.array([[0.25]])}, np.eye(1))
    phi = [float(p[0, 0]) for p in ma_coefficients(m, 4)]
    assert phi == [1.0, 0.5, 0.5, 0.375]


def test_fevd_horizon_one_is_impact_shares():
    sigma = np.array([[1.0, 0.5], [0.5, 2.0]])
    m = VarModel(("a", "b"), LagSpec((1,)), np.zeros(2), {1: np.zeros((2, 2))}, sigma)
    om = fevd(m, 1).omega
    L = np.linalg.cholesky(sigma)
    np.testing.assert_allclose(om, L**2 / (L**2).sum(axis=1, keepdims=True), atol=1e-15)


def test_rows_sum_to_one_and_horizon_validation():
    rng = np.random.default_rng(1)
    m = random_stable_model(rng, 4, 2)
    for h in (1, 5, 50):
        np.testing.assert_allclose(fevd(m, h).omega.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ContractError):
        fevd(m, 0)
    assert influence(m).horizon is None and influence(m, 3).horizon == 3


def test_limit_matches_long_horizon():
    rng = np.random.default_rng(2)
    for _ in range(10):
        m = random_stable_model(rng, 3, 2, radius=0.9)
        np.testing.assert_allclose(limit_fevd(m).omega, fevd(m, 2000).omega, atol=1e-9)


def test_semidefinite_sigma_gives_zero_column():
    sigma = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
    L = cholesky_factor(sigma).L
    np.testing.assert_allclose(L @ L.T, sigma, atol=1e-14)
    assert np.all(L[:, 1] == 0.0)


def test_lower_block_pattern_keeps_exogenous_block_closed():
    rng = np.random.default_rng(3)
    n = 4
    A = rng.uniform(-0.4, 0.4, size=(2, n, n))
    A[:, :2, 2:] = 0.0
    m = VarModel(tuple(f"y{i}" for i in range(1, 5)), LagSpec((1, 2)), np.zeros(n), {1: A[0], 2: A[1]}, np.eye(n))
    panel = simulate(m, 400, rng)
    pattern = RestrictionPattern.lower_block_triangular(panel.names, ["y1", "y2"])
    om = limit_fevd(fit_var(panel, 2, pattern)).omega
    # the exogenous variables ordered first never load on endogenous shocks
    assert np.max(np.abs(om[:2, 2:])) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_affine_rescaling_leaves_shares_unchanged(seed):
    rng = np.random.default_rng(seed)
    m = random_stable_model(rng, 3, 1, radius=0.8)
    panel = simulate(m, 150, rng)
    scale = rng.uniform(0.1, 10, size=3) * rng.choice([-1, 1], size=3)
    shift = rng.normal(size=3) * 100
    other = panel.with_values(panel.values * scale[:, None] + shift[:, None])
    a = limit_fevd(fit_var(panel, 1)).omega
    b = limit_fevd(fit_var(other, 1)).omega
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_svar_limit_uses_reduced_form():
    rng = np.random.default_rng(4)
    m = random_stable_model(rng, 2, 1)
    panel = simulate(m, 500, rng)
    pattern = RestrictionPattern.instantaneous(panel.names, [("y2", "y1")])
    svar = fit_var(panel, 1, pattern)
    om = limit_fevd_svar(svar).omega
    np.testing.assert_allclose(om.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ContractError):
        limit_fevd_svar(fit_var(panel, 1))
