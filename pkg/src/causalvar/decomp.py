"""Forecast-error variance decomposition into a row-stochastic influence matrix.

Row ``i`` of the influence matrix gives the shares of variable ``i``'s
forecast-error variance explained by each orthogonalized (Cholesky) shock,
either at a finite horizon or in the infinite-horizon limit. The limit is
computed from the stationary solution of ``X = A X A' + Q`` for the
companion matrix ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ContractError, DegenerateVarianceError, NumericalError, StationarityError
from .var import DEFAULT_STATIONARITY_TOL, CompanionForm, VarModel, check_stationary, companion

KRONECKER_MAX_DIM = 40


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular ``L`` with ``L L' = Sigma`` under the variable ``ordering``."""

    L: np.ndarray
    ordering: tuple[str, ...]


def cholesky_factor(sigma: np.ndarray, ordering=()) -> CholeskyFactor:
    """Cholesky factor of a positive-semidefinite matrix.

    Falls back to an outer-product elimination that turns numerically zero
    pivots into zero columns, so a shock with no variance contributes nothing.
    The variable order is never permuted: it carries the identifying
    assumption.
    """
    sigma = np.asarray(sigma, dtype=float)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        L = _semidefinite_cholesky(sigma)
    return CholeskyFactor(L, tuple(ordering))


def _semidefinite_cholesky(sigma: np.ndarray) -> np.ndarray:
    n = sigma.shape[0]
    S = sigma.copy()
    L = np.zeros_like(S)
    scale = max(float(np.max(np.abs(np.diag(sigma)))), 1.0)
    for j in range(n):
        d = S[j, j]
        if d <= 1e-14 * scale:
            if d < -1e-8 * scale:
                raise NumericalError(f"covariance matrix is not positive semidefinite (pivot {d:.3g})")
            continue
        L[j:, j] = S[j:, j] / np.sqrt(d)
        S[j:, j:] -= np.outer(L[j:, j], L[j:, j])
    return L


@dataclass(frozen=True)
class InfluenceMatrix:
    """Row-stochastic ``n x n`` matrix of variance shares.

    ``horizon`` is the forecast horizon, or ``None`` for the infinite-horizon
    limit. ``names`` is the variable order of rows and columns; the Cholesky
    ordering used to build it may differ and is kept in ``ordering``.
    """

    omega: np.ndarray
    names: tuple[str, ...]
    horizon: int | None = None
    ordering: tuple[str, ...] = ()
    residual: float | None = None

    def __post_init__(self) -> None:
        om = np.array(self.omega, dtype=float)
        om.flags.writeable = False
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "ordering", tuple(self.ordering) or tuple(self.names))

    @property
    def n(self) -> int:
        return len(self.names)

    def reordered(self, names) -> "InfluenceMatrix":
        idx = [self.names.index(x) for x in names]
        return InfluenceMatrix(self.omega[np.ix_(idx, idx)], tuple(names), self.horizon, self.ordering, self.residual)

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "ordering": list(self.ordering),
            "horizon": "limit" if self.horizon is None else self.horizon,
            "omega": self.omega.tolist(),
            "row_sums": self.omega.sum(axis=1).tolist(),
        }


def ma_coefficients(model: VarModel, horizon: int) -> list[np.ndarray]:
    """Reduced-form moving-average matrices ``Phi_0 .. Phi_{horizon-1}``.

    ``Phi_0 = I`` and ``Phi_s = sum_i A_i Phi_{s-i}`` with zero matrices for
    negative indices.
    """
    if horizon < 1:
        raise ContractError("horizon must be at least 1")
    A = model.coef_stack(reduced=True)
    p, n, _ = A.shape
    phi = [np.eye(n)]
    for s in range(1, horizon):
        acc = np.zeros((n, n))
        for i in range(1, min(s, p) + 1):
            acc += A[i - 1] @ phi[s - i]
        phi.append(acc)
    return phi


def shock_loadings(model: VarModel) -> np.ndarray:
    """Columns are the state loadings ``(I - A0)^{-1} L_j`` of each orthogonalized shock."""
    L = cholesky_factor(model.sigma, model.names).L
    return model.impact() @ L


def _normalize(contrib: np.ndarray, names, what: str) -> np.ndarray:
    total = contrib.sum(axis=1)
    zero = np.flatnonzero(~(total > 0))
    if zero.size:
        raise DegenerateVarianceError(
            f"variable {names[zero[0]]!r} has zero {what} variance", variable=names[zero[0]]
        )
    om = np.clip(contrib, 0.0, None) / total[:, None]
    return om


def fevd(model: VarModel, horizon: int) -> InfluenceMatrix:
    """Finite-horizon forecast-error variance shares.

    ``omega[i, j] = sum_{s<h} (e_i' Phi_s G_j)^2 / sum_{s<h} sum_z (e_i' Phi_s G_z)^2``
    with shock loadings ``G = (I - A0)^{-1} L``.
    """
    if horizon < 1:
        raise ContractError("horizon must be at least 1")
    G = shock_loadings(model)
    A = model.coef_stack(reduced=True)
    contrib = np.zeros_like(G)
    for resp in _responses(A, G, horizon):
        contrib += resp**2
    return InfluenceMatrix(_normalize(contrib, model.names, f"{horizon}-step forecast"), model.names, horizon)


def _responses(A: np.ndarray, G: np.ndarray, horizon: int):
    """Yield ``Phi_s G`` for ``s < horizon``, keeping only the last ``p`` terms."""
    p = A.shape[0]
    hist = [G]
    yield G
    for s in range(1, horizon):
        acc = np.zeros_like(G)
        for i in range(1, min(s, p) + 1):
            acc += A[i - 1] @ hist[-i]
        hist.append(acc)
        if len(hist) > p:
            hist.pop(0)
        yield acc


def solve_lyapunov(A: np.ndarray, Q: np.ndarray, method: str = "auto", tol: float = 1e-12) -> np.ndarray:
    """Solve ``X = A X A' + Q`` for one or a stack of right-hand sides.

    ``Q`` may be ``(m, m)`` or ``(k, m, m)``. ``method="kron"`` solves the
    vectorized system ``(I - A kron A) vec X = vec Q`` with a single LU
    factorization shared by every right-hand side; ``method="doubling"``
    iterates ``X <- X + A_k X A_k'``, ``A_{k+1} = A_k^2``. ``"auto"`` picks the
    Kronecker solve up to dimension 40.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    single = Q.ndim == 2
    Qs = Q[None] if single else Q
    m = A.shape[0]
    if method == "auto":
        method = "kron" if m <= KRONECKER_MAX_DIM else "doubling"
    if method == "kron":
        M = -(A[:, None, :, None] * A[None, :, None, :]).reshape(m * m, m * m)
        M[np.diag_indices(m * m)] += 1.0
        try:
            lu = linalg.lu_factor(M, check_finite=False)
        except (linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"Lyapunov operator factorization failed: {exc}") from None
        rhs = Qs.reshape(len(Qs), m * m).T
        X = linalg.lu_solve(lu, rhs, check_finite=False).T.reshape(len(Qs), m, m)
    elif method == "doubling":
        X = Qs.copy()
        Ak = A.copy()
        for _ in range(200):
            update = Ak @ X @ Ak.T
            X = X + update
            Ak = Ak @ Ak
            if np.max(np.abs(update)) <= tol * max(np.max(np.abs(X)), 1e-300):
                break
        else:
            raise NumericalError("Lyapunov doubling iteration did not converge")
    else:
        raise ContractError(f"unknown Lyapunov method {method!r}")
    X = (X + np.transpose(X, (0, 2, 1))) / 2
    resid = X - A @ X @ A.T - Qs
    scale = max(float(np.max(np.abs(X))), 1.0)
    rnorm = float(np.max(np.abs(resid))) / scale
    if not np.all(np.isfinite(X)) or rnorm > 1e-8:
        raise NumericalError(f"Lyapunov solve inaccurate (relative residual {rnorm:.3g})", residual=rnorm)
    return X[0] if single else X


def _limit_shares(model: VarModel, method: str = "auto") -> InfluenceMatrix:
    comp = companion(model)
    check = check_stationary(comp, DEFAULT_STATIONARITY_TOL)
    if not check.stationary:
        raise StationarityError(
            f"companion spectral radius {check.radius:.6g} is not below 1; the limit decomposition does not exist",
            radius=check.radius,
        )
    n = comp.n
    G = shock_loadings(model)
    m = comp.dim
    # stack the n per-shock right-hand sides and the total J' Sigma_u J
    Q = np.zeros((n + 1, m, m))
    for j in range(n):
        Q[j, :n, :n] = np.outer(G[:, j], G[:, j])
    Q[n, :n, :n] = G @ G.T
    X = solve_lyapunov(comp.A, Q, method=method)
    per_shock = np.stack([np.diag(X[j])[:n] for j in range(n)], axis=1)  # (i, j)
    total = np.diag(X[n])[:n]
    zero = np.flatnonzero(~(total > 0))
    if zero.size:
        raise DegenerateVarianceError(
            f"variable {model.names[zero[0]]!r} has zero limit variance", variable=model.names[zero[0]]
        )
    om = np.clip(per_shock, 0.0, None) / total[:, None]
    residual = float(np.max(np.abs(om.sum(axis=1) - 1.0)))
    if residual > 1e-8:
        raise NumericalError(f"limit shares do not sum to one (max deviation {residual:.3g})", residual=residual)
    om = om / om.sum(axis=1, keepdims=True)
    return InfluenceMatrix(om, model.names, None, model.names, residual)


def limit_fevd(model: VarModel, method: str = "auto") -> InfluenceMatrix:
    """Infinite-horizon variance shares of a stationary VAR.

    Raises
    ------
    StationarityError
        The companion spectral radius is not below ``1 - 1e-6``.
    NumericalError
        The Lyapunov solve failed; the message carries the residual norm.
    """
    return _limit_shares(model, method)


def limit_fevd_svar(model: VarModel, method: str = "auto") -> InfluenceMatrix:
    """Limit shares of a structural VAR through its reduced form.

    The companion uses ``(I - A0)^{-1} A_i`` and shock ``j`` loads through
    ``(I - A0)^{-1} L_j``, where ``L`` factors the structural residual
    covariance.
    """
    if model.instantaneous is None:
        raise ContractError("limit_fevd_svar needs a model with an instantaneous matrix A0")
    return _limit_shares(model, method)


def influence(model: VarModel, horizon: int | None = None) -> InfluenceMatrix:
    """``fevd`` at ``horizon`` or ``limit_fevd`` when ``horizon`` is None."""
    return limit_fevd(model) if horizon is None else fevd(model, horizon)
