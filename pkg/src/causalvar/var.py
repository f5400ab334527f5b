"""Least-squares VAR / SVAR estimation and the companion (VAR(1)) form.

Models are fit equation by equation. A :class:`RestrictionPattern` removes
regressors from individual equations, so restricted coefficients are zero by
construction. Exogenous series enter every equation at the configured lags but
get no equation of their own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ContractError,
    DegreesOfFreedomError,
    EstimationError,
    StructuralSingularityError,
)
from .panel import LagSpec, TimeSeriesPanel

DEFAULT_STATIONARITY_TOL = 1e-6


def _bool_square(mask, n: int, what: str) -> np.ndarray:
    m = np.array(mask, dtype=bool)
    if m.shape != (n, n):
        raise ContractError(f"{what} must be {n}x{n}, got {m.shape}")
    m.flags.writeable = False
    return m


@dataclass(frozen=True)
class RestrictionPattern:
    """Which lag coefficients are free (``True``) and which are forced to zero.

    ``masks`` maps a lag to an ``n x n`` boolean matrix (row = equation,
    column = regressor); ``common`` applies to every lag without its own
    entry. ``instantaneous_mask`` marks the free entries of ``A0`` and must
    have a zero diagonal.
    """

    names: tuple[str, ...]
    common: np.ndarray | None = None
    masks: Mapping[int, np.ndarray] = field(default_factory=dict)
    instantaneous_mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        names = tuple(self.names)
        n = len(names)
        object.__setattr__(self, "names", names)
        if self.common is not None:
            object.__setattr__(self, "common", _bool_square(self.common, n, "mask"))
        object.__setattr__(
            self, "masks", {int(k): _bool_square(v, n, f"mask for lag {k}") for k, v in dict(self.masks).items()}
        )
        if self.instantaneous_mask is not None:
            inst = _bool_square(self.instantaneous_mask, n, "instantaneous mask")
            if inst.diagonal().any():
                raise ContractError("instantaneous mask must have a zero diagonal (no self-loops)")
            object.__setattr__(self, "instantaneous_mask", inst)

    def mask_for(self, lag: int) -> np.ndarray:
        if lag in self.masks:
            return self.masks[lag]
        if self.common is not None:
            return self.common
        return np.ones((len(self.names), len(self.names)), dtype=bool)

    def reordered(self, names: Sequence[str]) -> "RestrictionPattern":
        idx = [self.names.index(x) for x in names]
        ix = np.ix_(idx, idx)
        return RestrictionPattern(
            tuple(names),
            None if self.common is None else self.common[ix],
            {k: v[ix] for k, v in self.masks.items()},
            None if self.instantaneous_mask is None else self.instantaneous_mask[ix],
        )

    @classmethod
    def lower_block_triangular(cls, names: Sequence[str], exogenous: Iterable[str]) -> "RestrictionPattern":
        """Endogenous variables get no coefficient in exogenous equations."""
        names = tuple(names)
        exo = set(exogenous)
        unknown = exo - set(names)
        if unknown:
            raise ContractError(f"unknown variables {sorted(unknown)}")
        mask = np.ones((len(names), len(names)), dtype=bool)
        for i, a in enumerate(names):
            for j, b in enumerate(names):
                if a in exo and b not in exo:
                    mask[i, j] = False
        return cls(names, mask)

    @classmethod
    def block_diagonal(cls, names: Sequence[str], classes: Sequence[Iterable[str]]) -> "RestrictionPattern":
        """Coefficients between different classes are zero."""
        names = tuple(names)
        label = _class_labels(names, classes)
        mask = np.array([[label[a] == label[b] for b in names] for a in names], dtype=bool)
        return cls(names, mask)

    @classmethod
    def transient_pattern(
        cls, names: Sequence[str], classes: Sequence[Iterable[str]], transient: Iterable[str]
    ) -> "RestrictionPattern":
        """Block-diagonal over the classes, with unrestricted rows for transient variables."""
        names = tuple(names)
        transient = set(transient)
        label = _class_labels([x for x in names if x not in transient], classes)
        mask = np.array(
            [[a in transient or (b not in transient and label[a] == label[b]) for b in names] for a in names],
            dtype=bool,
        )
        return cls(names, mask)

    @classmethod
    def instantaneous(
        cls, names: Sequence[str], links: Iterable[tuple[str, str]], base: "RestrictionPattern | None" = None
    ) -> "RestrictionPattern":
        """Pattern whose ``A0`` is free at each ``(effect, cause)`` link."""
        names = tuple(names)
        inst = np.zeros((len(names), len(names)), dtype=bool)
        for effect, cause in links:
            if effect not in names or cause not in names:
                raise ContractError(f"unknown variable in instantaneous link {(effect, cause)}")
            inst[names.index(effect), names.index(cause)] = True
        if base is None:
            return cls(names, instantaneous_mask=inst)
        base = base.reordered(names)
        return cls(names, base.common, base.masks, inst)

    def to_dict(self) -> dict:
        out: dict = {"names": list(self.names)}
        if self.common is not None:
            out["mask"] = self.common.astype(int).tolist()
        if self.masks:
            out["lag_masks"] = {str(k): v.astype(int).tolist() for k, v in sorted(self.masks.items())}
        if self.instantaneous_mask is not None:
            out["instantaneous_mask"] = self.instantaneous_mask.astype(int).tolist()
        return out


def _class_labels(names: Sequence[str], classes: Sequence[Iterable[str]]) -> dict[str, int]:
    label: dict[str, int] = {}
    for s, members in enumerate(classes):
        for x in members:
            if x in label:
                raise ContractError(f"variable {x!r} appears in more than one class")
            label[x] = s
    missing = [x for x in names if x not in label]
    if missing:
        raise ContractError(f"variables not assigned to any class: {missing}")
    return label


@dataclass(frozen=True)
class VarModel:
    """A fitted VAR (or SVAR when ``instantaneous`` is set).

    ``coefs`` maps each lag in ``lag_spec`` to its ``n x n`` matrix. ``sigma``
    is the residual covariance with a per-equation degrees-of-freedom
    correction, ``sigma_ij = u_i.u_j / sqrt(dof_i dof_j)``.
    """

    names: tuple[str, ...]
    lag_spec: LagSpec
    intercept: np.ndarray
    coefs: Mapping[int, np.ndarray]
    sigma: np.ndarray
    residuals: np.ndarray | None = None
    instantaneous: np.ndarray | None = None
    exog_names: tuple[str, ...] = ()
    exog_coefs: Mapping[int, np.ndarray] = field(default_factory=dict)
    pattern: RestrictionPattern | None = None
    dof: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def p(self) -> int:
        return self.lag_spec.max_lag

    def impact(self) -> np.ndarray:
        """``(I - A0)^{-1}``, or the identity for a reduced-form model."""
        n = self.n
        if self.instantaneous is None:
            return np.eye(n)
        M = np.eye(n) - self.instantaneous
        if np.linalg.cond(M) > 1e12:
            raise StructuralSingularityError("I - A0 is singular")
        return np.linalg.inv(M)

    def coef_stack(self, reduced: bool = True) -> np.ndarray:
        """Lag matrices ``A_1..A_p`` as a ``(p, n, n)`` array, gaps zero-filled.

        With ``reduced=True`` an SVAR is premultiplied by ``(I - A0)^{-1}``.
        """
        n, p = self.n, self.p
        out = np.zeros((p, n, n))
        for lag, a in self.coefs.items():
            out[lag - 1] = a
        if reduced and self.instantaneous is not None:
            out = np.einsum("ij,ljk->lik", self.impact(), out)
        return out

    def reordered(self, names: Sequence[str]) -> "VarModel":
        idx = [self.names.index(x) for x in names]
        ix = np.ix_(idx, idx)
        return VarModel(
            tuple(names),
            self.lag_spec,
            self.intercept[idx],
            {k: v[ix] for k, v in self.coefs.items()},
            self.sigma[ix],
            None if self.residuals is None else self.residuals[idx],
            None if self.instantaneous is None else self.instantaneous[ix],
            self.exog_names,
            {k: v[idx] for k, v in self.exog_coefs.items()},
            None if self.pattern is None else self.pattern.reordered(names),
            None if self.dof is None else self.dof[idx],
        )

    def to_dict(self) -> dict:
        comp = companion(self)
        out = {
            "names": list(self.names),
            "lags": list(self.lag_spec.lags),
            "intercept": self.intercept.tolist(),
            "coefficients": {str(k): v.tolist() for k, v in sorted(self.coefs.items())},
            "sigma": self.sigma.tolist(),
            "spectral_radius": comp.spectral_radius,
        }
        if self.instantaneous is not None:
            out["instantaneous"] = self.instantaneous.tolist()
        if self.exog_names:
            out["exogenous"] = list(self.exog_names)
            out["exogenous_coefficients"] = {str(k): v.tolist() for k, v in sorted(self.exog_coefs.items())}
        if self.pattern is not None:
            out["pattern"] = self.pattern.to_dict()
        return out


def fit_var(
    panel: TimeSeriesPanel,
    lags: LagSpec | str | int | Sequence[int],
    pattern: RestrictionPattern | None = None,
    exogenous: TimeSeriesPanel | None = None,
) -> VarModel:
    """Fit a VAR by equation-wise OLS.

    Raises
    ------
    DegreesOfFreedomError
        Some equation has no residual degrees of freedom left.
    EstimationError
        The design matrix of some equation is rank deficient.
    """
    lags = LagSpec.parse(lags)
    names = panel.names
    Y = panel.values
    n, T = Y.shape
    p = lags.max_lag
    Tp = T - p
    if pattern is not None and tuple(pattern.names) != names:
        if set(pattern.names) != set(names):
            raise ContractError("restriction pattern names do not match the panel")
        pattern = pattern.reordered(names)
    if exogenous is not None:
        if exogenous.T != T:
            raise ContractError("exogenous panel must have the same length as the endogenous panel")
        if set(exogenous.names) & set(names):
            raise ContractError("a series cannot be both endogenous and exogenous")
        X = exogenous.values
        k = X.shape[0]
    else:
        X = np.zeros((0, T))
        k = 0
    if Tp < 1:
        raise DegreesOfFreedomError(f"sample of {T} observations is shorter than the maximum lag {p}")

    blocks = [np.ones((1, Tp))]
    blocks += [Y[:, p - lag : T - lag] for lag in lags]
    blocks += [X[:, p - lag : T - lag] for lag in lags]
    Z = np.vstack(blocks).T  # Tp x K
    target = Y[:, p:].T  # Tp x n
    K = Z.shape[1]
    nl = len(lags)
    inst = pattern.instantaneous_mask if pattern is not None else None
    restricted = pattern is not None and (
        (pattern.common is not None and not pattern.common.all())
        or any(not m.all() for m in pattern.masks.values())
    )

    intercept = np.zeros(n)
    coefs = {lag: np.zeros((n, n)) for lag in lags}
    exog_coefs = {lag: np.zeros((n, k)) for lag in lags} if k else {}
    A0 = np.zeros((n, n)) if inst is not None else None
    resid = np.empty((n, Tp))
    dof = np.empty(n)

    if not restricted and inst is None:
        if Tp - K < 1:
            raise DegreesOfFreedomError(f"{Tp} usable observations cannot support {K} regressors per equation")
        beta, _, rank, _ = np.linalg.lstsq(Z, target, rcond=None)
        if rank < K:
            raise EstimationError(f"design matrix is rank deficient ({rank} < {K})")
        resid[:] = (target - Z @ beta).T
        dof[:] = Tp - K
        intercept[:] = beta[0]
        for a, lag in enumerate(lags):
            coefs[lag][:] = beta[1 + a * n : 1 + (a + 1) * n].T
            if k:
                exog_coefs[lag][:] = beta[1 + nl * n + a * k : 1 + nl * n + (a + 1) * k].T
    else:
        for i in range(n):
            cols = [0]
            for a, lag in enumerate(lags):
                free = pattern.mask_for(lag)[i] if pattern is not None else np.ones(n, bool)
                cols += [1 + a * n + j for j in range(n) if free[j]]
            cols += list(range(1 + nl * n, K))
            Zi = Z[:, cols]
            inst_cols = np.flatnonzero(inst[i]) if inst is not None else np.array([], int)
            if inst_cols.size:
                Zi = np.hstack([Zi, target[:, inst_cols]])
            Ki = Zi.shape[1]
            if Tp - Ki < 1:
                raise DegreesOfFreedomError(
                    f"equation {names[i]!r}: {Tp} usable observations cannot support {Ki} regressors"
                )
            b, _, rank, _ = np.linalg.lstsq(Zi, target[:, i], rcond=None)
            if rank < Ki:
                raise EstimationError(f"equation {names[i]!r}: design matrix is rank deficient ({rank} < {Ki})")
            resid[i] = target[:, i] - Zi @ b
            dof[i] = Tp - Ki
            full = np.zeros(K)
            full[cols] = b[: len(cols)]
            intercept[i] = full[0]
            for a, lag in enumerate(lags):
                coefs[lag][i] = full[1 + a * n : 1 + (a + 1) * n]
                if k:
                    exog_coefs[lag][i] = full[1 + nl * n + a * k : 1 + nl * n + (a + 1) * k]
            if inst_cols.size:
                A0[i, inst_cols] = b[len(cols) :]

    scale = np.sqrt(np.outer(dof, dof))
    sigma = resid @ resid.T / scale
    sigma = (sigma + sigma.T) / 2
    return VarModel(
        names,
        lags,
        intercept,
        coefs,
        sigma,
        resid,
        A0,
        exogenous.names if exogenous is not None else (),
        exog_coefs,
        pattern,
        dof,
    )


@dataclass(frozen=True)
class CompanionForm:
    """Block companion matrix ``A`` (``np x np``) with selector ``J = [I_n 0 ... 0]``.

    ``impact`` is ``(I - A0)^{-1}`` for structural models (identity otherwise);
    orthogonalized shocks load on the state through ``J' impact L``.
    """

    A: np.ndarray
    J: np.ndarray
    n: int
    p: int
    spectral_radius: float
    impact: np.ndarray

    @property
    def dim(self) -> int:
        return self.n * self.p


def companion_matrix(coef_stack: np.ndarray) -> np.ndarray:
    p, n, _ = coef_stack.shape
    A = np.zeros((n * p, n * p))
    A[:n] = np.hstack(list(coef_stack))
    if p > 1:
        A[n:, : n * (p - 1)] = np.eye(n * (p - 1))
    return A


def spectral_radius(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def companion(model: VarModel) -> CompanionForm:
    """Stack ``model`` into VAR(1) form; SVARs are converted to reduced form first."""
    impact = model.impact()
    A = companion_matrix(model.coef_stack(reduced=True))
    n, p = model.n, model.p
    J = np.zeros((n, n * p))
    J[:, :n] = np.eye(n)
    return CompanionForm(A, J, n, p, spectral_radius(A), impact)


@dataclass(frozen=True)
class StationarityCheck:
    stationary: bool
    radius: float
    impact_norm: float | None = None
    impact_norm_ok: bool | None = None

    def __bool__(self) -> bool:
        return self.stationary


def check_stationary(comp: CompanionForm, tolerance: float = DEFAULT_STATIONARITY_TOL) -> StationarityCheck:
    """True iff the companion spectral radius is below ``1 - tolerance``.

    For structural models the operator 2-norm of ``(I - A0)^{-1}`` is also
    reported together with whether it is at most one. Never raises.
    """
    radius = comp.spectral_radius
    ok = bool(radius < 1.0 - tolerance)
    if np.array_equal(comp.impact, np.eye(comp.n)):
        return StationarityCheck(ok, radius)
    norm = float(np.linalg.norm(comp.impact, 2))
    return StationarityCheck(ok, radius, norm, bool(norm <= 1.0 + 1e-12))


def select_lag_bic(panel: TimeSeriesPanel, max_lag: int) -> int:
    """Lag length in ``1..max_lag`` minimising BIC on a common estimation sample."""
    if max_lag < 1:
        raise ContractError("max_lag must be at least 1")
    n, T = panel.values.shape
    best, best_p = np.inf, 1
    for p in range(1, max_lag + 1):
        trimmed = TimeSeriesPanel(panel.names, panel.values[:, max_lag - p :])
        try:
            model = fit_var(trimmed, p)
        except (DegreesOfFreedomError, EstimationError):
            break
        Tp = model.residuals.shape[1]
        sigma_ml = model.residuals @ model.residuals.T / Tp
        sign, logdet = np.linalg.slogdet(sigma_ml)
        if sign <= 0:
            continue
        bic = logdet + np.log(Tp) / Tp * n * (n * p + 1)
        if bic < best:
            best, best_p = bic, p
    return best_p
