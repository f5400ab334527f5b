"""Counterbalance equilibrium ``pi = pi Omega`` and its class decomposition.

Everything here works on a row-stochastic influence matrix, passed either as
an :class:`~causalvar.decomp.InfluenceMatrix` or a plain array (variables are
then named ``y1 .. yn``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .decomp import InfluenceMatrix
from .errors import ContractError, DegeneracyError, MisclassificationError, MisclassificationWarning, NumericalError
from .structure import CausalStructure

DEFAULT_TOL = 1e-12
STOCHASTIC_TOL = 1e-8
# squarings of the transition matrix before switching to the lazy chain;
# Omega^(2^64) is far beyond any mixing time reachable in double precision
_MAX_SQUARINGS = 64


@dataclass(frozen=True)
class CausalityDistribution:
    """A probability vector over named variables.

    ``scope`` is ``"global"``, ``"class:<s>"``, ``"quota"`` or
    ``"local:<name>"``. ``fallback`` marks a Cesaro-averaged solution of a
    periodic matrix; ``unique`` is False when the limit depends on the start.
    """

    pi: np.ndarray
    names: tuple[str, ...]
    scope: str = "global"
    iterations_used: int = 0
    residual: float = 0.0
    fallback: bool = False
    unique: bool = True
    horizon: int | None = None

    def __post_init__(self) -> None:
        pi = np.array(self.pi, dtype=float)
        pi.flags.writeable = False
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "names", tuple(self.names))

    def __getitem__(self, name: str) -> float:
        return float(self.pi[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in zip(self.names, self.pi)}

    def to_dict(self) -> dict:
        return {
            "scope": self.scope,
            "names": list(self.names),
            "pi": self.pi.tolist(),
            "sum": float(self.pi.sum()),
            "iterations_used": self.iterations_used,
            "residual": self.residual,
            "fallback": self.fallback,
            "unique": self.unique,
            "horizon": "limit" if self.horizon is None else self.horizon,
        }


@dataclass(frozen=True)
class TransientBlock:
    """Restriction ``T_e`` of the influence matrix to the transient variables."""

    Te: np.ndarray
    names: tuple[str, ...]
    spectral_radius: float


@dataclass(frozen=True)
class AbsorptionVector:
    """Ultimate share ``mu`` of one class in each transient variable."""

    mu: np.ndarray
    names: tuple[str, ...]
    source: tuple[str, ...]
    horizon: int | None = None

    def to_dict(self) -> dict:
        return {
            "source": list(self.source),
            "names": list(self.names),
            "mu": self.mu.tolist(),
            "horizon": "limit" if self.horizon is None else self.horizon,
        }


@dataclass(frozen=True)
class PeriodEstimate:
    """Period ``d`` of a variable's return times; ``confident`` is False when few returns were seen."""

    d: int
    returns: tuple[int, ...] = field(default=())
    confident: bool = True


def _unpack(omega) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(omega, InfluenceMatrix):
        return np.asarray(omega.omega, dtype=float), omega.names
    om = np.asarray(omega, dtype=float)
    if om.ndim != 2 or om.shape[0] != om.shape[1]:
        raise ContractError("influence matrix must be square")
    return om, tuple(f"y{i + 1}" for i in range(om.shape[0]))


def _check_stochastic(om: np.ndarray) -> None:
    if not np.all(np.isfinite(om)):
        raise ContractError("influence matrix has non-finite entries")
    if om.size and om.min() < -STOCHASTIC_TOL:
        raise ContractError("influence matrix has negative entries")
    dev = np.max(np.abs(om.sum(axis=1) - 1.0)) if om.size else 0.0
    if dev > STOCHASTIC_TOL:
        raise ContractError(f"influence matrix rows must sum to one (max deviation {dev:.3g})")


def _renormalize_rows(P: np.ndarray) -> np.ndarray:
    P = np.clip(P, 0.0, None)
    s = P.sum(axis=1, keepdims=True)
    s[s == 0] = 1.0
    return P / s


def _clean(pi: np.ndarray) -> np.ndarray:
    pi = np.clip(pi, 0.0, None)
    total = pi.sum()
    if not total > 0:
        raise NumericalError("equilibrium vector vanished")
    return pi / total


def _limit_power(om: np.ndarray, start: np.ndarray, tol: float, max_iter: int):
    """Iterate ``pi <- pi P``, ``P <- P^2`` until ``pi`` is a fixed point of ``om``.

    Returns ``(pi, P, updates, converged)``.
    """
    P = om.copy()
    pi = start.copy()
    updates = 0
    for _ in range(min(max_iter, _MAX_SQUARINGS)):
        pi = _clean(pi @ P)
        updates += 1
        if np.max(np.abs(pi - pi @ om)) < tol:
            return pi, P, updates, True
        P = _renormalize_rows(P @ P)
    return pi, P, updates, False


def _settle(P: np.ndarray) -> np.ndarray:
    for _ in range(_MAX_SQUARINGS):
        nxt = _renormalize_rows(P @ P)
        if np.max(np.abs(nxt - P)) < 1e-13:
            return nxt
        P = nxt
    return P


def solve_pi(omega, start=None, max_iter: int | None = None, tol: float = DEFAULT_TOL) -> CausalityDistribution:
    """Equilibrium distribution ``pi = pi Omega`` reached from ``start``.

    The iteration ``pi <- pi Omega`` is accelerated by repeated squaring, so
    update ``k`` applies ``Omega^(2^(k-1))``. If that fails to settle (a
    periodic matrix), the solver switches to the lazy chain
    ``(I + Omega) / 2``, whose limit from any start equals the Cesaro average
    of the original iterates, and sets ``fallback``.

    Parameters
    ----------
    omega
        Row-stochastic matrix.
    start
        Nonnegative start vector with unit sum; uniform by default.
    max_iter
        Cap on updates, default ``100 n + 1000``.
    tol
        Required fixed-point residual ``max |pi - pi Omega|``.

    Raises
    ------
    ContractError
        ``omega`` is not row-stochastic or ``start`` is not a distribution.
    NumericalError
        No fixed point within ``max_iter`` updates.
    """
    om, names = _unpack(omega)
    _check_stochastic(om)
    n = om.shape[0]
    if max_iter is None:
        max_iter = 100 * n + 1000
    if start is None:
        x0 = np.full(n, 1.0 / n)
    else:
        x0 = np.asarray(start, dtype=float)
        if x0.shape != (n,) or x0.min() < 0 or abs(x0.sum() - 1.0) > 1e-10:
            raise ContractError("start must be a nonnegative vector of length n with unit sum")

    pi, P, used, ok = _limit_power(om, x0, tol, max_iter)
    fallback = False
    if not ok:
        lazy = (np.eye(n) + om) / 2
        pi, P, extra, ok = _limit_power(lazy, x0, tol, max(max_iter - used, 1))
        used += extra
        fallback = True
    residual = float(np.max(np.abs(pi - pi @ om)))
    if residual >= tol:
        raise NumericalError(f"equilibrium iteration did not converge (residual {residual:.3g})", residual=residual)
    unique = bool(np.max(np.ptp(_settle(P), axis=0)) <= 1e-8)
    return CausalityDistribution(pi, names, "global", used, residual, fallback, unique)


def _sub(om: np.ndarray, rows, cols) -> np.ndarray:
    return om[np.ix_(rows, cols)]


def _indices(names: tuple[str, ...], members) -> list[int]:
    try:
        return [names.index(x) for x in members]
    except ValueError as exc:
        raise ContractError(f"structure names a variable not in the influence matrix: {exc}") from None


def class_distribution(omega, structure: CausalStructure, source, tol: float = DEFAULT_TOL) -> CausalityDistribution:
    """Equilibrium ``pi^c`` within one class, on its row-renormalized sub-matrix."""
    om, names = _unpack(omega)
    s = structure.class_index(source)
    members = structure.classes[s]
    idx = _indices(names, members)
    block = _sub(om, idx, idx)
    rs = block.sum(axis=1)
    if np.any(rs <= 0):
        raise DegeneracyError(f"class {list(members)} has a row with no mass inside the class")
    block = block / rs[:, None]
    d = solve_pi(block, tol=tol)
    return CausalityDistribution(d.pi, members, f"class:{s}", d.iterations_used, d.residual, d.fallback, d.unique)


def solve_pi_quota(omega, structure: CausalStructure, quotas, tol: float = DEFAULT_TOL) -> CausalityDistribution:
    """Equilibrium with a fixed causality share ``q_s`` for every class.

    Each class gets ``q_s * pi^c_s``; transient variables get zero.
    """
    om, names = _unpack(omega)
    q = np.asarray(quotas, dtype=float).ravel()
    if structure.k == 0:
        raise ContractError("the structure has no exogeneity class")
    if q.shape != (structure.k,):
        raise ContractError(f"expected {structure.k} quotas, got {q.size}")
    if q.min() < 0 or abs(q.sum() - 1.0) > 1e-10:
        raise ContractError("quotas must be nonnegative and sum to one")
    pi = np.zeros(len(names))
    used = 0
    residual = 0.0
    fallback = False
    for s in range(structure.k):
        d = class_distribution(InfluenceMatrix(om, names), structure, s, tol)
        pi[_indices(names, structure.classes[s])] = q[s] * d.pi
        used += d.iterations_used
        residual = max(residual, d.residual)
        fallback = fallback or d.fallback
    return CausalityDistribution(pi, names, "quota", used, residual, fallback, True)


def transient_block(omega, structure: CausalStructure) -> TransientBlock:
    """Sub-matrix ``T_e`` on the transient variables and its spectral radius.

    Warns with :class:`MisclassificationWarning` when the radius is not below
    ``1 - 1e-9``: the claimed transient set then traps mass like a class.
    """
    om, names = _unpack(omega)
    if not structure.transient:
        raise ContractError("the structure has an empty transient set")
    idx = _indices(names, structure.transient)
    Te = _sub(om, idx, idx).copy()
    rho = float(np.max(np.abs(np.linalg.eigvals(Te))))
    if rho >= 1 - 1e-9:
        warnings.warn(
            f"transient block has spectral radius {rho:.12g}; the transient set behaves like a class",
            MisclassificationWarning,
            stacklevel=2,
        )
    Te.flags.writeable = False
    return TransientBlock(Te, structure.transient, rho)


def absorption(omega, structure: CausalStructure, source_class, horizon: int | None = None) -> AbsorptionVector:
    """Share of class ``source_class`` ultimately absorbed by each transient variable.

    With ``horizon=None`` solves ``(I - T_e) mu = b`` where ``b_i`` is the
    one-step mass from transient ``i`` into the class; otherwise runs
    ``mu <- b + T_e mu`` from zero for exactly ``horizon`` steps.
    """
    om, names = _unpack(omega)
    block = transient_block(InfluenceMatrix(om, names), structure)
    s = structure.class_index(source_class)
    tidx = _indices(names, structure.transient)
    cidx = _indices(names, structure.classes[s])
    b = _sub(om, tidx, cidx).sum(axis=1)
    m = len(tidx)
    if horizon is None:
        M = np.eye(m) - block.Te
        if np.linalg.cond(M) > 1e12:
            raise MisclassificationError("I - T_e is singular: the transient set contains a closed class")
        mu = np.linalg.solve(M, b)
    else:
        if horizon < 0:
            raise ContractError("horizon must be nonnegative")
        mu = np.zeros(m)
        for _ in range(horizon):
            mu = b + block.Te @ mu
    mu = np.clip(mu, 0.0, 1.0)
    mu.flags.writeable = False
    return AbsorptionVector(mu, structure.transient, structure.classes[s], horizon)


def local_distribution(omega, structure: CausalStructure, target: str, horizon: int | None = None,
                       tol: float = DEFAULT_TOL) -> CausalityDistribution:
    """Allocation of a transient variable's ultimate causes, ``[mu^c1 pi^c1, ..., mu^ck pi^ck]``.

    In the limit the vector covers the class members only. At a finite
    horizon ``h`` it also lists the transient variables, carrying the mass
    ``T_e^h`` still circulating inside the transient set, so it still sums
    to one.
    """
    om, names = _unpack(omega)
    if target not in structure.transient:
        raise ContractError(f"{target!r} is not a transient variable")
    inf = InfluenceMatrix(om, names)
    pos = structure.transient.index(target)
    parts, labels = [], []
    for s in range(structure.k):
        mu = absorption(inf, structure, s, horizon).mu[pos]
        parts.append(mu * class_distribution(inf, structure, s, tol).pi)
        labels.extend(structure.classes[s])
    if horizon is not None:
        Te = transient_block(inf, structure).Te
        parts.append(np.linalg.matrix_power(Te, horizon)[pos])
        labels.extend(structure.transient)
    vec = np.concatenate(parts)
    return CausalityDistribution(vec, tuple(labels), f"local:{target}", 0, 0.0, False, True, horizon)


def pi_sensitivity(omega, i: int, j: int) -> tuple[float, np.ndarray]:
    """Derivatives of the equilibrium with respect to ``omega[j, i]``.

    The perturbation raises ``omega[j, i]`` and shrinks the rest of row ``j``
    proportionally so the row still sums to one.

    Returns
    -------
    d_i : float
        ``d pi_i / d omega_ji``, always nonnegative.
    d_rest : ndarray
        ``d pi_k / d omega_ji`` for ``k != i`` in index order.

    Raises
    ------
    DegeneracyError
        ``I - Z_i`` is singular (``Z_i`` is ``Omega'`` without row and column ``i``).
    """
    om, _ = _unpack(omega)
    _check_stochastic(om)
    n = om.shape[0]
    if not (0 <= i < n and 0 <= j < n):
        raise ContractError("index out of range")
    if om[j, i] >= 1:
        raise ContractError("omega[j, i] must be below one")
    pi = solve_pi(om).pi
    keep = [k for k in range(n) if k != i]
    Z = om[np.ix_(keep, keep)].T
    if n == 1:
        return 0.0, np.zeros(0)
    M = np.eye(n - 1) - Z
    if np.linalg.cond(M) > 1e12:
        raise DegeneracyError("I - Z_i is singular")
    a_ii = om[i, keep]
    a_ji = om[j, keep]
    v_ii = np.linalg.solve(M, a_ii)
    v_ji = np.linalg.solve(M, a_ji)
    c = pi[j] / (1.0 - om[j, i])
    d_i = c * v_ji.sum() / (1.0 + v_ii.sum())
    d_rest = d_i * v_ii - c * v_ji
    return float(max(d_i, 0.0)), d_rest


def periodicity_probe(omega, i: int, max_t: int | None = None, threshold: float = 1e-6) -> PeriodEstimate:
    """Period of variable ``i``: gcd of the return times ``t`` with ``Omega^t[i, i] > threshold``.

    Looks at ``t = 1 .. max_t`` (default ``max(4 n, 24)``). Fewer than three
    observed returns mark the estimate as not confident.
    """
    om, _ = _unpack(omega)
    n = om.shape[0]
    if not 0 <= i < n:
        raise ContractError("index out of range")
    if max_t is None:
        max_t = max(4 * n, 24)
    row = np.zeros(n)
    row[i] = 1.0
    returns = []
    for t in range(1, max_t + 1):
        row = row @ om
        if row[i] > threshold:
            returns.append(t)
    if not returns:
        return PeriodEstimate(1, (), False)
    d = 0
    for t in returns:
        d = math.gcd(d, t)
    return PeriodEstimate(d, tuple(returns), len(returns) >= 3)
