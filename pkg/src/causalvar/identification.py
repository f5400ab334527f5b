"""Bootstrap tests for exogeneity classes and the transient (endogeneity) class.

Every test follows one loop. Bootstrap the data from the fitted VAR, refit,
compute the influence matrix under the current Cholesky ordering, compute the
equilibrium, then reorder the variables by descending equilibrium mass for
the next replicate. A statistic is read off each replicate's influence matrix
and turned into a one-sided z-score.

Statistics are equilibrium masses of the iteration ``pi <- pi Omega`` after a
finite number of steps ``K`` from a chosen start vector. The sample influence
matrix has no exact zeros, so every limit of the iteration is the same
start-independent vector. The class structure only shows at finite ``K``.
Positive-valued statistics are biased upward by estimation noise. By default
the z-score is bias corrected as ``(2 theta_obs - mean*) / sd*``. Here
``theta_obs`` comes from the original sample, and ``mean*`` and ``sd*`` come
from the bootstrap replicates.
"""

from __future__ import annotations

import warnings
import zlib
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from statistics import NormalDist

import numpy as np

from .decomp import fevd, limit_fevd
from .equilibrium import periodicity_probe, solve_pi
from .errors import (
    CausalVarError,
    ConfigWarning,
    ConsistencyWarning,
    ContractError,
    ContradictionError,
    NumericalError,
    StationarityError,
)
from .panel import LagSpec, TimeSeriesPanel
from .structure import CausalStructure
from .var import RestrictionPattern, VarModel, check_stationary, companion, fit_var

SCHEMES = ("residual", "block")
CENTERINGS = ("bias", "none")
DISPERSIONS = ("sd", "rms")
ENDOGENEITY_STATISTICS = ("return", "cesaro", "column", "global")
MIN_STEPS = 6


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings shared by every bootstrap test.

    Attributes
    ----------
    replicates
        Number of bootstrap datasets ``gamma``. Fewer than 100 triggers a
        :class:`ConfigWarning`.
    seed
        Master seed; every replicate draws from its own stream derived from
        ``(seed, stage, replicate, attempt)``.
    alpha
        One-sided significance level in ``(0, 0.5]``.
    scheme
        ``"residual"`` (i.i.d. residual draws) or ``"block"`` (moving blocks
        of residuals), both propagated through the fitted dynamics.
    horizon
        ``None`` for the limit decomposition, otherwise the forecast horizon.
    steps
        Iteration steps ``K`` of the endogeneity statistic; defaults to the
        number of variables in the panel under test, and at least 6. Short
        horizons let a driven variable's own-shock share masquerade as
        self-return.
    link_steps
        Iteration steps of the class-link and class-edge statistics. The
        default of one step tests direct influence only, which keeps noise
        relayed through intermediate variables out of the statistic.
    centering
        ``"bias"`` for the bias-corrected numerator ``2 theta_obs - mean*``,
        ``"none"`` for the plain bootstrap mean.
    dispersion
        ``"sd"`` (standard deviation about the mean) or ``"rms"`` (root mean
        square about zero).
    endogeneity_statistic
        ``"return"``: mass back on ``i`` after ``K`` steps from ``e_i``.
        ``"global"``: the equilibrium share ``pi_i`` from a uniform start.
    """

    replicates: int = 200
    seed: int = 0
    alpha: float = 0.05
    scheme: str = "residual"
    block_length: int | None = None
    lag_spec: LagSpec = field(default_factory=lambda: LagSpec((1, 2)))
    horizon: int | None = None
    steps: int | None = None
    link_steps: int = 1
    centering: str = "bias"
    dispersion: str = "sd"
    endogeneity_statistic: str = "return"

    def __post_init__(self) -> None:
        object.__setattr__(self, "lag_spec", LagSpec.parse(self.lag_spec))
        if self.replicates < 1:
            raise ContractError("replicates must be at least 1")
        if not 0 < self.alpha <= 0.5:
            raise ContractError("alpha must lie in (0, 0.5]")
        if self.scheme not in SCHEMES:
            raise ContractError(f"scheme must be one of {SCHEMES}")
        if self.centering not in CENTERINGS:
            raise ContractError(f"centering must be one of {CENTERINGS}")
        if self.dispersion not in DISPERSIONS:
            raise ContractError(f"dispersion must be one of {DISPERSIONS}")
        if self.endogeneity_statistic not in ENDOGENEITY_STATISTICS:
            raise ContractError(f"endogeneity_statistic must be one of {ENDOGENEITY_STATISTICS}")
        if self.horizon is not None and self.horizon < 1:
            raise ContractError("horizon must be a positive integer or None")
        if self.steps is not None and self.steps < 1:
            raise ContractError("steps must be positive")
        if self.link_steps < 1:
            raise ContractError("link_steps must be positive")
        if self.block_length is not None and self.block_length < 1:
            raise ContractError("block_length must be positive")

    @property
    def critical(self) -> float:
        return NormalDist().inv_cdf(1.0 - self.alpha)

    def to_dict(self) -> dict:
        return {
            "replicates": self.replicates,
            "seed": self.seed,
            "alpha": self.alpha,
            "scheme": self.scheme,
            "block_length": self.block_length,
            "lags": list(self.lag_spec.lags),
            "horizon": "limit" if self.horizon is None else self.horizon,
            "steps": self.steps,
            "link_steps": self.link_steps,
            "centering": self.centering,
            "dispersion": self.dispersion,
            "endogeneity_statistic": self.endogeneity_statistic,
        }


@dataclass(frozen=True)
class TestResult:
    """One bootstrap z-test. ``decision`` is ``"reject"`` iff ``z >= critical``."""

    variables: tuple[str, ...]
    z: float
    mean: float
    rms: float
    sd: float
    observed: float
    critical: float
    decision: str
    null: str

    __test__ = False  # not a pytest class

    @property
    def rejected(self) -> bool:
        return self.decision == "reject"

    def to_dict(self) -> dict:
        return {
            "variables": list(self.variables),
            "z": self.z,
            "mean": self.mean,
            "rms": self.rms,
            "sd": self.sd,
            "observed": self.observed,
            "critical": self.critical,
            "decision": self.decision,
            "null": self.null,
        }


def _stage_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def _rng(seed: int, stage: int, replicate: int, attempt: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**64, stage, replicate, attempt]))


def bootstrap_replicate(
    panel: TimeSeriesPanel,
    model: VarModel,
    rng: np.random.Generator,
    scheme: str = "residual",
    block_length: int | None = None,
    exogenous: TimeSeriesPanel | None = None,
) -> TimeSeriesPanel:
    """Synthetic panel of the same length generated through the fitted dynamics.

    The first ``p`` observations are copied from ``panel``. Later ones follow
    the reduced-form recursion driven by centered residuals, drawn i.i.d.
    with replacement (``"residual"``) or as moving blocks (``"block"``).
    Exogenous regressors are held at their observed values.

    Raises
    ------
    StationarityError
        The fitted model is not stable, so the recursion would explode.
    """
    _require_stationary(model)
    n, T = panel.values.shape
    p = model.p
    u = model.residuals
    if model.instantaneous is not None:
        u = model.impact() @ u
    u = u - u.mean(axis=1, keepdims=True)
    m = T - p
    Tu = u.shape[1]
    if scheme == "residual":
        idx = rng.integers(0, Tu, size=m)
    elif scheme == "block":
        b = block_length or max(1, int(round(Tu ** (1 / 3))))
        b = min(b, Tu)
        starts = rng.integers(0, Tu - b + 1, size=-(-m // b))
        idx = (starts[:, None] + np.arange(b)[None, :]).ravel()[:m]
    else:
        raise ContractError(f"unknown bootstrap scheme {scheme!r}")

    impact = model.impact()
    drive = (impact @ model.intercept)[:, None] + u[:, idx]
    if model.exog_names:
        if exogenous is None or exogenous.names != model.exog_names:
            raise ContractError("the exogenous panel used for fitting must be supplied")
        X = exogenous.values
        for lag, B in model.exog_coefs.items():
            drive += impact @ B @ X[:, p - lag : T - lag]
    stack = model.coef_stack(reduced=True)
    lags = [lag for lag in model.lag_spec if np.any(stack[lag - 1])]
    Y = np.empty((n, T))
    Y[:, :p] = panel.values[:, :p]
    for t in range(p, T):
        acc = drive[:, t - p].copy()
        for lag in lags:
            acc += stack[lag - 1] @ Y[:, t - lag]
        Y[:, t] = acc
    if not np.all(np.isfinite(Y)):
        raise NumericalError("bootstrap recursion produced non-finite values")
    return panel.with_values(Y)


def _require_stationary(model: VarModel) -> None:
    check = check_stationary(companion(model))
    if not check.stationary:
        raise StationarityError(
            f"fitted model has companion spectral radius {check.radius:.6g}; refusing to bootstrap", radius=check.radius
        )


def _descending(names: tuple[str, ...], pi: np.ndarray) -> list[str]:
    return [names[k] for k in sorted(range(len(names)), key=lambda k: (-pi[k], names[k]))]


def _influence(model: VarModel, order, names, horizon) -> np.ndarray:
    m = model.reordered(order)
    inf = limit_fevd(m) if horizon is None else fevd(m, horizon)
    return inf.reordered(names).omega


@dataclass
class BootstrapBatch:
    """Replicate influence matrices and equilibria of one bootstrap run.

    ``omegas[k]`` and ``pis[k]`` are in ``names`` order. ``omega_obs`` is the
    influence matrix of the original sample under the ordering given by the
    replicates' mean equilibrium.
    """

    names: tuple[str, ...]
    omegas: np.ndarray
    pis: np.ndarray
    omega_obs: np.ndarray
    failures: int
    label: str
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def replicates(self) -> int:
        return self.omegas.shape[0]

    def index(self, members) -> list[int]:
        if isinstance(members, str):
            members = (members,)
        try:
            return [self.names.index(x) for x in members]
        except ValueError as exc:
            raise ContractError(f"unknown variable: {exc}") from None

    def powers(self, K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``Omega^K`` and the Cesaro mean of ``Omega^1 .. Omega^K`` for replicates and the sample."""
        if K not in self._cache:
            allm = np.concatenate([self.omegas, self.omega_obs[None]], axis=0)
            P = allm.copy()
            acc = allm.copy()
            for _ in range(K - 1):
                P = P @ allm
                acc += P
            acc /= K
            self._cache[K] = (P[:-1], acc[:-1], P[-1], acc[-1])
        return self._cache[K]


def run_batch(
    panel: TimeSeriesPanel,
    config: BootstrapConfig,
    label: str,
    exogenous: TimeSeriesPanel | None = None,
    instantaneous=None,
) -> BootstrapBatch:
    """Run the bootstrap loop and keep every replicate's influence matrix.

    Failed replicates (unstable or rank-deficient refits) are redrawn with a
    fresh stream; after ``10 * replicates`` failures the run aborts.
    """
    names = panel.names
    lags = config.lag_spec
    model = fit_var(panel, lags, exogenous=exogenous)
    _require_stationary(model)
    stage = _stage_key(label)
    order = list(np.random.default_rng(np.random.SeedSequence([int(config.seed) % 2**64, stage])).permutation(names))
    gamma = config.replicates
    omegas = np.empty((gamma, len(names), len(names)))
    pis = np.empty((gamma, len(names)))
    failures = 0
    for k in range(gamma):
        attempt = 0
        while True:
            rng = _rng(config.seed, stage, k, attempt)
            try:
                boot = bootstrap_replicate(panel, model, rng, config.scheme, config.block_length, exogenous)
                fitted = fit_var(boot, lags, exogenous=exogenous)
                om = _influence(fitted, order, names, config.horizon)
                pi = solve_pi(om).pi
                break
            except CausalVarError:
                failures += 1
            attempt += 1
            if failures > 10 * gamma:
                raise NumericalError(f"bootstrap {label!r}: more than {10 * gamma} failed replicates")
        omegas[k] = om
        pis[k] = pi
        order = _descending(names, pi)
    mean_order = _descending(names, pis.mean(axis=0))
    omega_obs = _influence(model, mean_order, names, config.horizon)
    return BootstrapBatch(names, omegas, pis, omega_obs, failures, label)


def _ztest(variables, observed: float, reps: np.ndarray, config: BootstrapConfig, null: str) -> TestResult:
    mean = float(reps.mean())
    sd = float(reps.std())
    rms = float(np.sqrt(np.mean(reps**2)))
    num = 2.0 * observed - mean if config.centering == "bias" else mean
    disp = sd if config.dispersion == "sd" else rms
    if disp > 0:
        z = num / disp
    else:
        z = float("inf") if num > 0 else 0.0
    crit = config.critical
    return TestResult(tuple(variables), float(z), mean, rms, sd, float(observed), crit,
                      "reject" if z >= crit else "accept", null)


def _warn_replicates(config: BootstrapConfig) -> None:
    if config.replicates < 100:
        warnings.warn(
            f"{config.replicates} bootstrap replicates is below the recommended 100", ConfigWarning, stacklevel=3
        )


@contextmanager
def _replicate_warning_shown():
    """Silence repeats of the low-replicate warning inside a composite operation."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConfigWarning)
        yield


def _steps(config: BootstrapConfig, n: int) -> int:
    return config.steps or max(n, MIN_STEPS)


def endogeneity_results(batch: BootstrapBatch, config: BootstrapConfig) -> list[TestResult]:
    """Per-variable tests of ``H0: pi_i = 0`` from an existing batch."""
    n = len(batch.names)
    stat = config.endogeneity_statistic
    if stat == "global":
        reps = batch.pis
        obs = solve_pi(batch.omega_obs).pi
    else:
        P, C, P_obs, C_obs = batch.powers(_steps(config, n))
        if stat == "return":
            reps, obs = np.diagonal(P, axis1=1, axis2=2), np.diag(P_obs)
        elif stat == "cesaro":
            reps, obs = np.diagonal(C, axis1=1, axis2=2), np.diag(C_obs)
        else:
            reps, obs = P.mean(axis=1), P_obs.mean(axis=0)
    return [
        _ztest((name,), obs[i], reps[:, i], config, f"pi_{name} = 0 ({name} is endogenous)")
        for i, name in enumerate(batch.names)
    ]


def test_endogeneity(panel: TimeSeriesPanel, config: BootstrapConfig,
                     exogenous: TimeSeriesPanel | None = None) -> list[TestResult]:
    """Test ``H0: pi_i = 0`` against ``pi_i > 0`` for every variable.

    A variable whose ``z`` stays below ``z_{1-alpha}`` (decision
    ``"accept"``) is classified endogenous.
    """
    _warn_replicates(config)
    batch = run_batch(panel, config, "endogeneity:" + ",".join(panel.names), exogenous)
    return endogeneity_results(batch, config)


test_endogeneity.__test__ = False


@dataclass(frozen=True)
class EliminationResult:
    """Outcome of repeated endogeneity testing.

    ``transient`` lists dropped variables in drop order; ``pool`` the
    remaining exogenous candidates. ``first`` is the batch on the full panel
    and ``last`` the batch on the final pool.
    """

    names: tuple[str, ...]
    transient: tuple[str, ...]
    pool: tuple[str, ...]
    rounds: tuple[tuple[TestResult, ...], ...]
    first: BootstrapBatch | None = None
    last: BootstrapBatch | None = None

    @property
    def structure(self) -> CausalStructure:
        """Provisional structure: the pool as one undivided group plus the transient set."""
        return CausalStructure((self.pool,), self.transient, (), names=self.names)

    def pool_ranking(self) -> list[str]:
        """Pool ordered by descending mean equilibrium share in the last round, ties by name."""
        if self.last is None:
            return list(self.pool)
        return _descending(self.last.names, self.last.pis.mean(axis=0))


def eliminate_endogenous(panel: TimeSeriesPanel, config: BootstrapConfig,
                         exogenous: TimeSeriesPanel | None = None, label: str = "") -> EliminationResult:
    """Drop endogenous variables one at a time.

    Each round tests every remaining variable and drops the one with the
    smallest ``z`` if it is below the critical value; the reduced panel is
    tested again until no variable qualifies.

    Raises
    ------
    ContradictionError
        Every variable would be dropped, leaving no exogeneity class.
    """
    _warn_replicates(config)
    names = panel.names
    if panel.n == 1:
        return EliminationResult(names, (), names, ())
    remaining = list(names)
    dropped: list[str] = []
    rounds = []
    first = last = None
    while True:
        sub = panel.select(remaining)
        batch = run_batch(sub, config, f"{label}endogeneity:" + ",".join(remaining), exogenous)
        first = first or batch
        last = batch
        results = endogeneity_results(batch, config)
        rounds.append(tuple(results))
        candidates = [r for r in results if not r.rejected]
        if not candidates:
            break
        worst = min(candidates, key=lambda r: (r.z, r.variables))
        if len(remaining) == 1:
            raise ContradictionError(
                "every variable tested endogenous; a panel must contain at least one exogeneity class"
            )
        remaining.remove(worst.variables[0])
        dropped.append(worst.variables[0])
        if len(remaining) == 1:
            # a lone variable is its own class
            last = None
            break
    return EliminationResult(names, tuple(dropped), tuple(remaining), tuple(rounds), first, last)


def _group(x) -> tuple[str, ...]:
    return (x,) if isinstance(x, str) else tuple(x)


def _mass(batch: BootstrapBatch, start, target, K: int) -> tuple[float, np.ndarray]:
    """Cesaro mass on ``target`` within ``K`` steps from a uniform start over ``start``."""
    _, C, _, C_obs = batch.powers(K)
    si, ti = batch.index(start), batch.index(target)
    reps = C[:, si][:, :, ti].sum(axis=2).mean(axis=1)
    obs = C_obs[np.ix_(si, ti)].sum(axis=1).mean()
    return float(obs), reps


def separation_result(batch: BootstrapBatch, i, j, config: BootstrapConfig) -> TestResult:
    """``H0``: no mass reaches ``j`` from a start on ``i`` (``j`` has no causal path to ``i``)."""
    i, j = _group(i), _group(j)
    obs, reps = _mass(batch, i, j, config.link_steps)
    return _ztest(i + j, obs, reps, config, f"no causal path from {list(j)} to {list(i)}")


def test_class_separation(panel: TimeSeriesPanel, i, j, config: BootstrapConfig,
                          exogenous: TimeSeriesPanel | None = None) -> TestResult:
    """Test whether ``j`` (a variable or group) influences ``i``.

    The statistic is the equilibrium mass on ``j`` after ``K`` steps of the
    iteration started from ``e_i`` (uniform over ``i`` for a group). ``H0``
    (separate classes, or no effect of an exogenous ``j`` on an endogenous
    ``i``) is accepted when ``z`` is below the critical value.
    """
    i, j = _group(i), _group(j)
    if set(i) & set(j):
        raise ContractError("the two sides of a separation test must be different variables")
    _warn_replicates(config)
    batch = run_batch(panel, config, "separation:" + ",".join(panel.names), exogenous)
    return separation_result(batch, i, j, config)


test_class_separation.__test__ = False


def class_link_result(batch: BootstrapBatch, v, members, config: BootstrapConfig) -> TestResult:
    """Symmetric link statistic between candidate ``v`` and a class: mass either way."""
    v, members = _group(v), _group(members)
    K = config.link_steps
    o1, r1 = _mass(batch, v, members, K)
    o2, r2 = _mass(batch, members, v, K)
    return _ztest(v + members, o1 + o2, r1 + r2, config, f"{list(v)} and {list(members)} are in separate classes")


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


@dataclass(frozen=True)
class DiscoveryResult:
    structure: CausalStructure
    elimination: EliminationResult
    class_tests: tuple[TestResult, ...]
    edge_tests: tuple[TestResult, ...]


def discover(panel: TimeSeriesPanel, config: BootstrapConfig, elimination: EliminationResult | None = None,
             exogenous: TimeSeriesPanel | None = None, label: str = "") -> DiscoveryResult:
    """Group the exogenous pool into classes and find class edges into the transient set."""
    if elimination is None:
        elimination = eliminate_endogenous(panel, config, exogenous, label)
    pool = elimination.pool_ranking()
    tests = []
    classes: list[list[str]] = []
    uf = _UnionFind(pool)
    if len(pool) > 1:
        batch = elimination.last
        if batch is None:
            batch = run_batch(panel.select(pool), config, f"{label}classes:" + ",".join(pool), exogenous)
        for v in pool:
            hits = []
            for members in classes:
                res = class_link_result(batch, v, members, config)
                tests.append(res)
                if res.rejected:
                    hits.append(members)
            if len(hits) > 1:
                warnings.warn(
                    f"{v!r} links to {len(hits)} classes; merging them", ConsistencyWarning, stacklevel=2
                )
            for members in hits:
                uf.union(members[0], v)
            merged = [m for m in classes if m not in hits]
            joined = [x for m in hits for x in m] + [v]
            classes = merged + [joined]
    else:
        classes = [list(pool)]
    groups: dict[str, list[str]] = {}
    for x in pool:
        groups.setdefault(uf.find(x), []).append(x)
    final = sorted((sorted(g, key=lambda x: panel.names.index(x)) for g in groups.values()),
                   key=lambda g: min(panel.names.index(x) for x in g))
    transient = tuple(x for x in panel.names if x in elimination.transient)
    edges = []
    edge_tests = []
    if transient:
        batch = elimination.first
        for members in final:
            res = separation_result(batch, transient, members, config)
            edge_tests.append(res)
            if res.rejected:
                edges.append((tuple(members), transient))
    structure = CausalStructure(tuple(tuple(c) for c in final), transient, tuple(edges), names=panel.names)
    return DiscoveryResult(structure, elimination, tuple(tests), tuple(edge_tests))


def discover_classes(panel: TimeSeriesPanel, config: BootstrapConfig,
                     elimination: EliminationResult | None = None) -> CausalStructure:
    """Exogeneity classes, the transient set and class edges into it.

    Pool variables are visited in descending order of equilibrium share and
    tested against each class formed so far; a significant link in either
    direction puts them in the same class. Links to several classes merge
    those classes (with a :class:`ConsistencyWarning`). Each class is then
    tested for an effect on the transient set as a whole.
    """
    _warn_replicates(config)
    with _replicate_warning_shown():
        return discover(panel, config, elimination).structure


def _refine(panel: TimeSeriesPanel, structure: CausalStructure, config: BootstrapConfig,
            exogenous: TimeSeriesPanel | None, label: str) -> CausalStructure:
    T = structure.transient
    if len(T) < 2:
        return structure
    sources = [c for c, t in structure.edges if set(t) == set(T)]
    exog_names = [x for c in sources for x in c]
    if exogenous is not None:
        exog_names = list(exogenous.names) + exog_names
    full = _merge(panel, exogenous)
    exog = full.select(exog_names) if exog_names else None
    sub_panel = full.select(T)
    sub_label = f"{label}sub[{','.join(T)}]:"
    sub = discover(sub_panel, config, exogenous=exog, label=sub_label).structure
    sub = _refine(sub_panel, sub, config, exog, sub_label)
    if sub.is_trivial():
        return structure
    return replace(structure, sub=sub)


def _merge(panel: TimeSeriesPanel, extra: TimeSeriesPanel | None) -> TimeSeriesPanel:
    if extra is None:
        return panel
    names = panel.names + tuple(x for x in extra.names if x not in panel.names)
    vals = np.vstack([panel.values] + [extra.values[[extra.names.index(x)]] for x in names[panel.n:]])
    return TimeSeriesPanel(names, vals, panel.time_index)


def refine_endogeneity_substructure(panel: TimeSeriesPanel, structure: CausalStructure,
                                    config: BootstrapConfig) -> CausalStructure:
    """Look for exogeneity sub-classes inside the transient set, recursively.

    The transient variables get their own VAR in which the members of every
    class with an edge into the transient set enter as exogenous regressors;
    classes without such an edge are left out. Elimination and class
    discovery are repeated there, and again inside any smaller transient set
    found, until nothing splits further. A sub-structure is recorded only when
    it is not a single undivided class.
    """
    _warn_replicates(config)
    with _replicate_warning_shown():
        return _refine(panel, structure, config, None, "")


@dataclass(frozen=True)
class IdentificationResult:
    structure: CausalStructure
    elimination: EliminationResult
    class_tests: tuple[TestResult, ...]
    edge_tests: tuple[TestResult, ...]
    config: BootstrapConfig

    def to_dict(self) -> dict:
        return {
            "structure": self.structure.to_dict(),
            "endogeneity_rounds": [[r.to_dict() for r in rnd] for rnd in self.elimination.rounds],
            "dropped": list(self.elimination.transient),
            "class_tests": [r.to_dict() for r in self.class_tests],
            "edge_tests": [r.to_dict() for r in self.edge_tests],
            "config": self.config.to_dict(),
        }


def identify(panel: TimeSeriesPanel, config: BootstrapConfig) -> IdentificationResult:
    """Full pipeline: elimination, class discovery, then recursive sub-structure search."""
    _warn_replicates(config)
    with _replicate_warning_shown():
        found = discover(panel, config)
        structure = _refine(panel, found.structure, config, None, "")
    return IdentificationResult(structure, found.elimination, found.class_tests, found.edge_tests, config)


@dataclass(frozen=True)
class PeriodicityResult:
    variable: str
    period: int
    votes: dict
    confident: bool


def test_periodicity(panel: TimeSeriesPanel, i: str, config: BootstrapConfig, max_t: int | None = None) -> PeriodicityResult:
    """Majority vote of the return-time period of ``i`` over bootstrap replicates."""
    _warn_replicates(config)
    batch = run_batch(panel, config, "periodicity:" + ",".join(panel.names))
    k = batch.index(i)[0]
    votes: dict[int, int] = {}
    for om in batch.omegas:
        d = periodicity_probe(om, k, max_t).d
        votes[d] = votes.get(d, 0) + 1
    period = min(votes, key=lambda d: (-votes[d], d))
    return PeriodicityResult(i, period, dict(sorted(votes.items())), votes[period] > batch.replicates / 2)


test_periodicity.__test__ = False


def _instantaneous_mask(mask, names) -> np.ndarray:
    n = len(names)
    if isinstance(mask, RestrictionPattern):
        if mask.instantaneous_mask is None:
            return np.zeros((n, n), bool)
        return np.asarray(mask.reordered(names).instantaneous_mask, bool)
    arr = np.asarray(mask, dtype=object)
    if arr.shape == (n, n):
        m = np.asarray(mask, dtype=bool)
    else:
        m = np.zeros((n, n), bool)
        for effect, cause in mask:
            m[names.index(effect), names.index(cause)] = True
    if m.diagonal().any():
        raise ContractError("instantaneous mask must have a zero diagonal")
    return m


def test_instantaneous(panel: TimeSeriesPanel, mask, i: str, config: BootstrapConfig) -> TestResult:
    """Does the contemporaneous pattern ``mask`` raise variable ``i``'s equilibrium share?

    Each replicate fits both the VAR and the SVAR with free ``A0`` entries
    given by ``mask`` (an ``n x n`` boolean array, a
    :class:`RestrictionPattern`, or ``(effect, cause)`` pairs). The
    statistic is ``pi~_i - pi_i``. Both models start from the same seeded
    ordering and then follow their own reordering chains.
    """
    _warn_replicates(config)
    names = panel.names
    k = panel.index_of(i)
    inst = _instantaneous_mask(mask, names)
    lags = config.lag_spec
    model = fit_var(panel, lags)
    _require_stationary(model)
    pattern = RestrictionPattern(names, instantaneous_mask=inst) if inst.any() else None
    stage = _stage_key("instantaneous:" + ",".join(names) + f":{i}")
    order = list(np.random.default_rng(np.random.SeedSequence([int(config.seed) % 2**64, stage])).permutation(names))
    order_s = list(order)
    gamma = config.replicates
    deltas = np.empty(gamma)
    failures = 0

    def both(data, o1, o2):
        var = fit_var(data, lags)
        svar = fit_var(data, lags, pattern) if pattern is not None else var
        pi = solve_pi(_influence(var, o1, names, config.horizon)).pi
        pis = solve_pi(_influence(svar, o2, names, config.horizon)).pi
        return pi, pis

    for r in range(gamma):
        attempt = 0
        while True:
            try:
                boot = bootstrap_replicate(panel, model, _rng(config.seed, stage, r, attempt), config.scheme,
                                           config.block_length)
                pi, pis = both(boot, order, order_s)
                break
            except CausalVarError:
                failures += 1
                attempt += 1
                if failures > 10 * gamma:
                    raise NumericalError("instantaneous test: too many failed replicates") from None
        deltas[r] = pis[k] - pi[k]
        order = _descending(names, pi)
        order_s = _descending(names, pis)
    pi0, pis0 = both(panel, order, order_s)
    return _ztest((i,), float(pis0[k] - pi0[k]), deltas, config,
                  f"contemporaneous effects leave pi_{i} unchanged")


test_instantaneous.__test__ = False
