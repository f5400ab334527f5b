"""Synthetic panels from nine-variable reference structures and accuracy scoring.

Each template fixes which lagged variables enter each equation. Coefficients
are drawn uniformly on ``[-0.8, 0.8]`` for every free position at every lag,
scaled down until the companion spectral radius is at most 0.95, and driven
by independent standard normal noise after a burn-in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import ContractError, GenerationError
from .panel import TimeSeriesPanel
from .structure import CausalStructure
from .var import companion_matrix, spectral_radius

TEMPLATE_IDS = ("classification", "hierarchy", "circular", "periodic", "subexogeneity")
TARGET_RADIUS = 0.95
COEF_BOUND = 0.8
BURN_IN = 500
MAX_RESCALES = 100


@dataclass(frozen=True)
class StructureTemplate:
    """Variable-level cause lists plus the class-level ground truth."""

    id: str
    names: tuple[str, ...]
    causes: dict
    truth: CausalStructure
    lag: int = 2

    def adjacency(self) -> np.ndarray:
        """Boolean ``n x n`` matrix, ``[i, j]`` true when lagged ``j`` enters equation ``i`` (self-lags included)."""
        n = len(self.names)
        adj = np.eye(n, dtype=bool)
        for i, eff in enumerate(self.names):
            for c in self.causes[eff]:
                adj[i, self.names.index(c)] = True
        return adj


@lru_cache(maxsize=1)
def _load_templates() -> dict:
    text = resources.files("causalvar").joinpath("data/templates.json").read_text(encoding="utf-8")
    return json.loads(text)


def load_template(template_id: str) -> StructureTemplate:
    data = _load_templates()
    try:
        t = data["templates"][template_id]
    except KeyError:
        raise ContractError(
            f"unknown template {template_id!r}; choose from {', '.join(TEMPLATE_IDS)}"
        ) from None
    names = tuple(sorted(t["causes"], key=lambda x: int(x[1:])))
    return StructureTemplate(template_id, names, t["causes"], CausalStructure.from_dict(t["structure"]), data["lag"])


def draw_coefficients(template: StructureTemplate, rng: np.random.Generator) -> np.ndarray:
    """Coefficient stack ``(lag, n, n)`` on the template's support, rescaled to radius <= 0.95."""
    adj = template.adjacency()
    n = adj.shape[0]
    A = rng.uniform(-COEF_BOUND, COEF_BOUND, size=(template.lag, n, n)) * adj
    for _ in range(MAX_RESCALES):
        rho = spectral_radius(companion_matrix(A))
        if rho <= TARGET_RADIUS:
            return A
        A = A * (TARGET_RADIUS / rho) ** (1.0 / template.lag) * 0.999
    raise GenerationError(f"could not rescale coefficients below radius {TARGET_RADIUS} in {MAX_RESCALES} attempts")


def simulate_var(A: np.ndarray, T: int, rng: np.random.Generator, burn_in: int = BURN_IN) -> np.ndarray:
    """``n x T`` sample of ``y_t = sum_l A_l y_{t-l} + e_t`` with ``e_t ~ N(0, I)``, started at zero."""
    p, n, _ = A.shape
    total = T + burn_in
    e = rng.standard_normal((total, n))
    y = np.zeros((total + p, n))
    At = [a.T for a in A]
    for t in range(total):
        acc = e[t].copy()
        for lag in range(p):
            acc += y[p + t - 1 - lag] @ At[lag]
        y[p + t] = acc
    return y[p + burn_in :].T


def dataset_seed(master: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master) & (2**63 - 1), int(index)])


def generate(template: StructureTemplate | str, T: int, seed: int | np.random.SeedSequence):
    """Simulate one panel from ``template``.

    Returns
    -------
    panel : TimeSeriesPanel
    truth : CausalStructure
    """
    if isinstance(template, str):
        template = load_template(template)
    if T < 50:
        raise ContractError("generated panels need T >= 50")
    rng = np.random.default_rng(seed)
    A = draw_coefficients(template, rng)
    Y = simulate_var(A, T, rng)
    return TimeSeriesPanel(template.names, Y), template.truth


@dataclass(frozen=True)
class AccuracyScore:
    exact: bool
    omissions: int
    additions: int
    relation_recall: float
    true_relations: int = 0
    identified: int = 0

    def to_dict(self) -> dict:
        return {
            "exact": self.exact,
            "omissions": self.omissions,
            "additions": self.additions,
            "relation_recall": self.relation_recall,
            "true_relations": self.true_relations,
            "identified": self.identified,
        }


def score(estimated: CausalStructure, truth: CausalStructure) -> AccuracyScore:
    """Compare class memberships, transient sets and class edges, recursively.

    Raises
    ------
    ContractError
        The two structures cover different variables.
    """
    if set(estimated.names) != set(truth.names):
        raise ContractError("estimated and true structures cover different variables")
    est, tru = estimated.relations(), truth.relations()
    hit = len(est & tru)
    omissions = len(tru - est)
    additions = len(est - tru)
    recall = hit / len(tru) if tru else 1.0
    return AccuracyScore(omissions == 0 and additions == 0, omissions, additions, recall, len(tru), hit)


def _histogram(counts) -> list[int]:
    out = [0, 0, 0, 0]
    for c in counts:
        if c >= 1:
            out[min(c, 4) - 1] += 1
    return out


@dataclass(frozen=True)
class StudyRow:
    """One line of the accuracy table: tallies over ``datasets`` simulated panels."""

    template: str
    datasets: int
    exact: int
    omissions: list = field(default_factory=list)
    additions: list = field(default_factory=list)
    relations: int = 0
    identified: int = 0
    seeds: tuple = ()
    failures: int = 0

    @property
    def exact_rate(self) -> float:
        return self.exact / self.datasets if self.datasets else 0.0

    @property
    def relation_rate(self) -> float:
        return self.identified / self.relations if self.relations else 0.0

    def to_dict(self) -> dict:
        return {
            "template": self.template,
            "datasets": self.datasets,
            "exact": self.exact,
            "exact_rate": self.exact_rate,
            "omissions_1": self.omissions[0],
            "omissions_2": self.omissions[1],
            "omissions_3": self.omissions[2],
            "omissions_4plus": self.omissions[3],
            "additions_1": self.additions[0],
            "additions_2": self.additions[1],
            "additions_3": self.additions[2],
            "additions_4plus": self.additions[3],
            "relation_rate": self.relation_rate,
            "failures": self.failures,
        }


def study_dataset(template_id: str, index: int, T: int, config, master_seed: int):
    """Generate dataset ``index`` and run the identification pipeline on it.

    The dataset and its bootstrap streams depend only on ``(master_seed,
    index)``, so datasets can be processed in any order or in parallel.
    Pipeline failures count as an empty estimate (every true relation
    omitted).
    """
    from dataclasses import replace

    from .errors import CausalVarError
    from .identification import identify

    template = load_template(template_id)
    ss = dataset_seed(master_seed, TEMPLATE_IDS.index(template_id) * 1_000_003 + index)
    data_ss, boot_ss = ss.spawn(2)
    panel, truth = generate(template, T, data_ss)
    cfg = replace(config, seed=int(boot_ss.generate_state(1, np.uint64)[0]))
    try:
        est = identify(panel, cfg).structure
    except CausalVarError:
        n_true = len(truth.relations())
        return AccuracyScore(False, n_true, 0, 0.0, n_true, 0), True
    return score(est, truth), False


def aggregate(template_id: str, scores, seeds=()) -> StudyRow:
    scores = list(scores)
    return StudyRow(
        template_id,
        len(scores),
        sum(1 for s, _ in scores if s.exact),
        _histogram(s.omissions for s, _ in scores),
        _histogram(s.additions for s, _ in scores),
        sum(s.true_relations for s, _ in scores),
        sum(s.identified for s, _ in scores),
        tuple(seeds),
        sum(1 for _, failed in scores if failed),
    )


def run_study(template: StructureTemplate | str, datasets: int, T: int, config, master_seed: int = 0,
              workers: int = 1) -> StudyRow:
    """Identify ``datasets`` simulated panels and tally the accuracy table row.

    ``workers > 1`` spreads datasets over processes; the row is identical to
    the serial result.
    """
    tid = template.id if isinstance(template, StructureTemplate) else template
    load_template(tid)
    if datasets < 1:
        raise ContractError("datasets must be at least 1")
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(study_dataset, tid, i, T, config, master_seed) for i in range(datasets)]
            scores = [f.result() for f in futures]
    else:
        scores = [study_dataset(tid, i, T, config, master_seed) for i in range(datasets)]
    return aggregate(tid, scores, (master_seed,))


def average_row(rows) -> dict:
    """The "Average" line: per-column mean of the template rows (rates averaged across templates)."""
    rows = list(rows)
    dicts = [r.to_dict() for r in rows]
    out = {"template": "Average"}
    for key in dicts[0]:
        if key == "template":
            continue
        out[key] = float(np.mean([d[key] for d in dicts]))
    return out
