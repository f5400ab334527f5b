"""End-to-end acceptance checks, one test per criterion.

Each test records its outcome with the ``criterion`` fixture before
asserting, so the terminal summary lists one PASS/FAIL line per criterion.
The accuracy study runs its quick tier by default; set
``CAUSALVAR_FULL_STUDY=1`` to also run the 100-dataset tier.
"""

import os
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from causalvar.decomp import fevd, influence, limit_fevd
from causalvar.equilibrium import (
    absorption,
    class_distribution,
    local_distribution,
    pi_sensitivity,
    solve_pi,
    solve_pi_quota,
    transient_block,
)
from causalvar.identification import BootstrapConfig, identify
from causalvar.panel import LagSpec, TimeSeriesPanel
from causalvar.simgen import TEMPLATE_IDS, average_row, run_study
from causalvar.structure import CausalStructure
from causalvar.var import VarModel, companion_matrix, fit_var, spectral_radius

from conftest import random_stable_model, simulate

INSTANCES = 200


def structured_omega(rng):
    """Random influence matrix with closed aperiodic classes and a leaking transient block."""
    sizes = list(rng.integers(1, 4, size=rng.integers(1, 4)))
    n_t = int(rng.integers(1, 4))
    n = sum(sizes) + n_t
    names = tuple(f"y{i}" for i in range(1, n + 1))
    om = np.zeros((n, n))
    classes, start = [], 0
    for s in sizes:
        block = rng.uniform(0.05, 1, size=(s, s))
        om[start:start + s, start:start + s] = block / block.sum(axis=1, keepdims=True)
        classes.append(names[start:start + s])
        start += s
    t0 = start
    for r in range(t0, n):
        row = rng.uniform(0, 1, size=n) * (rng.uniform(size=n) < 0.7)
        row[rng.integers(0, t0)] += 0.05
        row[r] += 0.01
        om[r] = row / row.sum()
        # keep at least 5% of each transient row leaving the transient block
        inside = om[r, t0:].sum()
        if inside > 0.95:
            om[r, t0:] *= 0.95 / inside
            om[r, :t0] *= (1 - om[r, t0:].sum()) / om[r, :t0].sum()
    structure = CausalStructure(tuple(classes), names[t0:])
    return om, structure, t0


def central_difference(om, i, j, h=1e-6):
    def shifted(delta):
        p = om.copy()
        p[j, i] += delta
        p[j] /= 1.0 + delta
        return solve_pi(p).pi

    return (shifted(h) - shifted(-h)) / (2 * h) / (1 - om[j, i])


def test_worked_example_exactness(criterion, worked_omega, worked_structure):
    t0 = time.perf_counter()
    got = [
        (class_distribution(worked_omega, worked_structure, 0).pi, [1 / 2, 1 / 2]),
        (class_distribution(worked_omega, worked_structure, 1).pi, [4 / 19, 15 / 19]),
        (transient_block(worked_omega, worked_structure).Te, [[1 / 4, 1 / 4], [1 / 6, 1 / 6]]),
        (absorption(worked_omega, worked_structure, 0).mu, [3 / 7, 2 / 7]),
        (absorption(worked_omega, worked_structure, 1).mu, [4 / 7, 5 / 7]),
        (solve_pi_quota(worked_omega, worked_structure, [0.4, 0.6]).pi, [1 / 5, 1 / 5, 12 / 95, 9 / 19, 0, 0]),
        (local_distribution(worked_omega, worked_structure, "y5").pi, np.array([57, 57, 32, 120]) / 266),
        (local_distribution(worked_omega, worked_structure, "y6").pi, np.array([38, 38, 40, 150]) / 266),
    ]
    elapsed = time.perf_counter() - t0
    err = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in got)
    ok = err < 1e-12 and elapsed < 1.0
    criterion("1 worked example", ok, f"max error {err:.1e}, {elapsed:.3f} s")
    assert ok


def test_invariant_suite(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = dict(pattern=0.0, affine=0.0, sens_rel=0.0, sens_min=np.inf, radius=0.0,
                 absorb=0.0, factor=0.0, decay=0.0)
    monotone = True
    for _ in range(INSTANCES):
        # zero lag block from the trailing to the leading variables survives the decomposition
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n))
        m = random_stable_model(rng, n, int(rng.integers(1, 3)), radius=0.9)
        coefs = {lag: a.copy() for lag, a in m.coefs.items()}
        for a in coefs.values():
            a[:k, k:] = 0.0
        while (rho := spectral_radius(companion_matrix(np.stack(list(coefs.values()))))) > 0.9:
            coefs = {lag: a * min(0.99, (0.9 / rho) ** (1 / m.p)) for lag, a in coefs.items()}
        m = VarModel(m.names, m.lag_spec, m.intercept, coefs, m.sigma)
        worst["pattern"] = max(worst["pattern"], float(np.max(np.abs(limit_fevd(m).omega[:k, k:]))))

        # rescaling and shifting each series leaves the shares unchanged
        d = rng.uniform(0.1, 10, size=n) * rng.choice([-1.0, 1.0], size=n)
        D, Dinv = np.diag(d), np.diag(1 / d)
        moved = VarModel(m.names, m.lag_spec, d * m.intercept + rng.normal(size=n),
                         {lag: D @ a @ Dinv for lag, a in m.coefs.items()}, D @ m.sigma @ D)
        for h in (None, 7):
            gap = np.max(np.abs(influence(m, h).omega - influence(moved, h).omega))
            worst["affine"] = max(worst["affine"], float(gap))

        om, structure, t0_idx = structured_omega(rng)
        # derivative of the equilibrium against a central difference, on an irreducible matrix
        n_full = int(rng.integers(2, 7))
        irr = rng.uniform(0.01, 1, size=(n_full, n_full))
        irr /= irr.sum(axis=1, keepdims=True)
        i, j = rng.choice(n_full, size=2, replace=False)
        d_i, d_rest = pi_sensitivity(irr, i, j)
        fd = central_difference(irr, i, j)
        ana = np.insert(d_rest, i, d_i)
        rel = np.max(np.abs(ana - fd) / np.maximum(np.abs(fd), 1e-6))
        worst["sens_rel"] = max(worst["sens_rel"], float(rel))
        worst["sens_min"] = min(worst["sens_min"], float(d_i))

        tb = transient_block(om, structure)
        worst["radius"] = max(worst["radius"], tb.spectral_radius)
        mus = [absorption(om, structure, s).mu for s in range(structure.k)]
        worst["absorb"] = max(worst["absorb"], float(np.max(np.abs(np.sum(mus, axis=0) - 1))))

        # the long-run row of every transient variable factors through its absorption shares
        powered = np.linalg.matrix_power(om, 4000)
        for v in structure.transient:
            row = powered[structure.names.index(v), :t0_idx]
            gap = np.max(np.abs(local_distribution(om, structure, v).pi - row))
            worst["factor"] = max(worst["factor"], float(gap))

        norms = [np.abs(np.linalg.matrix_power(tb.Te, t)).sum(axis=1).max() for t in (1, 10, 100, 600)]
        monotone &= all(b <= a + 1e-15 for a, b in zip(norms, norms[1:]))
        worst["decay"] = max(worst["decay"], float(norms[-1]))
    elapsed = time.perf_counter() - t0
    checks = {
        "pattern": worst["pattern"] < 1e-10,
        "affine": worst["affine"] < 1e-8,
        "sensitivity": worst["sens_rel"] < 1e-3 and worst["sens_min"] >= 0,
        "radius": worst["radius"] < 1,
        "absorption": worst["absorb"] < 1e-9,
        "factorization": worst["factor"] < 1e-8,
        "decay": monotone and worst["decay"] < 1e-10,
        "runtime": elapsed < 300,
    }
    ok = all(checks.values())
    detail = ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items())
    criterion("2 invariant suite", ok, f"{INSTANCES} instances, {detail}, {elapsed:.1f} s")
    assert checks == {k: True for k in checks}, worst


def test_lyapunov_consistency(criterion):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        m = random_stable_model(rng, int(rng.integers(1, 5)), int(rng.integers(1, 3)), radius=0.9)
        worst = max(worst, float(np.max(np.abs(limit_fevd(m).omega - fevd(m, 2000).omega))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 120
    criterion("3 limit vs long horizon", ok, f"max gap {worst:.1e}, {elapsed:.1f} s")
    assert ok


def _study(datasets, replicates):
    cfg = BootstrapConfig(replicates=replicates, lag_spec=LagSpec((1, 2)), alpha=0.05)
    workers = os.cpu_count() or 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = [run_study(t, datasets, 100, cfg, workers=workers) for t in TEMPLATE_IDS]
    avg = average_row(rows)
    rates = {r.template: r.relation_rate for r in rows}
    return avg["exact_rate"], avg["relation_rate"], rates


def _judge(key, datasets, replicates, exact_min, relation_min, budget, criterion):
    t0 = time.perf_counter()
    exact, relation, rates = _study(datasets, replicates)
    elapsed = time.perf_counter() - t0
    ordering = max(rates, key=rates.get) == "periodic" and min(rates, key=rates.get) == "subexogeneity"
    ok = exact >= exact_min and relation >= relation_min and ordering and elapsed <= budget
    per = " ".join(f"{t}={v:.2f}" for t, v in rates.items())
    criterion(key, ok, f"exact {exact:.2f} (>= {exact_min}), relation {relation:.2f} (>= {relation_min}), "
                       f"{per}, {elapsed / 60:.1f} min")
    assert exact >= exact_min
    assert relation >= relation_min
    assert ordering, rates
    assert elapsed <= budget


def test_accuracy_study_quick_tier(criterion):
    _judge("4 accuracy study (quick tier)", 20, 100, 0.55, 0.65, 30 * 60, criterion)


@pytest.mark.skipif(os.environ.get("CAUSALVAR_FULL_STUDY") != "1", reason="set CAUSALVAR_FULL_STUDY=1")
def test_accuracy_study_full_tier(criterion):
    _judge("4 accuracy study (100 datasets)", 100, 200, 0.65, 0.75, 4 * 3600, criterion)


def fifteen_variable_panel(rng, T=600):
    """Three closed classes of three driving six transient series, lags 1,2,5,7,12,20."""
    lags = LagSpec((1, 2, 5, 7, 12, 20))
    n = 15
    A = np.zeros((lags.max_lag, n, n))
    support = np.zeros((n, n), bool)
    for c in range(3):
        support[3 * c:3 * c + 3, 3 * c:3 * c + 3] = True
    for r in range(9, 15):
        support[r, 9:] = rng.uniform(size=6) < 0.4
        support[r, r] = True
        support[r, rng.choice(9, size=2, replace=False)] = True
    for lag in lags:
        A[lag - 1] = rng.uniform(-1, 1, size=(n, n)) * support / lag
    A *= (0.9 / spectral_radius(companion_matrix(A))) ** (1 / lags.max_lag)
    while spectral_radius(companion_matrix(A)) > 0.9:
        A *= 0.99
    names = tuple(f"y{i}" for i in range(1, n + 1))
    model = VarModel(names, lags, np.zeros(n), {lag: A[lag - 1] for lag in lags}, np.eye(n))
    truth = CausalStructure((names[0:3], names[3:6], names[6:9]), names[9:])
    return simulate(model, T, rng, burn=300), truth, lags


def test_finite_horizon_fifteen_variables(criterion):
    rng = np.random.default_rng(15)
    t0 = time.perf_counter()
    panel, truth, lags = fifteen_variable_panel(rng)
    om = influence(fit_var(panel, lags), 120)
    sums = [om.omega.sum(axis=1), [solve_pi(om).pi.sum()]]
    sums += [[class_distribution(om, truth, s).pi.sum()] for s in range(truth.k)]
    sums.append([solve_pi_quota(om, truth, [0.2, 0.3, 0.5]).pi.sum()])
    mus = np.sum([absorption(om, truth, s, horizon=120).mu for s in range(truth.k)], axis=0)
    sums.append(mus + np.linalg.matrix_power(transient_block(om, truth).Te, 120).sum(axis=1))
    sums += [[local_distribution(om, truth, v, horizon=120).pi.sum()] for v in truth.transient]
    cfg = BootstrapConfig(replicates=100, lag_spec=lags, horizon=120, seed=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        found = identify(panel, cfg).structure
    gap = max(float(np.max(np.abs(np.asarray(s) - 1))) for s in sums)
    elapsed = time.perf_counter() - t0
    ok = gap < 1e-8 and elapsed < 600 and set(found.names) == set(panel.names)
    criterion("5 fifteen-variable finite horizon", ok, f"max |sum - 1| {gap:.1e}, {elapsed:.1f} s")
    assert gap < 1e-8
    assert elapsed < 600


def _cli(*args):
    res = subprocess.run([sys.executable, "-m", "causalvar", *map(str, args)], capture_output=True, check=False)
    assert res.returncode == 0, res.stderr.decode()
    return res.stdout


def test_cli_determinism(criterion, tmp_path):
    from causalvar.panel import write_panel
    from causalvar.simgen import generate

    path = tmp_path / "panel.csv"
    write_panel(generate("subexogeneity", 120, 8)[0], path)
    ident = ["identify", path, "--lags", "1,2", "--replicates", "100", "--seed", "5"]
    study = ["simulate", "--template", "periodic", "--datasets", "3", "--replicates", "100", "--seed", "5"]
    same_identify = _cli(*ident) == _cli(*ident)
    same_study = _cli(*study, "--workers", "1") == _cli(*study, "--workers", "3")
    ok = same_identify and same_study
    criterion("6 CLI determinism", ok, f"identify rerun {same_identify}, simulate serial vs parallel {same_study}")
    assert ok
