"""Acceptance runs, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting, with the tolerances and runtime budgets fixed below.
"""
import csv
import json
import math
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from lil_lab import cascade, cli, field, gauges, martingale, threshold, verify
from lil_lab.rng import stream

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _cli_run(config, out_dir, threads=1):
    cfg = cli.load_config(config)
    start = time.perf_counter()
    summary, csv_path, _ = cli.run(cfg, threads, out_dir, Path(config).stem)
    return summary, csv_path, time.perf_counter() - start


@pytest.fixture(scope="module")
def martingale_run(tmp_path_factory):
    return _cli_run(CONFIGS / "martingale_lil.json", tmp_path_factory.mktemp("first"))


@pytest.mark.criterion(1)
def test_exact_identities(criterion):
    start = time.perf_counter()
    g = stream(1, 1)
    x = g.uniform(-5, 5, size=1000)
    y = np.exp(g.uniform(math.log(1e-12), 0, size=1000))
    t_err = float(np.max(np.abs(field.transform_T(field.vertical_log(), x, y) - 1)))
    v = cascade.height_function()
    a2_err = num_err = 0.0
    for yy in (0.5, 2.0**-12, 1e-6, 1e-12):
        a2 = cascade.a_squared_v(v, 0.3, yy)
        a2_err = max(a2_err, abs(a2 - math.log(1 / yy)))
        num_err = max(num_err, abs(math.log(float(v(0.3, yy))) + a2))
    dt = time.perf_counter() - start
    ok = t_err <= 1e-6 and a2_err <= 1e-8 and num_err <= 1e-8 and dt < 5
    criterion(ok, f"|T-1|={t_err:.2e} |A2-log(1/y)|={a2_err:.2e} |log v+A2|={num_err:.2e} time={dt:.1f}s")
    assert ok


def _green_fields():
    # PoissonLog over a 512-cell cascade keeps the 100-block run inside the budget
    small = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 7, 2))
    fields = [(F, floor) for F, floor in verify.closed_form_fields() if F.name != "poisson_log"]
    return fields + [(cascade.poisson_log_field(small), small.y_floor)]


@pytest.mark.criterion(2)
def test_green_identity(criterion):
    start = time.perf_counter()
    g = stream(2, 2)
    worst, where = 0.0, ""
    for F, floor in _green_fields():
        blocks = verify._random_blocks(g, 100, d=F.dim, floor=floor)
        res = max(field.green_identity_residual(F, R) for R in blocks)
        if res >= worst:
            worst, where = res, f"{F.name} d={F.dim}"
    dt = time.perf_counter() - start
    ok = worst <= 1e-6 and dt < 60
    criterion(ok, f"max residual {worst:.2e} ({where}) over 100 blocks x {len(_green_fields())} fields, "
                  f"time={dt:.1f}s")
    assert ok


@pytest.mark.criterion(3)
def test_martingale_lil(criterion, martingale_run):
    s, _, dt = martingale_run
    frac, med = s["frac_exceeding"], s["median_terminal_ratio"]
    ok = frac is not None and frac < 0.01 and 0.2 <= med <= 2.0 and dt < 60
    criterion(ok, f"fraction over 3.0 = {frac}, median terminal ratio = {med}, time={dt:.1f}s")
    assert ok


@pytest.mark.criterion(4)
def test_field_martingale(criterion):
    start = time.perf_counter()
    lac = field.unit_lacunary(2.0**-22)
    psi = gauges.Constant(1.5)
    M = martingale.build_from_field(lac, psi, 12)
    gap = max(float(np.max(a - b)) for a, b in zip(M.mean_defects(), M.mean_tolerances()))
    rep = martingale.increment_bound_check(M, psi, seed=4)
    dt = time.perf_counter() - start
    ok = gap <= 0 and rep.increments.passed and rep.quadratic.passed and dt < 120
    criterion(ok, f"max(defect - tol_mart)={gap:.2e}, increment C={rep.increments.constant:.3g} "
                  f"(validation {rep.increments.validation_max:.3g}), QV C={rep.quadratic.constant:.3g} "
                  f"(validation {rep.quadratic.validation_max:.3g}), time={dt:.1f}s")
    assert ok


@pytest.mark.criterion(5)
def test_cascade_lower_bound(criterion, tmp_path):
    s, csv_path, dt_run = _cli_run(CONFIGS / "cascade.json", tmp_path)
    start = time.perf_counter()
    rows = list(csv.DictReader(csv_path.open(newline="")))
    x = np.array([float(r["x"]) for r in rows])
    y = np.array([float(r["y"]) for r in rows])
    h14 = max(float(r["harnack"]) for r in rows)
    finer = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 15, 8))
    h15 = float(np.max(cascade.harnack_ratio(finer, x, y)))
    drift = abs(h15 / h14 - 1)
    dt = dt_run + time.perf_counter() - start
    inf = s["inf_A2_over_log"]
    ok = inf >= 0.005 and drift <= 0.05 and dt < 600
    criterion(ok, f"inf A2/log(1/y) = {inf:.4g} over {len(rows)} (x, y), Harnack sup {h14:.4g} -> {h15:.4g} "
                  f"(N=15, change {drift:.1e}), time={dt:.0f}s")
    assert ok


@pytest.mark.criterion(6)
def test_disc_suite(criterion):
    start = time.perf_counter()
    checks = verify.disc_suite(seed=0)
    dt = time.perf_counter() - start
    failed = [c.name for c in checks if not c.passed]
    ok = not failed and dt < 120
    parts = ", ".join(f"{c.name}: {c.value:.3g} (bound {c.bound:.3g})" for c in checks)
    criterion(ok, f"{parts}; time={dt:.1f}s" + (f"; failed: {failed}" if failed else ""))
    assert ok


@pytest.mark.criterion(7)
def test_threshold_suite(criterion):
    start = time.perf_counter()
    p = threshold.power_of_index(1.0)
    cond = threshold.check_conditions(p)
    r = threshold.improvement_ratio_ladder(p, 2 ** np.arange(6, 21))
    power_ok = cond.all_hold and bool(np.all(np.diff(r) < 0)) and r[-1] < 0.02
    geo = threshold.geometric(0.5)
    g100, g400 = threshold.improvement_ratio(geo, 100), threshold.improvement_ratio(geo, 400)
    geo_ok = threshold.check_conditions(geo).threshold_failed and g400 > g100
    n = 10**6
    const = threshold.improvement_ratio(threshold.constant(1.0), n)
    const_err = abs(const - math.sqrt(n * math.log(math.log(n))) / n)
    dt = time.perf_counter() - start
    ok = power_ok and geo_ok and const_err <= 1e-9 and dt < 10
    criterion(ok, f"power ratio at 2^20 = {r[-1]:.4g} (decreasing {bool(np.all(np.diff(r) < 0))}), "
                  f"geometric {g100:.4g} -> {g400:.4g}, constant error {const_err:.1e}, time={dt:.2f}s")
    assert ok


@pytest.mark.criterion(8)
def test_reproducible_bytes(criterion, martingale_run, tmp_path):
    _, first, _ = martingale_run
    _, second, _ = _cli_run(CONFIGS / "martingale_lil.json", tmp_path / "m")
    same = {"martingale_lil": first.read_bytes() == second.read_bytes()}
    for name in ("threshold_geometric", "threshold_power", "disc"):
        a = _cli_run(CONFIGS / f"{name}.json", tmp_path / "a")[1].read_bytes()
        b = _cli_run(CONFIGS / f"{name}.json", tmp_path / "b")[1].read_bytes()
        same[name] = a == b
    ok = all(same.values())
    criterion(ok, ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in same.items()))
    assert ok
