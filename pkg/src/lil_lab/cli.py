"""Config-driven experiment runner.

    lil-lab run <config.json> [--threads N] [--out DIR]
    lil-lab verify [--module NAME]

Each run writes ``<stem>.csv`` (RFC 4180) and ``<stem>.json`` (summary, with
the CSV columns documented under ``"schema"``), where the stem is the config's
``"output"`` key or else the config file name.  Exit codes:
0 success, 1 invariant failure under ``verify``, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import cascade, disc, field, gauges, martingale, rng, threshold, verify
from .errors import ConfigError, LabError, RegimeError, SaturationError

# -- configuration schema -----------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer"}
_GAUGE = {
    "type": "object",
    "properties": {"kind": {"enum": ["constant", "shifted_log_power", "power_law", "tabulated"]},
                   "B": _POS, "alpha": _NUM, "shift": _POS, "delta": _NUM, "scale": _POS,
                   "knots": {"type": "array", "items": {"type": "array", "items": _NUM,
                                                        "minItems": 2, "maxItems": 2}}},
    "required": ["kind"], "additionalProperties": False,
}
_FIELD = {
    "type": "object",
    "properties": {"name": {"enum": ["vertical_log", "vertical_log_power", "harmonic_linear",
                                     "harmonic_height", "lacunary_harmonic"]},
                   "d": {"enum": [1, 2]}, "alpha": _NUM, "shift": _POS,
                   "coefficients": {"type": "array", "items": _NUM}, "y_min": _POS},
    "required": ["name"], "additionalProperties": False,
}
_SEQUENCE = {
    "type": "object",
    "properties": {"kind": {"enum": ["explicit", "constant", "power_of_index", "geometric", "gauge"]},
                   "values": {"type": "array", "items": _POS}, "value": _POS, "beta": _NUM,
                   "delta": _NUM, "gauge": _GAUGE},
    "required": ["kind"], "additionalProperties": False,
}
_DISCMAP = {
    "type": "object",
    "properties": {"kind": {"enum": ["identity", "monomial", "constant", "blaschke"]},
                   "k": _INT, "c": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                   "zeros": {"type": "array", "items": {"type": "array", "items": _NUM,
                                                        "minItems": 2, "maxItems": 2}},
                   "phase": _NUM},
    "required": ["kind"], "additionalProperties": False,
}
_COMMON = {"experiment": {}, "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
           "threads": {"type": "integer", "minimum": 1}, "output": {"type": "string"}}

_EXPERIMENTS = {
    "martingale-lil": {
        "d": {"enum": [1, 2]}, "scales": {"oneOf": [{"const": "unit"}, _GAUGE]},
        "depth": {"type": "integer", "minimum": 1, "maximum": 2**20},
        "paths": {"type": "integer", "minimum": 1}, "window": {"type": "array", "items": _INT,
                                                                "minItems": 2, "maxItems": 2},
        "threshold": _POS,
    },
    "field-lil": {
        "field": _FIELD, "psi": _GAUGE, "x": {"type": "array", "items": _NUM},
        "heights": {"type": "array", "items": _POS},
    },
    "cascade": {
        "weights": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 4},
        "depth": {"type": "integer", "minimum": 1, "maximum": 24},
        "half_width": {"type": "integer", "minimum": 1},
        "permutation_seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1}, "heights": {"type": "array", "items": _POS},
    },
    "disc": {
        "map": _DISCMAP, "directions": {"type": "integer", "minimum": 1},
        "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
    },
    "threshold": {
        "sequence": _SEQUENCE, "n": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "gauge": _GAUGE, "ladder": {"type": "array", "items": _POS},
    },
    "verify": {"modules": {"type": "array", "items": {"enum": list(verify.SUITES)}}},
}
_REQUIRED = {"martingale-lil": ["d", "depth", "paths"], "field-lil": ["field", "psi", "heights"],
             "cascade": ["weights", "depth"], "disc": ["map", "radii"], "threshold": [], "verify": []}


def config_schema(experiment):
    props = dict(_COMMON)
    props["experiment"] = {"const": experiment}
    props.update(_EXPERIMENTS[experiment])
    return {"type": "object", "properties": props, "required": ["experiment"] + _REQUIRED[experiment],
            "additionalProperties": False}


class ConfigProblem(Exception):
    pass


def load_config(path):
    """Parse and validate; raises ConfigProblem with a line or field diagnostic."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigProblem(f"{path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigProblem(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict) or cfg.get("experiment") not in _EXPERIMENTS:
        raise ConfigProblem(f"{path}: field 'experiment' must be one of {sorted(_EXPERIMENTS)}")
    validator = jsonschema.Draft202012Validator(config_schema(cfg["experiment"]))
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{path}: field '{where}': {e.message}")
        raise ConfigProblem("\n".join(lines))
    return cfg


# -- output -----------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    Path(path).write_bytes(buf.getvalue().encode())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


# -- experiments ---------------------------------------------------------------------------

def _pmap(func, items, threads):
    """Order-preserving map; each item is computed independently of the split."""
    if threads <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(func, items))


def _chunks(n, size):
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def _path_x(digits, d):
    # the point of [0,1)^d whose first binary digits follow the tower
    k = min(52, digits.shape[1])
    bits = (digits[:, :k, None] >> np.arange(d)) & 1
    return (bits * 2.0 ** -np.arange(1, k + 1)[None, :, None]).sum(axis=1)


def _guarded_ratio(value, qv):
    # |T|/sqrt(V log log V) with NaN wherever V <= e^e
    value, qv = np.asarray(value, float), np.asarray(qv, float)
    ok = qv > martingale.E_E
    safe = np.where(ok, qv, 16.0)
    return np.where(ok, np.abs(value) / np.sqrt(safe * np.log(np.log(safe))), np.nan)


def run_martingale_lil(cfg, threads):
    d, n, P, seed = cfg["d"], cfg["depth"], cfg["paths"], cfg.get("seed", 0)
    lo, hi = cfg.get("window", [max(1, n // 16), n])
    thr = cfg.get("threshold", 3.0)
    scales = 1.0
    if cfg.get("scales", "unit") != "unit":
        g = gauges.from_spec(cfg["scales"])
        scales = lambda k: float(g._value_s(k * math.log(2.0)))  # s_k = psi(2^-k), no underflow
    digits = martingale.random_digits(d, n, P, seed)
    record = sorted({int(2**k) for k in range(int(math.log2(n)) + 1)} | {lo, hi})
    record = [m for m in record if 1 <= m <= n]

    def work(span):
        a, b = span
        ens = martingale.simulate_paths(d, n, scales, seed, digits[a:b])
        x = _path_x(digits[a:b], d)
        rows = []
        for i in range(b - a):
            for m in record:
                qv = ens.qv[i, m]
                ratio = float(_guarded_ratio(ens.values[i, m], qv))
                rows.append({"seed": seed, "path": a + i, "x": ";".join(repr(float(v)) for v in x[i]),
                             "n": m, "T_n": ens.values[i, m], "QV_n": qv, "ratio": ratio})
        r = _guarded_ratio(ens.values[:, lo:hi + 1], ens.qv[:, lo:hi + 1])
        run_max = np.max(np.where(np.isnan(r), -np.inf, r), axis=1)
        return rows, run_max, r[:, -1]

    parts = _pmap(work, _chunks(P, 250), threads)
    rows = [r for p in parts for r in p[0]]
    run_max = np.concatenate([p[1] for p in parts])
    term = np.concatenate([p[2] for p in parts])
    trips = sum(1 for r in rows if math.isnan(r["ratio"]))
    summary = {"paths": P, "depth": n, "window": [lo, hi], "threshold": thr, "guard_trips": trips}
    if np.all(np.isfinite(term)):
        frac = float(np.mean(run_max > thr))
        med = float(np.median(term))
        summary.update(frac_exceeding=frac, max_ratio=float(np.max(run_max)), median_terminal_ratio=med,
                       **{"pass": bool(frac < 0.01 and 0.2 <= med <= 2.0)})
    else:
        summary.update(frac_exceeding=None, max_ratio=None, median_terminal_ratio=None, **{"pass": None})
    schema = {"seed": "run seed", "path": "path number", "x": "point of Q0 from the first 52 tower digits",
              "n": "generation", "T_n": "martingale value", "QV_n": "quadratic variation",
              "ratio": "|T_n|/sqrt(QV log log QV), nan where QV <= e^e"}
    return schema, rows, summary


def run_field_lil(cfg, threads):
    F = field.from_spec(cfg["field"])
    psi = gauges.from_spec(cfg["psi"])
    xs = cfg.get("x", [0.0])
    rows, trips = [], 0
    for x in xs:
        for y in cfg["heights"]:
            row = {"x": x, "y": y, "numerator": float(field.lil_numerator(F, x, y)),
                   "denominator": math.nan, "ratio": math.nan, "guard": ""}
            try:
                den = gauges.lil_denominator(psi, y)
                row.update(denominator=den, ratio=abs(row["numerator"]) / den)
            except RegimeError:
                row["guard"] = "regime"
                trips += 1
            rows.append(row)
    finite = [r["ratio"] for r in rows if math.isfinite(r["ratio"])]
    summary = {"field": F.name, "max_ratio": max(finite) if finite else None, "guard_trips": trips}
    schema = {"x": "abscissa", "y": "height", "numerator": "u - int_y^1 t lap u dt",
              "denominator": "sqrt(Psi log log Psi)", "ratio": "|numerator|/denominator",
              "guard": "non-empty when the row is outside the LIL regime"}
    return schema, rows, summary


def run_cascade(cfg, threads):
    seed = cfg.get("seed", 0)
    m = cascade.CascadeMeasure(cfg["weights"], cfg["depth"], cfg.get("half_width", 8),
                               permutation_seed=cfg.get("permutation_seed"))
    P = cascade.PoissonExtension(m)
    S = cfg.get("samples", 20)
    heights = cfg.get("heights", [2.0**-k for k in range(6, 12)])
    X = rng.stream(seed, 0x636173).uniform(size=(S, m.d))

    def work(span):
        a, b = span
        return cascade.a_squared_profile(P, X[a:b], heights)

    a2 = np.concatenate(_pmap(work, _chunks(S, 10), threads), axis=0)
    rows, trips = [], 0
    for i in range(S):
        v, g = P.sums(np.broadcast_to(X[i], (len(heights), m.d)), np.asarray(heights), 1)
        for j, y in enumerate(heights):
            try:
                lil = cascade.log_v_lil_ratio(P, X[i], y, a2=a2[i, j])
            except RegimeError:
                lil, trips = math.nan, trips + 1
            gn = float(np.linalg.norm(g[j]))
            rows.append({"x": ";".join(repr(float(c)) for c in X[i]), "y": y, "v": v[j], "grad_norm": gn,
                         "harnack": y * gn / v[j], "A2": a2[i, j], "lil_ratio": lil})
    summary = {"weights": list(m.p), "depth": m.depth, "half_width": m.half_width,
               "inf_A2_over_log": float(np.min(a2 / -np.log(heights))),
               "harnack_sup": max(r["harnack"] for r in rows), "guard_trips": trips}
    if not np.allclose(m.p, m.p[0]):
        rep = cascade.cascade_lower_bound_check(P, heights, S, seed=seed, a2=a2, X=X)
        summary.update(best_c1=rep.best_c1, best_c2=rep.best_c2, step_bound_holds=rep.step_bound_holds,
                       oscillation=rep.oscillation)
    schema = {"x": "sample point", "y": "height", "v": "Poisson extension", "grad_norm": "|grad v|",
              "harnack": "y|grad v|/v", "A2": "int_y^1 t|grad v|^2/v^2 dt",
              "lil_ratio": "|log v + A2|/sqrt(L log log L), nan where guarded"}
    return schema, rows, summary


def run_disc(cfg, threads):
    f = disc.from_spec(cfg["map"])
    n_dir = cfg.get("directions", 16)
    dirs = disc.directions(n_dir)
    radii = cfg["radii"]

    def work(i):
        xi = dirs[i]
        out = []
        for r in radii:
            row = {"angle": 2 * math.pi * i / n_dir, "r": r, "d_h": math.nan, "A2": math.nan,
                   "ratio": math.nan, "guard": ""}
            try:
                row["d_h"] = disc.hyperbolic_distance(complex(f(r * xi)), 0j)
                row["A2"] = disc.a_squared_f(f, xi, r)
                row["ratio"] = disc.disc_lil_ratio(f, xi, r, a2=row["A2"])
            except RegimeError:
                row["guard"] = "regime"
            except SaturationError:
                row["guard"] = "saturation"
            out.append(row)
        return out

    rows = [r for part in _pmap(work, range(n_dir), threads) for r in part]
    finite = [r["ratio"] for r in rows if math.isfinite(r["ratio"])]
    summary = {"map": f.kind, "metric": disc.METRIC, "max_ratio": max(finite) if finite else None,
               "median_ratio": float(np.median(finite)) if finite else None,
               "guard_trips": sum(1 for r in rows if r["guard"])}
    schema = {"angle": "direction angle", "r": "radius", "d_h": f"d_h(f(r xi), 0), metric {disc.METRIC}",
              "A2": "A^2(f)(xi, r)", "ratio": "|d_h - A2|/sqrt(L log log L)", "guard": "guard trip"}
    return schema, rows, summary


def run_threshold(cfg, threads):
    rows, summary = [], {}
    if "sequence" in cfg:
        s = threshold.from_spec(cfg["sequence"])
        ns = cfg.get("n", [2**k for k in range(6, 21)])
        cond = threshold.check_conditions(s, max(16, min(max(ns), 2**16)))
        ratios = threshold.improvement_ratio_ladder(s, ns)
        for n, r in zip(ns, ratios):
            rows.append({"n": n, "y": "", "ratio": r, "monotone": cond.monotone,
                         "log_concave": cond.log_concave, "threshold_consistent": cond.threshold_consistent})
        summary.update(sequence=s.kind, doubling_constant=cond.doubling_constant, monotone=cond.monotone,
                       log_concave=cond.log_concave, tail_slope=cond.trend_tail_slope,
                       threshold_failed=cond.threshold_failed)
    if "gauge" in cfg:
        g = gauges.from_spec(cfg["gauge"])
        rep = threshold.continuous_threshold_check(g, cfg.get("ladder"))
        for y, r in zip(rep.heights, rep.ratio):
            rows.append({"n": "", "y": y, "ratio": r})
        summary.update(gauge=repr(g), continuous_decreasing=rep.decreasing, concave=rep.concave)
    schema = {"n": "sequence length", "y": "height (gauge rows)", "ratio": "improvement ratio",
              "monotone": "(i)", "log_concave": "(ii)", "threshold_consistent": "(iii)"}
    return schema, rows, summary


def run_verify(cfg, threads):
    results = verify.run(cfg.get("modules"), cfg.get("seed", 0))
    rows = [dict(module=m, **c.as_row()) for m, checks in results.items() for c in checks]
    summary = {"pass": all(r["passed"] for r in rows), "checks": len(rows),
               "failed": [f"{r['module']}: {r['check']}" for r in rows if not r["passed"]]}
    return {"module": "suite", "check": "invariant", "passed": "outcome", "value": "observed",
            "bound": "allowed"}, rows, summary


RUNNERS = {"martingale-lil": run_martingale_lil, "field-lil": run_field_lil, "cascade": run_cascade,
           "disc": run_disc, "threshold": run_threshold, "verify": run_verify}


def run(cfg, threads=1, out_dir=".", stem=None):
    """Run a validated config; returns (summary dict, csv path, json path)."""
    exp = cfg["experiment"]
    schema, rows, summary = RUNNERS[exp](cfg, threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.get("output") or stem or exp
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    write_csv(csv_path, list(schema), rows)
    doc = {"experiment": exp, "seed": cfg.get("seed", 0), "threads": threads, "rows": len(rows),
           "schema": schema, "summary": summary}
    json_path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return summary, csv_path, json_path


# -- entry point ---------------------------------------------------------------------------

def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("LIL_LAB_THREADS")
    return int(env) if env and env.isdigit() and int(env) > 0 else 1


def main(argv=None):
    ap = argparse.ArgumentParser(prog="lil-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--threads", type=int)
    p_run.add_argument("--out", default=".")
    p_ver = sub.add_parser("verify", help="run the invariant suites")
    p_ver.add_argument("--module", choices=list(verify.SUITES), action="append")
    p_ver.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if args.command == "verify":
        ok = True
        for name, checks in verify.run(args.module, args.seed).items():
            for c in checks:
                ok &= c.passed
                print(f"{'PASS' if c.passed else 'FAIL'}  {name:<10} {c.name}  ({c.value:.3g} vs {c.bound:.3g})")
        return 0 if ok else 1

    try:
        cfg = load_config(args.config)
    except ConfigProblem as exc:
        print(exc, file=sys.stderr)
        return 2
    threads = _threads(args.threads)
    try:
        summary, csv_path, json_path = run(cfg, threads, args.out, Path(args.config).stem)
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {csv_path} and {json_path}")
    if cfg["experiment"] == "verify" and not summary["pass"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
