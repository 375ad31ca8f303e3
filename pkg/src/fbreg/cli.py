"""Command line front-end.

    fbreg solve CONFIG            solve and write <output_dir>/solution.csv (+ .json sidecar)
    fbreg verify CONFIG SNAPSHOT  run the configured harness checks on a snapshot
    fbreg blowup SNAPSHOT --x X Y --r R
    fbreg counterexample [--family FILE] [--radii ...]
    fbreg props [--seed S] [--count N]

Exit codes: 0 success, 1 config/IO error, 2 non-convergence (solve) or failed
hard checks (verify, props).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import counterexample as cx
from . import harness
from .grid import Grid2, GridMismatch, ScalarField
from .operators import OperatorSpec
from .props import run_property_suite
from .snapshot import fmt, read_snapshot, write_snapshot
from .solver import (
    InvalidBoundary,
    NonConvergence,
    ObstacleProblemSpec,
    Solution,
    boundary_field,
    free_boundary_nodes,
    residual,
    solve,
)

log = logging.getLogger("fbreg")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    operator: OperatorSpec
    grid: Grid2
    boundary: str
    checks: list = field(default_factory=list)
    output_dir: Path = Path("out")
    K: float = 1.0
    tol: float = 1e-6
    max_iters: int = 100

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path(".")) -> "ExperimentConfig":
        try:
            op = OperatorSpec.from_dict(d.get("operator", {"kind": "Laplace"}))
            grid = Grid2.from_dict(d["grid"])
            boundary = str(d.get("boundary", "zero"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        if ":" not in boundary and boundary != "zero":
            path = (base / boundary) if not Path(boundary).is_absolute() else Path(boundary)
            if not path.exists():
                raise ConfigError(f"boundary file {path} does not exist")
            boundary = str(path)
        checks = list(d.get("checks", []))
        for c in checks:
            if not isinstance(c, dict) or c.get("name") not in CHECKS:
                name = c.get("name") if isinstance(c, dict) else c
                raise ConfigError(f"unknown check {name!r}; known: {sorted(CHECKS)}")
        out = Path(d.get("output_dir", "out"))
        if not out.is_absolute():
            out = base / out
        return cls(op, grid, boundary, checks, out, float(d.get("K", 1.0)),
                   float(d.get("tol", 1e-6)), int(d.get("max_iters", 100)))


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key == "n_cells":
            d.setdefault("grid", {})["n_cells"] = val
        elif key == "half_width":
            d.setdefault("grid", {})["half_width"] = val
        else:
            d[key] = val
    return ExperimentConfig.from_dict(d, base=path.parent)


def _dyadic_radii(grid: Grid2, r_max: float = 0.25) -> list:
    radii, r = [], r_max
    while r >= 8 * grid.h * (1 - 1e-12):
        radii.append(r)
        r /= 2
    return radii


def _centers(params: dict, sol: Solution, within: float = 0.5) -> list:
    """Explicit centers, or 'free_boundary': snapped free-boundary nodes in B_within."""
    centers = params.get("centers", "free_boundary")
    if centers == "free_boundary":
        pts = [sol.grid.node(i, j) for i, j in free_boundary_nodes(sol)]
        lim = params.get("within", within)
        return [tuple(float(c) for c in p) for p in pts if math.hypot(*p) <= lim + 1e-12]
    return [tuple(float(c) for c in p) for p in centers]


# Each check returns a list of records: dicts with keys check, x, r, passed
# (True/False for hard outcomes, None for report-only) plus payload fields.


def check_residual(ctx, params):
    res = residual(ctx.operator, ctx.sol.u)
    tol = float(params.get("tol", ctx.tol))
    return [{"check": "residual", "x": None, "r": None, "residual": res, "tol": tol, "passed": res <= tol}]


def check_hessian_sup(ctx, params):
    center = tuple(params.get("center", (0.0, 0.0)))
    radius = float(params.get("radius", 0.5))
    val = harness.hessian_sup(ctx.sol.u, radius, center)
    rec = {"check": "hessian_sup", "x": center, "r": radius, "hessian_sup": val, "passed": None}
    if "max" in params:
        rec["passed"] = val <= float(params["max"])
    return [rec]


def check_dyadic_projection(ctx, params):
    center = tuple(params.get("center", (0.0, 0.0)))
    recs = harness.dyadic_projection_track(ctx.operator, ctx.sol.u, center, float(params.get("r_max", 0.25)))
    out = []
    for rec in recs:
        d = rec.to_dict()
        ok = abs(rec.level_value - 1.0) <= 1e-10
        out.append({"check": "dyadic_projection", "x": center, **d, "passed": ok})
    return out


def check_volume_decay(ctx, params):
    center = tuple(params.get("center", (0.0, 0.0)))
    rows = harness.volume_decay(ctx.operator, ctx.sol, center, float(params.get("r_max", 0.25)),
                                float(params.get("M", 10.0)))
    return [{"check": "volume_decay", "x": center, **row, "passed": None} for row in rows]


def check_nondegeneracy(ctx, params):
    lam1 = float(params.get("lambda1", ctx.operator.ellipticity.lambda1))
    radii = params.get("radii") or _dyadic_radii(ctx.sol.grid)
    out = []
    for x0 in _centers(params, ctx.sol):
        for r, lhs, rhs, ok in harness.nondegeneracy_check(ctx.sol.u, x0, radii, lam1):
            out.append({"check": "nondegeneracy", "x": x0, "r": r, "lhs": lhs, "rhs": rhs, "passed": ok})
    return out


def check_min_diameter(ctx, params):
    n_dirs = int(params.get("n_dirs", 64))
    radii = params.get("radii") or _dyadic_radii(ctx.sol.grid)
    mask = ScalarField(ctx.sol.grid, ctx.sol.active_mask)
    h = ctx.sol.grid.h
    out = []
    for x in _centers(params, ctx.sol):
        for r in radii:
            delta = harness.min_diameter(mask, x, r, n_dirs)
            rec = {"check": "min_diameter", "x": x, "r": r, "delta": delta, "n_dirs": n_dirs, "passed": None}
            if "expect" in params:
                slack = 2 / n_dirs + h / r
                rec["passed"] = abs(delta - float(params["expect"])) <= slack
            out.append(rec)
    return out


def check_halfspace_fit(ctx, params):
    x = tuple(params.get("x", (0.0, 0.0)))
    r = float(params.get("r", 0.25))
    fit = harness.halfspace_fit(harness.rescale(ctx.sol.u, x, r, int(params.get("out_resolution", 64))),
                                ctx.operator.ellipticity)
    rec = {"check": "halfspace_fit", "x": x, "r": r, "gamma": fit.gamma, "e": list(fit.e),
           "sup_err": fit.sup_err, "passed": None}
    if "max_sup_err" in params:
        rec["passed"] = fit.sup_err <= float(params["max_sup_err"])
    return [rec]


def check_monotonicity(ctx, params):
    e = tuple(params.get("e", (1.0, 0.0)))
    c0 = float(params.get("C0", 1.0))
    out = []
    for variant in params.get("variants", ["u", "grad_sq"]):
        m = harness.directional_monotonicity(ctx.sol.u, e, c0, variant, ctx.operator.ellipticity)
        out.append({"check": "monotonicity", "x": None, "r": None, "variant": variant, "e": list(e), "C0": c0,
                    "eps0": m.eps0, "min_half": m.min_half, "threshold": m.threshold, "passed": m.passed})
    return out


def check_monotonicity_cone(ctx, params):
    x = tuple(params.get("x", (0.0, 0.0)))
    r = float(params.get("r", 0.25))
    res = harness.monotonicity_cone(ctx.sol.u, x, r, float(params.get("C0", 1.0)), ctx.operator.ellipticity)
    rec = {"check": "monotonicity_cone", "x": x, "r": r, "fitted": res.fitted,
           "e_axis": None if res.e_axis is None else list(res.e_axis), "s": res.s, "passed": None}
    if "max_s" in params:
        rec["passed"] = bool(res.fitted and res.s is not None and res.s <= float(params["max_s"]))
    return [rec]


def check_cone_barrier(ctx, params):
    theta1 = float(params.get("theta1", 3 * math.pi / 5))
    rep = harness.cone_barrier_report(theta1, ctx.operator.ellipticity)
    return [{"check": "cone_barrier", "x": None, "r": None, **rep, "passed": None}]


CHECKS = {
    "residual": check_residual,
    "hessian_sup": check_hessian_sup,
    "dyadic_projection": check_dyadic_projection,
    "volume_decay": check_volume_decay,
    "nondegeneracy": check_nondegeneracy,
    "min_diameter": check_min_diameter,
    "halfspace_fit": check_halfspace_fit,
    "monotonicity": check_monotonicity,
    "monotonicity_cone": check_monotonicity_cone,
    "cone_barrier": check_cone_barrier,
}


@dataclass
class _Context:
    operator: OperatorSpec
    sol: Solution
    tol: float


def _sort_key(rec):
    x = rec.get("x")
    x = (math.inf, math.inf) if x is None else tuple(x)
    r = rec.get("r")
    return (rec["check"], x, -math.inf if r is None else r)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def write_reports(records, out_dir: Path) -> tuple:
    out_dir.mkdir(parents=True, exist_ok=True)
    js = out_dir / "report.json"
    js.write_text(json.dumps(_jsonable(records), indent=2, sort_keys=True) + "\n")
    rows = []
    for rec in records:
        x = rec.get("x")
        rows.append([rec["check"],
                     "" if x is None else fmt(x[0]), "" if x is None else fmt(x[1]),
                     _csv_cell(rec.get("r")), _csv_cell(rec.get("passed"))])
    csv_path = out_dir / "report.csv"
    with open(csv_path, "w") as fh:
        fh.write("check,x,y,r,passed\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return js, csv_path


def _max_workers() -> int:
    try:
        return max(1, int(os.environ.get("FBREG_THREADS", "1")))
    except ValueError:
        return 1


def _solution_from_snapshot(path) -> tuple:
    u, active, meta = read_snapshot(path)
    thr = float(meta.get("threshold", u.grid.h**2))
    if active is None:
        active = u.values > thr
    sol = Solution(u, active, int(meta.get("iterations", 0)), float(meta.get("residual", float("nan"))), thr)
    return sol, meta


def run_solve(cfg: ExperimentConfig) -> int:
    bnd = boundary_field(cfg.boundary, cfg.grid, cfg.operator)
    problem = ObstacleProblemSpec(cfg.operator, cfg.grid, bnd, cfg.K)
    status = EXIT_OK
    try:
        sol = solve(problem, cfg.tol, cfg.max_iters)
    except NonConvergence as exc:
        log.warning("%s", exc)
        sol, status = exc.solution, EXIT_FAIL
    csv_path = cfg.output_dir / "solution.csv"
    write_snapshot(csv_path, sol, cfg.operator, cfg.tol, {"boundary": cfg.boundary, "K": cfg.K})
    print(f"residual {fmt(sol.residual)}  iterations {sol.iterations}  -> {csv_path}")
    return status


def run_verify(cfg: ExperimentConfig, snapshot_path) -> int:
    sol, meta = _solution_from_snapshot(snapshot_path)
    if sol.grid != cfg.grid:
        raise GridMismatch(f"snapshot grid {sol.grid} does not match config grid {cfg.grid}")
    ctx = _Context(cfg.operator, sol, float(meta.get("tol", cfg.tol)))
    checks = cfg.checks or [{"name": "residual"}]
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        batches = list(pool.map(lambda c: CHECKS[c["name"]](ctx, c), checks))
    records = sorted((r for b in batches for r in b), key=_sort_key)
    write_reports(records, cfg.output_dir)
    summary = {}
    for rec in records:
        s = summary.setdefault(rec["check"], [0, 0, 0])
        s[0 if rec["passed"] is True else 1 if rec["passed"] is False else 2] += 1
    print(f"{'check':<20}{'pass':>6}{'fail':>6}{'report':>8}")
    for name in sorted(summary):
        p, f, r = summary[name]
        print(f"{name:<20}{p:>6}{f:>6}{r:>8}")
    failed = sum(s[1] for s in summary.values())
    print("ALL HARD CHECKS PASSED" if not failed else f"{failed} HARD CHECK(S) FAILED")
    return EXIT_OK if not failed else EXIT_FAIL


def run_blowup(snapshot_path, x, r, out_resolution: int, output: Path | None) -> int:
    sol, meta = _solution_from_snapshot(snapshot_path)
    op = OperatorSpec.from_dict(meta["operator"]) if "operator" in meta else OperatorSpec("Laplace")
    field_ = harness.rescale(sol.u, x, r, out_resolution)
    fit = harness.halfspace_fit(field_, op.ellipticity)
    rec = {"x": list(x), "r": r, "gamma": fit.gamma, "e": list(fit.e), "sup_err": fit.sup_err}
    text = json.dumps(_jsonable(rec), indent=2, sort_keys=True)
    print(text)
    if output:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text + "\n")
    return EXIT_OK


def parse_radii(text: str) -> list:
    return [Fraction(t.strip()) for t in text.split(",") if t.strip()]


def run_counterexample(family_path, radii, output: Path) -> int:
    if family_path:
        try:
            family = cx.IntervalFamily.from_json(Path(family_path).read_text())
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad interval family {family_path}: {exc}") from exc
    else:
        family = cx.geometric_family()
    rows = cx.verify_o_r2(family, radii)
    cx.write_report(output, rows)
    print(f"{'r':>14} {'u(r)/r^2':>24} {'density':>24}")
    for r, q, d in rows:
        print(f"{cx.fraction_str(r):>14} {cx.fraction_str(q):>24} {cx.fraction_str(d):>24}")
    dec = cx.strictly_decreasing(q for _, q, _ in rows)
    print(f"u(r)/r^2 strictly decreasing: {dec}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbreg", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the obstacle formulation and write a snapshot")
    s.add_argument("config")
    s.add_argument("--n-cells", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--output-dir")

    v = sub.add_parser("verify", help="run harness checks on a snapshot")
    v.add_argument("config")
    v.add_argument("snapshot")
    v.add_argument("--output-dir")

    b = sub.add_parser("blowup", help="rescale at a point and fit a half-space solution")
    b.add_argument("snapshot")
    b.add_argument("--x", type=float, nargs=2, default=(0.0, 0.0))
    b.add_argument("--r", type=float, default=0.25)
    b.add_argument("--out-resolution", type=int, default=64)
    b.add_argument("--output")

    c = sub.add_parser("counterexample", help="exact one-dimensional o(r^2) example")
    c.add_argument("--family", help="JSON list of [[num, den], [num, den]] intervals")
    c.add_argument("--radii", default="1/16,1/64,1/256,1/1024,1/4096",
                   help="comma-separated decreasing rationals")
    c.add_argument("--output", default="out/counterexample.csv")

    q = sub.add_parser("props", help="randomized operator property suite")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--count", type=int, default=10_000)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            cfg = load_config(args.config, {"n_cells": args.n_cells, "tol": args.tol,
                                            "max_iters": args.max_iters, "output_dir": args.output_dir})
            return run_solve(cfg)
        if args.command == "verify":
            cfg = load_config(args.config, {"output_dir": args.output_dir})
            return run_verify(cfg, args.snapshot)
        if args.command == "blowup":
            return run_blowup(args.snapshot, tuple(args.x), args.r, args.out_resolution,
                              Path(args.output) if args.output else None)
        if args.command == "counterexample":
            return run_counterexample(args.family, parse_radii(args.radii), Path(args.output))
        if args.command == "props":
            report = run_property_suite(args.seed, args.count)
            for name, ok in report.items():
                print(f"{name:<28} {'PASS' if ok else 'FAIL'}")
            return EXIT_OK if all(report.values()) else EXIT_FAIL
    except (ConfigError, GridMismatch, InvalidBoundary, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
