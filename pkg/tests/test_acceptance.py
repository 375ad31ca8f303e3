"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""
import math
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy

from fbreg import harness
from fbreg.counterexample import geometric_family, strictly_decreasing, u_value, verify_o_r2
from fbreg.grid import Grid2, ScalarField
from fbreg.operators import LAPLACE, EllipticityPair
from fbreg.props import run_property_suite
from fbreg.solver import extract_free_boundary, free_boundary_nodes, halfspace_array, radial_oracle_array

from conftest import R0, run

UNIT = EllipticityPair(1.0, 1.0)
N_DIRS = 64

# u(4^-6) / (4^-6)^2 for the default family, from a 40-digit nested quadrature
RATIO_AT_4_6 = Fraction(971744202687, 562949953421312)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}  {detail}")
        assert ok, detail
    return emit


def dyadic(h, r_max=0.25):
    out, r = [], r_max
    while r >= 8 * h * (1 - 1e-12):
        out.append(r)
        r /= 2
    return out


def fb_centers(sol, reach):
    """Free-boundary nodes whose ball of radius ``reach`` stays inside the grid."""
    g = sol.grid
    pts = [tuple(g.node(i, j)) for i, j in free_boundary_nodes(sol)]
    return [p for p in pts if max(abs(p[0]), abs(p[1])) + reach <= g.half_width - 2 * g.h]


def test_radial_convergence(report):
    t0 = time.perf_counter()
    errs, hs = [], []
    for n in (64, 128, 256):
        spec, sol = run(f"radial:r0={R0}", n)
        x, y = spec.grid.mesh()
        errs.append(float(np.max(np.abs(sol.u.values - radial_oracle_array(R0, x, y)))))
        hs.append(spec.grid.h)
    elapsed = time.perf_counter() - t0
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = all(e <= 5 * h for e, h in zip(errs, hs)) and all(q >= 1.5 for q in ratios) and elapsed <= 60
    report(1, "radial oracle convergence", ok,
           f"errors={['%.3e' % e for e in errs]} ratios={['%.2f' % q for q in ratios]} time={elapsed:.1f}s")


def test_halfspace_exactness(report, halfspace_run):
    spec, sol = halfspace_run
    h = spec.grid.h
    x, y = spec.grid.mesh()
    err = float(np.max(np.abs(sol.u.values - halfspace_array(1.0, 0.0, x, y))))
    fb = extract_free_boundary(sol)
    fb_dist = float(np.max(np.abs(fb[:, 0])))
    fit = harness.halfspace_fit(harness.rescale(sol.u, (0.0, 0.0), 0.25), UNIT)
    e_err = abs(fit.angle)
    ok = err <= 5 * h and fb_dist <= 2 * h and 0.9 <= fit.gamma <= 1.1 and e_err <= math.pi / 128
    report(2, "half-space exactness", ok,
           f"sup_err={err:.2e} fb_dist={fb_dist / h:.2f}h gamma={fit.gamma:.6f} angle_err={e_err:.2e}")


def continuum_hessian_sup():
    """sup of |D^2 u*|_F over r0 < r < 1, from the symbolic Hessian of the radial oracle."""
    x = sympy.symbols("x", positive=True)
    y = sympy.symbols("y", real=True)
    r0 = sympy.Rational(1, 2)
    r = sympy.sqrt(x**2 + y**2)
    u = r**2 / 4 - r0**2 / 4 - r0**2 / 2 * sympy.log(r / r0)
    frob_sq = sum(e**2 for e in sympy.hessian(u, (x, y)))
    # radial symmetry: along the x-axis |D^2u|^2 = 1/2 + r0^4 / (2 x^4), decreasing in x
    along = sympy.simplify(frob_sq.subs(y, 0))
    assert sympy.simplify(along - (sympy.Rational(1, 2) + r0**4 / (2 * x**4))) == 0
    return float(sympy.sqrt(along.subs(x, r0)))


def test_hessian_bound(report, radial_runs):
    sup_cont = continuum_hessian_sup()
    vals = [harness.hessian_sup(radial_runs[n][1].u, 0.45, (0.5, 0.0)) for n in (128, 256)]
    spread = abs(vals[0] - vals[1]) / max(vals)
    ok = spread <= 0.10 and max(vals) <= 3 * sup_cont
    report(3, "C^{1,1} boundedness", ok,
           f"hessian_sup={['%.4f' % v for v in vals]} change={spread:.1%} continuum_sup={sup_cont:.4f}")


def test_nondegeneracy(report, radial_runs, halfspace_run):
    runs = {"radial h=1/64": radial_runs[128], "radial h=1/128": radial_runs[256], "half-space h=1/64": halfspace_run}
    failures, total = 0, 0
    for spec, sol in runs.values():
        radii = dyadic(spec.grid.h)
        for x0 in fb_centers(sol, max(radii)):
            for _, lhs, rhs, ok in harness.nondegeneracy_check(sol.u, x0, radii, 1.0, n=2):
                total += 1
                failures += not ok
    report(4, "non-degeneracy", failures == 0 and total > 0, f"{total} (point, r) pairs, {failures} failures")


def test_dyadic_projection_stability(report, radial_runs):
    gaps, growth = [], []
    for n in (128, 256):
        recs = harness.dyadic_projection_track(LAPLACE, radial_runs[n][1].u, (0.5, 0.0))
        gaps.append(max(r.dyadic_gap for r in recs[1:]))
        growth.append(max(r.growth for r in recs))
    d_gap = abs(gaps[0] - gaps[1]) / max(gaps)
    d_growth = abs(growth[0] - growth[1]) / max(growth)
    ok = d_gap < 0.10 and d_growth < 0.10
    report(5, "dyadic projection stability", ok,
           f"max|P_2r-P_r|={['%.4f' % g for g in gaps]} ({d_gap:.1%}) "
           f"max growth={['%.4f' % g for g in growth]} ({d_growth:.1%})")


def test_monotonicity_thresholds(report):
    u = ScalarField.from_function(Grid2(1.0, 128), lambda x, y: halfspace_array(1.0, 0.0, x, y))
    checks = [harness.directional_monotonicity(u, (1.0, 0.0), 1.0, v, UNIT, n=2) for v in ("u", "grad_sq")]
    ok = all(m.passed and m.eps0 == 0 and m.threshold == 1 / 16 for m in checks)
    report(6, "monotonicity thresholds", ok,
           " ".join(f"{m.variant}: eps0={m.eps0} thr={m.threshold}" for m in checks))


def test_thickness_and_scaling(report, halfspace_run):
    spec, sol = halfspace_run
    h = spec.grid.h
    mask = ScalarField(spec.grid, sol.active_mask)
    radii = dyadic(h)
    worst_delta, worst_scale, count = 0.0, 0.0, 0
    for x in fb_centers(sol, max(radii)):
        for r in radii:
            slack = 2 / N_DIRS + h / r
            delta = harness.min_diameter(mask, x, r, N_DIRS)
            resc = harness.rescale_mask(mask, x, r, int(round(2 * r / h)))
            delta1 = harness.min_diameter(resc, (0.0, 0.0), 1.0, N_DIRS)
            worst_delta = max(worst_delta, abs(delta - 1.0) - slack)
            worst_scale = max(worst_scale, abs(delta - delta1) - slack)
            count += 1
    ok = count > 0 and worst_delta <= 0 and worst_scale <= 0
    report(7, "thickness and scaling", ok,
           f"{count} (x, r) pairs, worst excess over slack: delta {worst_delta:.3g}, rescale {worst_scale:.3g}")


def test_operator_properties(report):
    t0 = time.perf_counter()
    res = run_property_suite(seed=0, count=10_000)
    elapsed = time.perf_counter() - t0
    ok = all(res.values()) and elapsed <= 5
    report(8, "operator property suite", ok, f"{res} time={elapsed:.2f}s")


def test_counterexample(report):
    fam = geometric_family()
    radii = [Fraction(1, 4**k) for k in range(2, 7)]
    rows = verify_o_r2(fam, radii)
    ratios = [q for _, q, _ in rows]
    dens = [d for _, _, d in rows]
    last = u_value(fam, radii[-1]) / radii[-1] ** 2
    ok = (all(q <= d for q, d in zip(ratios, dens)) and strictly_decreasing(ratios)
          and strictly_decreasing(dens) and last <= RATIO_AT_4_6)
    report(9, "one-dimensional counterexample", ok, f"u(4^-6)/4^-12 = {last} (oracle {RATIO_AT_4_6})")


def test_cone_barrier_report(report):
    theta1 = 3 * math.pi / 5
    first = harness.cone_barrier_report(theta1, UNIT)
    second = harness.cone_barrier_report(theta1, UNIT)
    conv = {c["convention"]: c for c in first["conventions"]}
    ok = (set(conv) == {"pi/theta1", "pi/(2 theta1)"}
          and all(1 <= len(c["search"]) <= 50 and math.isfinite(c["vanishing_residual"]) for c in conv.values())
          and first == second)
    detail = " ".join(f"{k}: alpha={c['alpha']:.4f} beta_found={c['beta_found']} "
                      f"vanishing={c['vanishing_residual']:.3g}" for k, c in conv.items())
    report(10, "cone barrier report", ok, detail)
