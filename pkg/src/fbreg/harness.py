"""Quantitative regularity checks evaluated on discrete solutions.

Every continuum inequality is checked with an explicit discrete slack
(multiples of h or h^2) so that truncation error does not produce false
failures. Universal constants are reported, never asserted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .grid import Grid2, ScalarField, gradient_arrays, hessian_arrays, interior_mask
from .operators import (
    EllipticityPair,
    OperatorSpec,
    SymMat,
    eval_operator,
    eval_operator_arrays,
    project_to_level_set,
)

CIRCLE_POINTS = 256


@dataclass
class ProjectionRecord:
    r: float
    Q_r: SymMat
    beta: float
    P_r: SymMat
    deviation: float
    growth: float
    level_value: float
    # |P_{2r} - P_r|, None at the largest radius
    dyadic_gap: float | None = None

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "Q_r": list(self.Q_r.entries()),
            "beta": self.beta,
            "P_r": list(self.P_r.entries()),
            "P_r_norm": self.P_r.frobenius(),
            "deviation": self.deviation,
            "growth": self.growth,
            "level_value": self.level_value,
            "dyadic_gap": self.dyadic_gap,
        }


@dataclass
class ThicknessRecord:
    x: tuple
    r: float
    delta: float
    n_dirs: int


@dataclass
class HalfspaceFit:
    gamma: float
    e: np.ndarray
    sup_err: float

    @property
    def angle(self) -> float:
        return math.atan2(self.e[1], self.e[0])


@dataclass
class MonotonicityCheck:
    e: tuple
    C0: float
    eps0: float
    min_half: float
    variant: str
    threshold: float
    slack: float
    passed: bool


@dataclass
class ConeBarrierSpec:
    theta1: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.pi / 2 < self.theta1 < math.pi):
            raise ValueError("theta1 must lie in (pi/2, pi)")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")

    def value(self, r, theta):
        r, theta = np.asarray(r, dtype=float), np.asarray(theta, dtype=float)
        return r**self.alpha * (np.exp(-self.beta * np.sin(self.alpha * theta)) - math.exp(-self.beta))


def _radius_check(grid: Grid2, center, radius: float, margin: float):
    reach = max(abs(center[0]), abs(center[1])) + radius + margin
    if reach > grid.half_width + 1e-12:
        raise ValueError(
            f"ball of radius {radius} at {tuple(center)} (plus {margin:.3g}) leaves the grid"
        )


def hessian_sup(u: ScalarField, radius: float, center=(0.0, 0.0)) -> float:
    """max over nodes of B_radius(center) of the Frobenius norm of the discrete Hessian."""
    grid = u.grid
    _radius_check(grid, center, radius, 2 * grid.h)
    a11, a12, a22 = hessian_arrays(u)
    norm = np.sqrt(a11**2 + 2 * a12**2 + a22**2)
    return float(np.max(norm[grid.ball_mask(center, radius)]))


def normalize_at(u: ScalarField, center) -> tuple:
    """u minus its value and central-difference gradient at the node nearest ``center``.

    Returns (normalized field, node coordinates).
    """
    grid = u.grid
    i, j = grid.nearest_index(center)
    g1, g2 = gradient_arrays(u)
    x, y = grid.mesh()
    c = grid.node(i, j)
    v = u.values - u.values[i, j] - g1[i, j] * (x - c[0]) - g2[i, j] * (y - c[1])
    return ScalarField(grid, v), c


def dyadic_projection_track(spec: OperatorSpec, u: ScalarField, center, r_max: float = 0.25):
    """ProjectionRecords at r = r_max, r_max/2, ... down to 8h.

    P_r is obtained by shifting the ball-averaged discrete Hessian Q_r by a
    multiple of the identity onto {F = 1}.
    """
    grid = u.grid
    _radius_check(grid, center, r_max, 2 * grid.h)
    v, c = normalize_at(u, center)
    a = hessian_arrays(v)
    x, y = grid.mesh()
    dx, dy = x - c[0], y - c[1]
    radii = []
    r = r_max
    while r >= 8 * grid.h * (1 - 1e-12):
        radii.append(r)
        r /= 2
    if len(radii) < 2:
        raise ValueError(f"fewer than 2 dyadic levels between {r_max} and 8h = {8 * grid.h}")
    records = []
    for r in radii:
        ball = grid.ball_mask(c, r)
        q = [float(np.mean(ak[ball])) for ak in a]
        Q = SymMat(2, *q)
        beta, P = project_to_level_set(spec, Q)
        dev = np.sqrt(np.mean((a[0][ball] - P.a11) ** 2 + 2 * (a[1][ball] - P.a12) ** 2 + (a[2][ball] - P.a22) ** 2))
        model = 0.5 * (P.a11 * dx**2 + 2 * P.a12 * dx * dy + P.a22 * dy**2)
        growth = float(np.max(np.abs(v.values[ball] - model[ball]))) / r**2
        rec = ProjectionRecord(r, Q, beta, P, float(dev), growth, eval_operator(spec, P))
        if records:
            rec.dyadic_gap = (records[-1].P_r - P).frobenius()
        records.append(rec)
    return records


def volume_decay(spec: OperatorSpec, sol, center, r_max: float = 0.25, M: float = 10.0, n: int = 2):
    """Rescaled complement measures |A_r| = |B_r(center) \\ Omega| / r^n paired with |P_r|.

    ``decay_ok`` is reported at levels with |P_r| >= M (None elsewhere) and
    compares |A_{r/2}| with |A_r| / 2^n.
    """
    grid = sol.grid
    records = dyadic_projection_track(spec, sol.u, center, r_max)
    c = grid.node(*grid.nearest_index(center))
    out = []
    for rec in records:
        ball = grid.ball_mask(c, rec.r)
        a_r = np.count_nonzero(ball & ~sol.active_mask) * grid.h**2 / rec.r**2
        out.append({"r": rec.r, "A_r": float(a_r), "P_r_norm": rec.P_r.frobenius()})
    for k, row in enumerate(out):
        if k + 1 < len(out) and row["P_r_norm"] >= M:
            row["decay_ok"] = out[k + 1]["A_r"] <= row["A_r"] / 2**n
        else:
            row["decay_ok"] = None
    return out


def circle_points(x0, r: float, n: int = CIRCLE_POINTS) -> np.ndarray:
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([x0[0] + r * np.cos(t), x0[1] + r * np.sin(t)])


def nondegeneracy_check(u: ScalarField, x0, radii, lambda1: float, n: int = 2):
    """Rows (r, lhs, rhs, passed) for max over the circle of u >= u(x0) + r^2/(2 n lambda1)."""
    grid = u.grid
    interp = u.interpolator()
    ux0 = float(interp(np.atleast_2d(x0))[0])
    rows = []
    for r in radii:
        _radius_check(grid, x0, r, 0.0)
        lhs = float(np.max(interp(circle_points(x0, r))))
        rhs = ux0 + r * r / (2 * n * lambda1)
        rows.append((float(r), lhs, rhs, bool(lhs >= rhs - 10 * grid.h * r)))
    return rows


def complement_points(mask: ScalarField, x, r: float) -> np.ndarray:
    grid = mask.grid
    sel = grid.ball_mask(x, r) & ~mask.values.astype(bool)
    X, Y = grid.mesh()
    return np.column_stack([X[sel], Y[sel]])


def width_profile(points: np.ndarray, n_dirs: int) -> np.ndarray:
    """Width of the point set projected on directions k pi / n_dirs."""
    t = np.pi * np.arange(n_dirs) / n_dirs
    proj = points @ np.vstack([np.cos(t), np.sin(t)])
    return proj.max(axis=0) - proj.min(axis=0)


def min_diameter(mask: ScalarField, x, r: float, n_dirs: int = 64) -> float:
    """MD(complement of mask within B_r(x)) / r, with MD taken over n_dirs directions."""
    if n_dirs < 64:
        raise ValueError("n_dirs must be >= 64")
    pts = complement_points(mask, x, r)
    if len(pts) == 0:
        return 0.0
    return float(width_profile(pts, n_dirs).min() / r)


def unit_ball_grid(out_resolution: int) -> Grid2:
    return Grid2(1.0, out_resolution)


def rescale(u: ScalarField, x, r: float, out_resolution: int = 64) -> ScalarField:
    """y -> [u(x + r y) - u(x)] / r^2 sampled bilinearly on [-1, 1]^2."""
    grid = u.grid
    if r < 4 * grid.h:
        raise ValueError(f"r = {r} is below 4h = {4 * grid.h}")
    _radius_check(grid, x, r, 0.0)
    out = unit_ball_grid(out_resolution)
    Y1, Y2 = out.mesh()
    pts = np.column_stack([x[0] + r * Y1.ravel(), x[1] + r * Y2.ravel()])
    interp = u.interpolator()
    ux = float(interp(np.atleast_2d(x))[0])
    pts = np.clip(pts, -grid.half_width, grid.half_width)
    vals = (interp(pts) - ux) / r**2
    return ScalarField(out, vals.reshape(out.shape))


def rescale_mask(mask: ScalarField, x, r: float, out_resolution: int = 64) -> ScalarField:
    """The active mask seen through y -> x + r y, sampled at nearest nodes."""
    grid = mask.grid
    out = unit_ball_grid(out_resolution)
    Y1, Y2 = out.mesh()
    ii = np.clip(np.rint((x[0] + r * Y1 + grid.half_width) / grid.h).astype(int), 0, grid.n_cells)
    jj = np.clip(np.rint((x[1] + r * Y2 + grid.half_width) / grid.h).astype(int), 0, grid.n_cells)
    return ScalarField(out, mask.values.astype(bool)[ii, jj])


def _ball_values(field: ScalarField):
    grid = field.grid
    inside = grid.ball_mask((0.0, 0.0), 1.0)
    X, Y = grid.mesh()
    return X[inside], Y[inside], field.values[inside]


def _fit_sup_err(y1, y2, f, theta, gamma):
    t = np.maximum(math.cos(theta) * y1 + math.sin(theta) * y2, 0.0)
    return float(np.max(np.abs(f - 0.5 * gamma * t * t)))


def halfspace_fit(field: ScalarField, ell: EllipticityPair, n_dirs: int = 256, n_gamma: int = 33) -> HalfspaceFit:
    """Best sup-norm fit of gamma [(y.e)_+]^2 / 2 on the unit ball, gamma in [1/lambda1, 1/lambda0]."""
    y1, y2, f = _ball_values(field)
    g_lo, g_hi = 1.0 / ell.lambda1, 1.0 / ell.lambda0
    thetas = 2 * np.pi * np.arange(n_dirs) / n_dirs
    gammas = np.linspace(g_lo, g_hi, n_gamma)
    best = (np.inf, 0.0, g_lo)
    for th in thetas:
        t = np.maximum(math.cos(th) * y1 + math.sin(th) * y2, 0.0)
        q = 0.5 * t * t
        errs = np.max(np.abs(f[None, :] - gammas[:, None] * q[None, :]), axis=1)
        k = int(np.argmin(errs))
        if errs[k] < best[0]:
            best = (float(errs[k]), float(th), float(gammas[k]))

    def best_gamma(th):
        if g_hi - g_lo < 1e-14:
            return g_lo, _fit_sup_err(y1, y2, f, th, g_lo)
        res = minimize_scalar(
            lambda g: _fit_sup_err(y1, y2, f, th, g), bounds=(g_lo, g_hi), method="bounded",
            options={"xatol": 1e-10},
        )
        return float(res.x), float(res.fun)

    step = 2 * np.pi / n_dirs
    res = minimize_scalar(
        lambda th: best_gamma(th)[1], bounds=(best[1] - step, best[1] + step), method="bounded",
        options={"xatol": 1e-8},
    )
    gamma, err = best_gamma(float(res.x))
    if err <= best[0]:
        theta = float(res.x)
    else:
        err, theta, gamma = best
    theta = math.remainder(theta, 2 * math.pi)
    return HalfspaceFit(gamma, np.array([math.cos(theta), math.sin(theta)]), err)


def monotonicity_threshold(variant: str, ell: EllipticityPair, n: int = 2) -> float:
    if variant == "u":
        return 1.0 / (8 * n * ell.lambda1)
    if variant == "grad_sq":
        return ell.lambda0 / (4 * n**2 * ell.lambda1**3)
    raise ValueError(f"unknown variant {variant!r}; expected 'u' or 'grad_sq'")


def almost_monotonicity_quantity(u: ScalarField, e, C0: float, variant: str) -> np.ndarray:
    g1, g2 = gradient_arrays(u)
    de = e[0] * g1 + e[1] * g2
    if variant == "u":
        return C0 * de - u.values
    if variant == "grad_sq":
        return C0 * de - (g1**2 + g2**2)
    raise ValueError(f"unknown variant {variant!r}; expected 'u' or 'grad_sq'")


def directional_monotonicity(u: ScalarField, e, C0: float, variant: str = "u",
                             ell: EllipticityPair = EllipticityPair(1.0, 1.0), n: int = 2) -> MonotonicityCheck:
    """Checks C0 d_e u - u (or - |grad u|^2) >= -eps0 on B_1 => >= 0 on B_1/2, up to 10h."""
    grid = u.grid
    q = almost_monotonicity_quantity(u, e, C0, variant)
    usable = interior_mask(grid, 1)
    b1 = usable & grid.ball_mask((0.0, 0.0), 1.0)
    b_half = usable & grid.ball_mask((0.0, 0.0), 0.5)
    eps0 = max(0.0, -float(np.min(q[b1])))
    min_half = float(np.min(q[b_half]))
    thr = monotonicity_threshold(variant, ell, n)
    slack = 10 * grid.h
    passed = (eps0 > thr) or (min_half >= -slack)
    return MonotonicityCheck(tuple(float(c) for c in e), C0, eps0, min_half, variant, thr, slack, bool(passed))


@dataclass
class ConeResult:
    fitted: bool
    e_axis: np.ndarray | None = None
    s: float | None = None
    fit: HalfspaceFit | None = None
    min_c0_quantity: float | None = None
    per_s: dict = field(default_factory=dict)


def monotonicity_cone(u: ScalarField, x, r: float, C0: float = 1.0,
                      ell: EllipticityPair = EllipticityPair(1.0, 1.0),
                      n_test_dirs: int = 64, out_resolution: int = 64, fit_threshold: float = 0.2) -> ConeResult:
    """Axis e_x from the half-space fit of the blow-up at x, and the smallest
    s in {1, 0.9, ..., 0.1} such that d_e u >= -10h on B_{r/2}(x) whenever
    e . e_x >= s."""
    grid = u.grid
    fit = halfspace_fit(rescale(u, x, r, out_resolution), ell)
    if fit.sup_err > fit_threshold:
        return ConeResult(False, fit=fit)
    g1, g2 = gradient_arrays(u)
    ball = interior_mask(grid, 1) & grid.ball_mask(x, r / 2)
    g1b, g2b = g1[ball], g2[ball]
    axis_angle = fit.angle
    slack = 10 * grid.h
    per_s = {}
    s_best = None
    for s in np.round(np.arange(1.0, 0.05, -0.1), 10):
        half = math.acos(min(1.0, s))
        angles = axis_angle + np.linspace(-half, half, n_test_dirs)
        mins = [float(np.min(math.cos(a) * g1b + math.sin(a) * g2b)) for a in angles]
        ok = min(mins) >= -slack
        per_s[float(s)] = ok
        if ok:
            s_best = float(s)
    q = almost_monotonicity_quantity(u, fit.e, C0, "u")
    return ConeResult(True, fit.e, s_best, fit, float(np.min(q[ball])), per_s)


def cone_barrier(spec: ConeBarrierSpec, r_in: float = 0.25, r_out: float = 1.0, n_cells: int = 128,
                 ell: EllipticityPair = EllipticityPair(1.0, 1.0)) -> tuple:
    """(min of Pucci-minus of the discrete Hessian of v over the annulus sector |theta| <= theta1,
    max |v| on the rays |theta| = theta1)."""
    if not 0 < r_in < r_out:
        raise ValueError("need 0 < r_in < r_out")
    grid = Grid2(r_out, n_cells)
    X, Y = grid.mesh()
    v = ScalarField(grid, spec.value(np.hypot(X, Y), np.arctan2(Y, X)))
    a11, a12, a22 = hessian_arrays(v)
    rr, th = np.hypot(X, Y), np.arctan2(Y, X)
    region = interior_mask(grid, 1) & (rr >= r_in) & (rr <= r_out - 2 * grid.h) & (np.abs(th) <= spec.theta1)
    pm = eval_operator_arrays(OperatorSpec("PucciMinus", ell), a11, a12, a22)
    min_sub = float(np.min(pm[region])) if np.any(region) else 0.0
    rs = np.linspace(r_in, r_out, CIRCLE_POINTS)
    vanish = float(max(np.max(np.abs(spec.value(rs, spec.theta1))), np.max(np.abs(spec.value(rs, -spec.theta1)))))
    return min_sub, vanish


def alpha_conventions(theta1: float) -> dict:
    return {"pi/theta1": math.pi / theta1, "pi/(2 theta1)": math.pi / (2 * theta1)}


def cone_barrier_report(theta1: float, ell: EllipticityPair = EllipticityPair(1.0, 1.0),
                        betas=range(1, 51), tol: float = 1e-4, **grid_kw) -> dict:
    """Runs the beta search for both exponent conventions; report only."""
    report = {"theta1": theta1, "lambda0": ell.lambda0, "lambda1": ell.lambda1, "conventions": []}
    for name, alpha in alpha_conventions(theta1).items():
        entry = {"convention": name, "alpha": alpha, "beta_found": None, "search": []}
        for beta in betas:
            min_sub, vanish = cone_barrier(ConeBarrierSpec(theta1, alpha, float(beta)), ell=ell, **grid_kw)
            entry["search"].append({"beta": float(beta), "min_subsolution_value": min_sub, "vanishing_residual": vanish})
            if min_sub >= -tol:
                entry["beta_found"] = float(beta)
                break
        last = entry["search"][-1]
        entry["min_subsolution_value"] = last["min_subsolution_value"]
        entry["vanishing_residual"] = last["vanishing_residual"]
        # where the formula itself vanishes: sin(alpha theta) = 1
        entry["formula_zero_angle"] = (math.pi / 2) / alpha
        report["conventions"].append(entry)
    return report
