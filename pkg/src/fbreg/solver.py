"""Finite-difference solver for the signed obstacle formulation

    max(F(D^2u) - 1, -u) = 0,   u >= 0,

on the square [-L, L]^2 with Dirichlet data on the two outermost node rings.

The discrete problem is solved by policy iteration: every unknown node either
follows the linearized operator row (the Bellman member or Pucci eigenframe
active at the current Hessian) or the obstacle row u = 0. Each policy gives a
sparse linear system which is solved directly.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid2, GridMismatch, ScalarField, hessian_arrays, interior_mask
from .operators import OperatorSpec, coefficient_arrays, eval_operator_arrays, gamma_for_direction

log = logging.getLogger(__name__)

# width of the Dirichlet layer; the first interior ring is clamped too
BOUNDARY_LAYERS = 2

# above the ~1e-12 / h^2 floor left by roundoff of the direct solves at h = 1/128
DEFAULT_TOL = 1e-6


class NonConvergence(RuntimeError):
    """Raised when the residual is still above tol after max_iters; carries the best iterate."""

    def __init__(self, message: str, solution: "Solution"):
        super().__init__(message)
        self.solution = solution


class InvalidBoundary(ValueError):
    pass


@dataclass
class ObstacleProblemSpec:
    operator: OperatorSpec
    grid: Grid2
    boundary: ScalarField
    K: float = 1.0

    def __post_init__(self):
        if self.boundary.grid != self.grid:
            raise GridMismatch("boundary field lives on a different grid")
        ring = ~interior_mask(self.grid, BOUNDARY_LAYERS)
        bad = self.boundary.values[ring] < 0
        if np.any(bad):
            raise InvalidBoundary(
                f"boundary data must be >= 0; min is {self.boundary.values[ring].min():.3e}"
            )
        if self.K < 0:
            raise ValueError("K must be >= 0")


@dataclass
class Solution:
    u: ScalarField
    active_mask: np.ndarray
    iterations: int
    residual: float
    threshold: float
    converged: bool = True
    history: list = field(default_factory=list)

    @property
    def grid(self) -> Grid2:
        return self.u.grid


def activation_threshold(grid: Grid2) -> float:
    return grid.h**2


def operator_field(spec: OperatorSpec, u: ScalarField) -> np.ndarray:
    """F_h(u) at every node (NaN on the outer ring)."""
    return eval_operator_arrays(spec, *hessian_arrays(u))


def complementarity_field(spec: OperatorSpec, u: ScalarField) -> np.ndarray:
    return np.maximum(operator_field(spec, u) - 1.0, -u.values)


def residual(spec, u: ScalarField) -> float:
    """max over unknown nodes of |max(F_h(u) - 1, -u)|.

    ``spec`` is either an ObstacleProblemSpec (grid checked) or an OperatorSpec.
    """
    if isinstance(spec, ObstacleProblemSpec):
        if u.grid != spec.grid:
            raise GridMismatch(f"field grid {u.grid} does not match problem grid {spec.grid}")
        op = spec.operator
    else:
        op = spec
    g = complementarity_field(op, u)
    return float(np.max(np.abs(g[interior_mask(u.grid, BOUNDARY_LAYERS)])))


def _make_solution(u: np.ndarray, grid: Grid2, res: float, iters: int, converged: bool, history):
    thr = activation_threshold(grid)
    return Solution(ScalarField(grid, u), u > thr, iters, res, thr, converged, list(history))


class _Assembler:
    """Sparse rows of the 9-point operator restricted to the unknown nodes."""

    OFFSETS = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1))

    def __init__(self, grid: Grid2):
        self.grid = grid
        self.unknown = interior_mask(grid, BOUNDARY_LAYERS)
        self.ii, self.jj = np.nonzero(self.unknown)
        self.n = self.ii.size
        self.index = -np.ones(grid.shape, dtype=np.int64)
        self.index[self.ii, self.jj] = np.arange(self.n)

    def system(self, coeffs, pde: np.ndarray, g: np.ndarray):
        """Matrix and rhs for: -L_N u = -1 on pde rows, u = 0 on obstacle rows."""
        n11, n12, n22 = (np.broadcast_to(c, (self.n,)) for c in coeffs)
        h2 = self.grid.h**2
        weights = (
            2.0 * (n11 + n22) / h2,
            -n11 / h2, -n11 / h2,
            -n22 / h2, -n22 / h2,
            -n12 / (2 * h2), -n12 / (2 * h2),
            n12 / (2 * h2), n12 / (2 * h2),
        )
        rows, cols, vals = [], [], []
        rhs = np.where(pde, -1.0, 0.0)
        k = np.arange(self.n)
        for (di, dj), w in zip(self.OFFSETS, weights):
            w = np.where(pde, w, 1.0 if (di, dj) == (0, 0) else 0.0)
            ni, nj = self.ii + di, self.jj + dj
            col = self.index[ni, nj]
            inside = col >= 0
            keep = inside & (w != 0)
            rows.append(k[keep])
            cols.append(col[keep])
            vals.append(w[keep])
            rhs[~inside] -= w[~inside] * g[ni[~inside], nj[~inside]]
        A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n, self.n),
        )
        return A, rhs


def solve(spec: ObstacleProblemSpec, tol: float = DEFAULT_TOL, max_iters: int = 100) -> Solution:
    """Policy iteration for max(F_h(u) - 1, -u) = 0 at the unknown nodes.

    Raises NonConvergence (with the lowest-residual iterate attached) if the
    residual is still above ``tol`` after ``max_iters`` policy updates.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    grid, op = spec.grid, spec.operator
    asm = _Assembler(grid)
    g = spec.boundary.values.astype(float)
    u = g.copy()
    u[asm.unknown] = 0.0
    if asm.n == 0:
        return _make_solution(u, grid, 0.0, 0, True, [])

    # unconstrained solve with the operator linearized at the zero matrix
    coeffs = coefficient_arrays(op, np.zeros(asm.n), np.zeros(asm.n), np.zeros(asm.n))
    pde = np.ones(asm.n, dtype=bool)
    best = None
    history = []
    for it in range(1, max_iters + 1):
        A, b = asm.system(coeffs, pde, g)
        u[asm.ii, asm.jj] = np.maximum(spla.spsolve(A.tocsc(), b), 0.0)
        field_ = ScalarField(grid, u)
        a11, a12, a22 = (a[asm.ii, asm.jj] for a in hessian_arrays(field_))
        Fh = eval_operator_arrays(op, a11, a12, a22)
        uk = u[asm.ii, asm.jj]
        res = float(np.max(np.abs(np.maximum(Fh - 1.0, -uk))))
        history.append(res)
        log.debug("policy iteration %d: residual %.3e, active %d/%d", it, res, int(pde.sum()), asm.n)
        if best is None or res < best[0]:
            best = (res, u.copy(), it)
        if res <= tol:
            return _make_solution(u, grid, res, it, True, history)
        # ties go to the PDE branch
        new_pde = (1.0 - Fh) <= uk
        new_coeffs = coefficient_arrays(op, a11, a12, a22)
        stalled = np.array_equal(new_pde, pde) and all(
            np.array_equal(np.broadcast_to(c0, (asm.n,)), np.broadcast_to(c1, (asm.n,)))
            for c0, c1 in zip(coeffs, new_coeffs)
        )
        if stalled and it > 1:
            break
        pde, coeffs = new_pde, new_coeffs
    res, ubest, it = best
    sol = _make_solution(ubest, grid, res, len(history), False, history)
    raise NonConvergence(
        f"residual {res:.3e} > tol {tol:.1e} after {len(history)} iterations", sol
    )


def extract_free_boundary(sol: Solution) -> np.ndarray:
    """Midpoints of grid edges whose endpoints disagree on the active mask, shape (m, 2)."""
    m, ax = sol.active_mask, sol.grid.axis
    pts = []
    i, j = np.nonzero(m[1:, :] != m[:-1, :])
    pts.append(np.column_stack([0.5 * (ax[i] + ax[i + 1]), ax[j]]))
    i, j = np.nonzero(m[:, 1:] != m[:, :-1])
    pts.append(np.column_stack([ax[i], 0.5 * (ax[j] + ax[j + 1])]))
    return np.concatenate(pts)


def free_boundary_nodes(sol: Solution) -> np.ndarray:
    """Grid indices of the active endpoints of free-boundary edges, sorted, shape (m, 2).

    Edge midpoints are equidistant from both endpoints; they are snapped to
    the endpoint lying in the discrete Omega.
    """
    m = sol.active_mask
    nodes = set()
    for axis in (0, 1):
        a = np.swapaxes(m, 0, axis)
        i, j = np.nonzero(a[1:, :] != a[:-1, :])
        pick = np.where(a[i, j], i, i + 1)
        for p, q in zip(pick, j):
            nodes.add((int(p), int(q)) if axis == 0 else (int(q), int(p)))
    return np.array(sorted(nodes), dtype=int).reshape(-1, 2)


def radial_oracle(r0: float, point) -> float:
    """Radial solution of Laplace u = 1 outside B_{r0}, u = 0 inside (2D)."""
    r = math.hypot(*point)
    if r <= r0:
        return 0.0
    return r * r / 4 - r0 * r0 / 4 - (r0 * r0 / 2) * math.log(r / r0)


def radial_oracle_array(r0: float, x, y) -> np.ndarray:
    r = np.hypot(x, y)
    rs = np.maximum(r, r0)
    return np.where(r > r0, rs**2 / 4 - r0**2 / 4 - (r0**2 / 2) * np.log(rs / r0), 0.0)


def halfspace_array(gamma: float, angle: float, x, y) -> np.ndarray:
    t = np.maximum(math.cos(angle) * x + math.sin(angle) * y, 0.0)
    return 0.5 * gamma * t * t


_PARAM = re.compile(r"\s*([a-zA-Z_]\w*)\s*=\s*([^,]+)\s*")


def _params(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(",")):
        m = _PARAM.fullmatch(part)
        if not m:
            raise ValueError(f"malformed boundary parameter {part!r}")
        out[m.group(1)] = float(m.group(2))
    return out


def boundary_field(descriptor: str, grid: Grid2, operator: OperatorSpec | None = None) -> ScalarField:
    """Boundary data from a descriptor: 'zero', 'radial:r0=<v>',
    'halfspace:gamma=<v>,angle=<radians>' or a snapshot CSV path.

    A half-space descriptor without gamma uses the gamma solving
    F(gamma e (x) e) = 1 for ``operator``.
    """
    name, _, rest = descriptor.partition(":")
    if descriptor == "zero":
        return ScalarField(grid, np.zeros(grid.shape))
    if name == "radial":
        p = _params(rest)
        if "r0" not in p:
            raise ValueError("radial boundary needs r0")
        if not 0 < p["r0"] < grid.half_width:
            raise ValueError(f"r0 must lie in (0, {grid.half_width})")
        return ScalarField.from_function(grid, lambda x, y: radial_oracle_array(p["r0"], x, y))
    if name == "halfspace":
        p = _params(rest)
        angle = p.get("angle", 0.0)
        gamma = p.get("gamma")
        if gamma is None:
            gamma = gamma_for_direction(operator or OperatorSpec("Laplace"), (math.cos(angle), math.sin(angle)))
        return ScalarField.from_function(grid, lambda x, y: halfspace_array(gamma, angle, x, y))
    from .snapshot import read_snapshot

    u, _, _ = read_snapshot(descriptor)
    if u.grid != grid:
        raise GridMismatch(f"boundary file grid {u.grid} does not match {grid}")
    return u
