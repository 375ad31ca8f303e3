"""Uniformly elliptic operators F(D^2u) and the algebraic solves on {F = 1}.

Only a closed catalog of operators is supported (Laplace, the two Pucci
extremal operators and a finite Bellman family), so that ellipticity and
convexity can always be checked. Matrices are at most 2x2 and eigenvalues
are computed in closed form.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("Laplace", "PucciPlus", "PucciMinus", "BellmanFamily")

ALGEBRAIC_TOL = 1e-12


@dataclass(frozen=True)
class SymMat:
    """Symmetric matrix of dimension 1 or 2, stored as (a11, a12, a22)."""

    dim: int
    a11: float
    a12: float = 0.0
    a22: float = 0.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.dim == 1 and (self.a12 != 0.0 or self.a22 != 0.0):
            raise ValueError("1x1 matrix carries a single entry")

    @classmethod
    def diag(cls, *d: float) -> "SymMat":
        if len(d) == 1:
            return cls(1, float(d[0]))
        return cls(2, float(d[0]), 0.0, float(d[1]))

    @classmethod
    def identity(cls, dim: int = 2) -> "SymMat":
        return cls.diag(*([1.0] * dim))

    @classmethod
    def zeros(cls, dim: int = 2) -> "SymMat":
        return cls.diag(*([0.0] * dim))

    @classmethod
    def outer(cls, e) -> "SymMat":
        """e (x) e for a vector e of length 1 or 2."""
        e = [float(c) for c in e]
        if len(e) == 1:
            return cls(1, e[0] * e[0])
        return cls(2, e[0] * e[0], e[0] * e[1], e[1] * e[1])

    @classmethod
    def from_array(cls, a) -> "SymMat":
        a = np.asarray(a, dtype=float)
        if a.shape == (1, 1):
            return cls(1, float(a[0, 0]))
        if a.shape != (2, 2):
            raise ValueError(f"expected a 1x1 or 2x2 array, got shape {a.shape}")
        if not math.isclose(a[0, 1], a[1, 0], rel_tol=1e-12, abs_tol=1e-14):
            raise ValueError("array is not symmetric")
        return cls(2, float(a[0, 0]), float(a[0, 1]), float(a[1, 1]))

    def to_array(self) -> np.ndarray:
        if self.dim == 1:
            return np.array([[self.a11]])
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def entries(self) -> tuple:
        return (self.a11,) if self.dim == 1 else (self.a11, self.a12, self.a22)

    def trace(self) -> float:
        return self.a11 + (self.a22 if self.dim == 2 else 0.0)

    def eigenvalues(self) -> tuple:
        """Eigenvalues in ascending order."""
        if self.dim == 1:
            return (self.a11,)
        m = 0.5 * (self.a11 + self.a22)
        rad = math.hypot(0.5 * (self.a11 - self.a22), self.a12)
        return (m - rad, m + rad)

    def eigh(self):
        """Eigenvalues (ascending) and orthonormal eigenvectors as columns."""
        if self.dim == 1:
            return np.array([self.a11]), np.ones((1, 1))
        lo, hi = self.eigenvalues()
        theta = 0.5 * math.atan2(2.0 * self.a12, self.a11 - self.a22)
        v_hi = np.array([math.cos(theta), math.sin(theta)])
        v_lo = np.array([-math.sin(theta), math.cos(theta)])
        return np.array([lo, hi]), np.column_stack([v_lo, v_hi])

    def frobenius(self) -> float:
        if self.dim == 1:
            return abs(self.a11)
        return math.sqrt(self.a11**2 + 2.0 * self.a12**2 + self.a22**2)

    def inner(self, other: "SymMat") -> float:
        """trace(self @ other)."""
        self._check_dim(other)
        if self.dim == 1:
            return self.a11 * other.a11
        return self.a11 * other.a11 + 2.0 * self.a12 * other.a12 + self.a22 * other.a22

    def _check_dim(self, other):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "SymMat") -> "SymMat":
        self._check_dim(other)
        return SymMat(self.dim, self.a11 + other.a11, self.a12 + other.a12, self.a22 + other.a22)

    def __sub__(self, other: "SymMat") -> "SymMat":
        self._check_dim(other)
        return SymMat(self.dim, self.a11 - other.a11, self.a12 - other.a12, self.a22 - other.a22)

    def __neg__(self) -> "SymMat":
        return SymMat(self.dim, -self.a11, -self.a12, -self.a22)

    def __mul__(self, t: float) -> "SymMat":
        return SymMat(self.dim, t * self.a11, t * self.a12, t * self.a22)

    __rmul__ = __mul__

    def shift(self, beta: float) -> "SymMat":
        """self + beta * Id."""
        if self.dim == 1:
            return SymMat(1, self.a11 + beta)
        return SymMat(2, self.a11 + beta, self.a12, self.a22 + beta)


@dataclass(frozen=True)
class EllipticityPair:
    lambda0: float
    lambda1: float

    def __post_init__(self):
        if not (self.lambda0 > 0 and self.lambda1 >= self.lambda0):
            raise ValueError(
                f"need 0 < lambda0 <= lambda1, got ({self.lambda0}, {self.lambda1})"
            )


@dataclass(frozen=True)
class OperatorSpec:
    """An operator from the catalog.

    ``family`` is only used by ``BellmanFamily``; F(M) is then the maximum of
    trace(N M) over the members N, which makes F convex.
    """

    kind: str
    ellipticity: EllipticityPair = EllipticityPair(1.0, 1.0)
    family: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}; expected one of {KINDS}")
        lam0, lam1 = self.ellipticity.lambda0, self.ellipticity.lambda1
        if self.kind == "Laplace" and not (lam0 <= 1.0 <= lam1):
            raise ValueError("Laplace requires lambda0 <= 1 <= lambda1")
        if self.kind == "BellmanFamily":
            if not self.family:
                raise ValueError("BellmanFamily needs at least one member")
            object.__setattr__(self, "family", tuple(self.family))
            for n in self.family:
                lo, hi = n.eigenvalues()
                if lo < lam0 - 1e-12 or hi > lam1 + 1e-12:
                    raise ValueError(
                        f"family member {n.entries()} has spectrum [{lo}, {hi}] "
                        f"outside [{lam0}, {lam1}]"
                    )
        elif self.family:
            raise ValueError(f"{self.kind} does not take a family")

    @property
    def is_convex(self) -> bool:
        return self.kind != "PucciMinus"

    @property
    def is_concave(self) -> bool:
        return self.kind in ("Laplace", "PucciMinus")

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "lambda0": self.ellipticity.lambda0,
            "lambda1": self.ellipticity.lambda1,
        }
        if self.family:
            d["family"] = [list(n.entries()) for n in self.family]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OperatorSpec":
        kind = d["kind"]
        ell = EllipticityPair(float(d.get("lambda0", 1.0)), float(d.get("lambda1", 1.0)))
        family = []
        for entries in d.get("family") or ():
            entries = [float(v) for v in entries]
            if len(entries) == 3:
                family.append(SymMat(2, *entries))
            elif len(entries) == 1:
                family.append(SymMat(1, entries[0]))
            else:
                raise ValueError(f"family member must have 1 or 3 entries, got {entries}")
        return cls(kind, ell, tuple(family))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OperatorSpec":
        return cls.from_dict(json.loads(text))


LAPLACE = OperatorSpec("Laplace")


def pucci_minus(M: SymMat, ell: EllipticityPair) -> float:
    """inf of trace(N M) over lambda0 Id <= N <= lambda1 Id."""
    pos = sum(mu for mu in M.eigenvalues() if mu > 0)
    neg = sum(mu for mu in M.eigenvalues() if mu < 0)
    return ell.lambda0 * pos + ell.lambda1 * neg


def pucci_plus(M: SymMat, ell: EllipticityPair) -> float:
    """sup of trace(N M) over lambda0 Id <= N <= lambda1 Id."""
    pos = sum(mu for mu in M.eigenvalues() if mu > 0)
    neg = sum(mu for mu in M.eigenvalues() if mu < 0)
    return ell.lambda1 * pos + ell.lambda0 * neg


def eval_operator(spec: OperatorSpec, M: SymMat) -> float:
    if spec.kind == "Laplace":
        return M.trace()
    if spec.kind == "PucciPlus":
        return pucci_plus(M, spec.ellipticity)
    if spec.kind == "PucciMinus":
        return pucci_minus(M, spec.ellipticity)
    if not spec.family:
        raise ValueError("BellmanFamily needs at least one member")
    return max(N.inner(M) for N in spec.family)


def _bisect(g, lo: float, hi: float, tol: float = ALGEBRAIC_TOL) -> float:
    """Root of the increasing function g on [lo, hi]; g(lo) <= 0 <= g(hi) required."""
    glo, ghi = g(lo), g(hi)
    if glo > 0 or ghi < 0:
        raise ValueError(f"bracket [{lo}, {hi}] does not straddle the root: g = ({glo}, {ghi})")
    if abs(glo) <= tol:
        return lo
    if abs(ghi) <= tol:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol or mid in (lo, hi):
            return mid
        if gm < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gamma_for_direction(spec: OperatorSpec, e) -> float:
    """The gamma > 0 with F(gamma e (x) e) = 1, by bisection on [1/(2 lambda1), 2/lambda0]."""
    e = np.asarray(e, dtype=float)
    if abs(np.linalg.norm(e) - 1.0) > 1e-12:
        raise ValueError(f"direction must be a unit vector, |e| = {np.linalg.norm(e)}")
    E = SymMat.outer(e)
    ell = spec.ellipticity
    return _bisect(lambda g: eval_operator(spec, g * E) - 1.0, 0.5 / ell.lambda1, 2.0 / ell.lambda0)


def project_to_level_set(spec: OperatorSpec, Q: SymMat) -> tuple:
    """Find beta with F(Q + beta Id) = 1; returns (beta, Q + beta Id).

    beta -> F(Q + beta Id) has slope between n lambda0 and n lambda1, so the
    root lies between (1 - F(Q))/(n lambda1) and (1 - F(Q))/(n lambda0).
    """
    n = Q.dim
    ell = spec.ellipticity
    defect = 1.0 - eval_operator(spec, Q)
    a, b = defect / (n * ell.lambda1), defect / (n * ell.lambda0)
    pad = 1e-9 * (1.0 + abs(a) + abs(b))
    lo, hi = min(a, b) - pad, max(a, b) + pad
    beta = _bisect(lambda t: eval_operator(spec, Q.shift(t)) - 1.0, lo, hi)
    return beta, Q.shift(beta)


# Vectorized counterparts used by the grid solver. They act on arrays of
# Hessian entries (a11, a12, a22) of a 2D field.


def eigen_arrays(a11, a12, a22):
    """Ascending eigenvalues and the angle of the top eigenvector, elementwise."""
    m = 0.5 * (a11 + a22)
    rad = np.hypot(0.5 * (a11 - a22), a12)
    theta = 0.5 * np.arctan2(2.0 * a12, a11 - a22)
    return m - rad, m + rad, theta


def eval_operator_arrays(spec: OperatorSpec, a11, a12, a22) -> np.ndarray:
    a11, a12, a22 = (np.asarray(a, dtype=float) for a in (a11, a12, a22))
    if spec.kind == "Laplace":
        return a11 + a22
    if spec.kind == "BellmanFamily":
        vals = [n.a11 * a11 + 2.0 * n.a12 * a12 + n.a22 * a22 for n in spec.family]
        return np.max(vals, axis=0)
    lo, hi, _ = eigen_arrays(a11, a12, a22)
    pos = np.maximum(lo, 0.0) + np.maximum(hi, 0.0)
    neg = np.minimum(lo, 0.0) + np.minimum(hi, 0.0)
    ell = spec.ellipticity
    if spec.kind == "PucciPlus":
        return ell.lambda1 * pos + ell.lambda0 * neg
    return ell.lambda0 * pos + ell.lambda1 * neg


def coefficient_arrays(spec: OperatorSpec, a11, a12, a22):
    """Coefficients (n11, n12, n22) of the linear operator active at each Hessian.

    For every catalog operator F(M) = trace(N M) for the returned N, which is
    the maximizing Bellman member or the Pucci optimizer in M's eigenframe.
    Zero eigenvalues are treated as positive.
    """
    a11, a12, a22 = (np.asarray(a, dtype=float) for a in (a11, a12, a22))
    shape = np.broadcast(a11, a12, a22).shape
    if spec.kind == "Laplace":
        return np.ones(shape), np.zeros(shape), np.ones(shape)
    if spec.kind == "BellmanFamily":
        vals = np.array([n.a11 * a11 + 2.0 * n.a12 * a12 + n.a22 * a22 for n in spec.family])
        k = np.argmax(vals, axis=0)
        fam = np.array([[n.a11, n.a12, n.a22] for n in spec.family])
        return fam[k, 0], fam[k, 1], fam[k, 2]
    lo, hi, theta = eigen_arrays(a11, a12, a22)
    ell = spec.ellipticity
    big, small = (ell.lambda1, ell.lambda0) if spec.kind == "PucciPlus" else (ell.lambda0, ell.lambda1)
    c_hi = np.where(hi >= 0, big, small)
    c_lo = np.where(lo >= 0, big, small)
    c, s = np.cos(theta), np.sin(theta)
    # N = c_hi v_hi v_hi^T + c_lo v_lo v_lo^T with v_hi = (c, s), v_lo = (-s, c)
    n11 = c_hi * c * c + c_lo * s * s
    n12 = (c_hi - c_lo) * c * s
    n22 = c_hi * s * s + c_lo * c * c
    return n11, n12, n22
