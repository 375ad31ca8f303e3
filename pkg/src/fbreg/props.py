"""Seeded randomized checks of the ellipticity structure of the catalog operators."""
from __future__ import annotations

import math

import numpy as np

from .operators import (
    EllipticityPair,
    OperatorSpec,
    SymMat,
    eval_operator,
    gamma_for_direction,
    project_to_level_set,
    pucci_minus,
    pucci_plus,
)

TOL = 1e-10

ELL = EllipticityPair(1.0, 2.0)


def rotation(M: SymMat, angle: float) -> SymMat:
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]])
    return SymMat.from_array(R @ M.to_array() @ R.T)


def catalog(ell: EllipticityPair = ELL) -> list:
    fam = (
        SymMat.diag(ell.lambda0, ell.lambda1),
        SymMat.diag(ell.lambda1, ell.lambda0),
        rotation(SymMat.diag(ell.lambda0, ell.lambda1), math.pi / 4),
    )
    return [
        OperatorSpec("Laplace"),
        OperatorSpec("PucciPlus", ell),
        OperatorSpec("PucciMinus", ell),
        OperatorSpec("BellmanFamily", ell, fam),
    ]


def random_symmats(rng: np.random.Generator, count: int, scale: float = 10.0) -> list:
    a = rng.normal(scale=scale, size=(count, 3))
    return [SymMat(2, *row) for row in a]


def run_property_suite(seed: int = 0, count: int = 10_000) -> dict:
    """Returns {check name: passed} for sandwich, duality, homogeneity and Lipschitz."""
    rng = np.random.default_rng(seed)
    Ps = random_symmats(rng, count)
    Qs = random_symmats(rng, count)
    ts = rng.uniform(0.0, 10.0, size=count)
    ok = {"sandwich": True, "duality": True, "homogeneity": True, "lipschitz": True}
    for spec in catalog():
        ell = spec.ellipticity
        lip = ell.lambda1 * math.sqrt(2)
        for P, Q in zip(Ps, Qs):
            d = Q - P
            df = eval_operator(spec, Q) - eval_operator(spec, P)
            scale = 1.0 + d.frobenius()
            if not (pucci_minus(d, ell) - TOL * scale <= df <= pucci_plus(d, ell) + TOL * scale):
                ok["sandwich"] = False
            if abs(df) > lip * d.frobenius() + TOL * scale:
                ok["lipschitz"] = False
    for M, t in zip(Ps, ts):
        if pucci_minus(-M, ELL) != -pucci_plus(M, ELL):
            ok["duality"] = False
        if abs(pucci_plus(t * M, ELL) - t * pucci_plus(M, ELL)) > 1e-12 * (1 + abs(t) * M.frobenius()):
            ok["homogeneity"] = False
    ok.update(closed_form_checks())
    return ok


def closed_form_checks() -> dict:
    lap, pp = OperatorSpec("Laplace"), OperatorSpec("PucciPlus", ELL)
    r2 = math.sqrt(2) / 2
    gammas = [
        (gamma_for_direction(lap, (1.0, 0.0)), 1.0),
        (gamma_for_direction(pp, (1.0, 0.0)), 0.5),
        (gamma_for_direction(pp, (r2, r2)), 0.5),
    ]
    betas = [
        (project_to_level_set(lap, SymMat.zeros())[0], 0.5),
        (project_to_level_set(lap, SymMat.diag(3.0, 0.0))[0], -1.0),
        (project_to_level_set(pp, SymMat.zeros())[0], 0.25),
    ]
    return {
        "gamma_closed_forms": all(abs(a - b) <= TOL for a, b in gammas),
        "projection_closed_forms": all(abs(a - b) <= TOL for a, b in betas),
    }
