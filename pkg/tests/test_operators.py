import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbreg.operators import (
    EllipticityPair,
    OperatorSpec,
    SymMat,
    coefficient_arrays,
    eval_operator,
    eval_operator_arrays,
    gamma_for_direction,
    project_to_level_set,
    pucci_minus,
    pucci_plus,
)
from fbreg.props import catalog, rotation

ELL = EllipticityPair(1.0, 2.0)

entries = st.floats(-50, 50, allow_nan=False)
symmats = st.builds(lambda a, b, c: SymMat(2, a, b, c), entries, entries, entries)


def brute_force_pucci(M: SymMat, ell: EllipticityPair, n=201):
    """Extremes of trace(N M) over N diagonal in M's eigenbasis with entries in [l0, l1]."""
    mu = np.array(M.eigenvalues())
    ls = np.linspace(ell.lambda0, ell.lambda1, n)
    a, b = np.meshgrid(ls, ls)
    vals = a * mu[0] + b * mu[1]
    return vals.min(), vals.max()


def test_pucci_zero():
    assert pucci_minus(SymMat.zeros(), ELL) == 0
    assert pucci_plus(SymMat.zeros(), ELL) == 0


def test_pucci_identity():
    assert pucci_minus(SymMat.diag(1, 1), ELL) == 2
    assert pucci_plus(SymMat.diag(1, 1), ELL) == 4


def test_pucci_indefinite_matches_brute_force():
    M = SymMat.diag(1, -1)
    lo, hi = brute_force_pucci(M, ELL)
    assert pucci_minus(M, ELL) == pytest.approx(lo) == -1
    assert pucci_plus(M, ELL) == pytest.approx(hi) == 1


@given(symmats)
def test_pucci_brute_force_random(M):
    lo, hi = brute_force_pucci(M, ELL, n=3)  # extremes sit at the corners
    assert pucci_minus(M, ELL) == pytest.approx(lo, abs=1e-9)
    assert pucci_plus(M, ELL) == pytest.approx(hi, abs=1e-9)


def test_eval_operator_examples():
    assert eval_operator(OperatorSpec("Laplace"), SymMat.diag(1, 1)) == 2
    bell = OperatorSpec("BellmanFamily", EllipticityPair(1, 1), (SymMat.identity(),))
    assert eval_operator(bell, SymMat.diag(3, -1)) == 2
    M = rotation(SymMat.diag(1, -1), math.pi / 4)
    assert M.a12 != 0
    assert eval_operator(OperatorSpec("PucciPlus", ELL), M) == pytest.approx(1, abs=1e-12)
    assert brute_force_pucci(M, ELL)[1] == pytest.approx(1, abs=1e-12)


def test_empty_bellman_family_rejected():
    with pytest.raises(ValueError):
        OperatorSpec("BellmanFamily", ELL, ())


def test_bellman_member_outside_ellipticity_rejected():
    with pytest.raises(ValueError):
        OperatorSpec("BellmanFamily", ELL, (SymMat.diag(0.5, 1.0),))


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        OperatorSpec("Monge")


def test_convexity_flags():
    assert OperatorSpec("PucciPlus", ELL).is_convex
    assert OperatorSpec("PucciMinus", ELL).is_concave
    assert not OperatorSpec("PucciMinus", ELL).is_convex


@pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.kind)
def test_zero_maps_to_zero(spec):
    assert eval_operator(spec, SymMat.zeros()) == 0


@pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.kind)
@given(P=symmats, Q=symmats)
def test_sandwich(spec, P, Q):
    d = Q - P
    df = eval_operator(spec, Q) - eval_operator(spec, P)
    tol = 1e-10 * (1 + d.frobenius())
    assert pucci_minus(d, spec.ellipticity) - tol <= df <= pucci_plus(d, spec.ellipticity) + tol
    assert abs(df) <= spec.ellipticity.lambda1 * math.sqrt(2) * d.frobenius() + tol


@given(symmats)
def test_duality_exact(M):
    assert pucci_minus(-M, ELL) == -pucci_plus(M, ELL)


@given(symmats, st.floats(0, 100))
def test_positive_homogeneity(M, t):
    assert pucci_plus(t * M, ELL) == pytest.approx(t * pucci_plus(M, ELL), abs=1e-12 * (1 + t * M.frobenius()))


@pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.kind)
@given(symmats)
@settings(max_examples=50)
def test_convexity(spec, M):
    N = SymMat(2, 1.5, -0.3, 0.2)
    mid = eval_operator(spec, 0.5 * (M + N))
    avg = 0.5 * (eval_operator(spec, M) + eval_operator(spec, N))
    if spec.is_convex:
        assert mid <= avg + 1e-9
    if spec.is_concave:
        assert mid >= avg - 1e-9


def test_gamma_closed_forms():
    lap, pp = OperatorSpec("Laplace"), OperatorSpec("PucciPlus", ELL)
    assert abs(gamma_for_direction(lap, (1, 0)) - 1) <= 1e-12
    assert abs(gamma_for_direction(pp, (1, 0)) - 0.5) <= 1e-12
    r2 = math.sqrt(2) / 2
    assert abs(gamma_for_direction(pp, (r2, r2)) - 0.5) <= 1e-12


@pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.kind)
@given(st.floats(0, 2 * math.pi))
@settings(max_examples=30)
def test_gamma_in_closed_interval(spec, angle):
    e = (math.cos(angle), math.sin(angle))
    g = gamma_for_direction(spec, e)
    assert abs(eval_operator(spec, g * SymMat.outer(e)) - 1) <= 1e-12
    ell = spec.ellipticity
    assert 1 / ell.lambda1 - 1e-12 <= g <= 1 / ell.lambda0 + 1e-12


def test_gamma_rejects_non_unit():
    with pytest.raises(ValueError):
        gamma_for_direction(OperatorSpec("Laplace"), (2, 0))


def test_projection_closed_forms():
    lap, pp = OperatorSpec("Laplace"), OperatorSpec("PucciPlus", ELL)
    beta, P = project_to_level_set(lap, SymMat.zeros())
    assert abs(beta - 0.5) <= 1e-12 and P == SymMat.diag(beta, beta)
    assert abs(project_to_level_set(lap, SymMat.diag(3, 0))[0] + 1) <= 1e-12
    assert abs(project_to_level_set(pp, SymMat.zeros())[0] - 0.25) <= 1e-12


@pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.kind)
@given(symmats)
def test_projection_lands_on_level_set(spec, Q):
    beta, P = project_to_level_set(spec, Q)
    assert abs(eval_operator(spec, P) - 1) <= 1e-12
    assert P == Q.shift(beta)


def test_one_dimensional_matrices():
    spec = OperatorSpec("PucciPlus", ELL)
    assert eval_operator(spec, SymMat.diag(-3.0)) == -3.0
    beta, P = project_to_level_set(spec, SymMat.diag(-3.0))
    assert abs(beta - 3.5) <= 1e-12
    assert gamma_for_direction(spec, (1.0,)) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.kind)
def test_array_versions_agree(spec):
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 200))
    F = eval_operator_arrays(spec, *a)
    n11, n12, n22 = coefficient_arrays(spec, *a)
    for k in range(200):
        M = SymMat(2, *a[:, k])
        assert F[k] == pytest.approx(eval_operator(spec, M), abs=1e-12)
        # the active linear operator reproduces F
        assert n11[k] * M.a11 + 2 * n12[k] * M.a12 + n22[k] * M.a22 == pytest.approx(F[k], abs=1e-12)


@pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.kind)
def test_json_round_trip(spec):
    text = spec.to_json()
    assert set(json.loads(text)) >= {"kind", "lambda0", "lambda1"}
    assert OperatorSpec.from_json(text) == spec


def test_eigh_reconstructs():
    M = SymMat(2, 1.0, 0.7, -2.0)
    w, V = M.eigh()
    assert np.allclose(V @ np.diag(w) @ V.T, M.to_array())
