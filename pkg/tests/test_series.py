from __future__ import annotations

import cmath
import math
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from confluence.errors import ConstantTermNonzero, MultiplierMismatch, NonInvertible, NotParabolic, NotRootOfUnity
from confluence.orbit import model_germ
from confluence.series import (
    FormalDiffeo,
    FormalVectorField1D,
    TruncatedSeries,
    conjugate_field_by_rotation,
    extract_parabolic_invariants,
    flow_time_t,
    iterate_q,
    iterate_relation_B,
    prepared_form,
    resonant_germ,
    rotation_action,
    schwarz_pair_diffeo,
    series_algebra,
)

Z = TruncatedSeries.identity


def lagrange_inverse_coeff(n: int) -> Fraction:
    # [z^n] of the inverse of z + z^2: (1/n) [w^{n-1}] (1 + w)^{-n}
    return Fraction((-1) ** (n - 1) * math.comb(2 * n - 2, n - 1), n)


# ---------------------------------------------------------------------------
# algebra

def test_invert_matches_lagrange_oracle():
    f = TruncatedSeries((0, 1, 1), 10)
    g = series_algebra(f, None, "invert")
    assert g.coeffs[1:5] == (1, -1, 2, -5)
    for n in range(1, 11):
        assert g[n] == lagrange_inverse_coeff(n)


def test_compose_with_identity_is_noop():
    f = TruncatedSeries((Fraction(1, 3), 2, -1, 5), 6)
    assert series_algebra(f, Z(6), "compose") == f


def test_mul_truncates_at_order():
    p = series_algebra(TruncatedSeries((1, 1), 2), TruncatedSeries((1, -1), 2), "mul")
    assert p.coeffs == (1, 0, -1)
    cubic = TruncatedSeries((0, 0, 1), 2) * TruncatedSeries((0, 1), 2)
    assert cubic.coeffs == (0, 0, 0)


def test_compose_requires_zero_constant_term():
    with pytest.raises(ConstantTermNonzero):
        TruncatedSeries((1, 2), 4).compose(TruncatedSeries((1, 1), 4))


def test_invert_requires_unit_linear_term():
    with pytest.raises(NonInvertible):
        TruncatedSeries((0, 0, 1), 4).invert()


def test_json_round_trip():
    f = TruncatedSeries((0, 1 + 2j, -0.5j), 5)
    assert TruncatedSeries.from_json(f.to_json()).max_abs_diff(f) == 0


def test_rational_model_series_matches_quotient():
    a = Fraction(3, 7)
    X = FormalVectorField1D.rational_model(2, (Fraction(1, 5), Fraction(-2, 3)), a, N=12)
    s = sp.symbols("z")
    expr = (s ** 3 - Fraction(2, 3) * s + Fraction(1, 5)) / (1 + a * s ** 2)
    ref = sp.Poly(sp.series(expr, s, 0, 13).removeO(), s).all_coeffs()[::-1]
    for n, c in enumerate(ref):
        assert X.series[n] == Fraction(int(sp.numer(c)), int(sp.denom(c)))


# ---------------------------------------------------------------------------
# flows and invariants

def test_flow_of_z_squared_is_z_over_one_minus_z():
    phi = flow_time_t(FormalVectorField1D.polynomial((0, 0, 1), N=12), 1, 12)
    assert phi.series.coeffs == (0,) + (1,) * 12


def test_flow_time_zero_is_identity():
    X = FormalVectorField1D.polynomial((0, 0, 2, -1, 3), N=10)
    assert flow_time_t(X, 0, 10).series == Z(10)


def test_flow_z3_coefficient_is_one_minus_a():
    a = Fraction(2, 5)
    X = FormalVectorField1D.rational_model(1, (0,), a, N=8)
    assert flow_time_t(X, 1, 8).series[3] == 1 - a


def test_invariants_of_geometric_series():
    inv = extract_parabolic_invariants(TruncatedSeries((0,) + (1,) * 8, 8))
    assert (inv.k, inv.a) == (1, 0)


def test_invariants_round_trip_complex_a():
    a = 0.3 + 0.1j
    X = FormalVectorField1D.rational_model(2, (0, 0), a, N=14)
    inv = extract_parabolic_invariants(flow_time_t(X, 1, 14))
    assert inv.k == 2 and abs(inv.a - a) < 1e-10


def test_invariants_z_plus_z2():
    inv = extract_parabolic_invariants(TruncatedSeries((0, 1, 1, 0), 3))
    assert (inv.k, inv.a) == (1, 1)


def test_not_parabolic_raises():
    with pytest.raises(NotParabolic):
        extract_parabolic_invariants(TruncatedSeries((0, 2, 1), 5))


# ---------------------------------------------------------------------------
# iterates

def test_iterate_B_example_exact():
    f = resonant_germ(1, 2, 1, Fraction(1, 2), root=-1)
    g = iterate_q(f, 2)
    assert g[5] == Fraction(7, 4) == iterate_relation_B(Fraction(1, 2), 1, 2)


def test_iterate_q_one_is_identity_map():
    f = TruncatedSeries((0, 1, 3, 1), 6)
    assert iterate_q(f, 1) == f


def test_involution_squares_to_identity():
    assert iterate_q(TruncatedSeries((0, -1), 8), 2) == Z(8)


def _omega(q):
    return sp.exp(2 * sp.pi * sp.I / q)


@pytest.mark.parametrize("k,q", [(1, 2), (1, 3), (2, 2), (2, 3)])
def test_B_relation_exact(k, q):
    A = Fraction(5, 7)
    if q == 2:
        f = resonant_germ(1, q, k, A, root=-1)
        fq = iterate_q(f, q)
        assert fq[2 * k * q + 1] == iterate_relation_B(A, k, q)
    else:
        root = _omega(q)
        f = resonant_germ(1, q, k, sp.Rational(5, 7), root=root)
        fq = iterate_q(f, q)
        got = sp.nsimplify(sp.expand(fq[2 * k * q + 1]))
        assert sp.simplify(got - sp.Rational(5, 7) * q - sp.Rational((k * q + 1) * (q - 1), 2 * q)) == 0


# ---------------------------------------------------------------------------
# prepared form

def test_prepared_form_model_k1():
    rep = prepared_form(lambda e: model_germ(1, 0, e), [(-0.04,)])[0]
    assert sorted(rep.fixed_points.real) == pytest.approx([-0.2, 0.2], abs=1e-14)
    expect = sorted([math.exp(-0.4), math.exp(0.4)])
    assert sorted(rep.multipliers.real) == pytest.approx(expect, rel=1e-9)
    assert rep.residual < 1e-8


def test_prepared_form_parabolic_limit():
    rep = prepared_form(lambda e: model_germ(1, 0, e), [(0,)])[0]
    assert list(rep.fixed_points) == [0, 0]
    assert abs(rep.multipliers[0] - 1) < 1e-12


def test_prepared_form_k2_cube_roots():
    rep = prepared_form(lambda e: model_germ(2, 0, e), [(-0.01, 0)])[0]
    roots = [0.01 ** (1 / 3) * cmath.exp(2j * math.pi * j / 3) for j in range(3)]
    for r in roots:
        j = min(range(3), key=lambda i: abs(rep.fixed_points[i] - r))
        assert abs(rep.fixed_points[j] - r) < 1e-12
        assert abs(rep.multipliers[j] - cmath.exp(3 * r * r)) < 1e-8


def test_prepared_form_mismatch_and_correction():
    bad = lambda e: (lambda z: z + (z * z - 0.04) * 1.1)  # noqa: E731
    with pytest.raises(MultiplierMismatch):
        prepared_form(bad, [(-0.04,)])
    rep = prepared_form(bad, [(-0.04,)], correct=True)[0]
    for z in rep.fixed_points:
        h = 1e-6
        d = (rep.corrected(z + h) - rep.corrected(z - h)) / (2 * h)
        assert abs(d - cmath.exp(2 * z)) < 1e-8


# ---------------------------------------------------------------------------
# rotations

def test_rotation_trivial_tau():
    assert rotation_action((0.3 + 0.1j,), 0.5, 1) == ((0.3 + 0.1j,), 0.5)


def test_rotation_k2_matches_conjugated_field():
    eps = (Fraction(1, 3), Fraction(-2, 5))
    a = Fraction(1, 4)
    new_eps, new_a = rotation_action(eps, a, -1)
    X = FormalVectorField1D.rational_model(2, eps, a, N=10)
    Y = FormalVectorField1D.rational_model(2, new_eps, new_a, N=10)
    assert conjugate_field_by_rotation(X, -1) == Y.series


def test_rotation_not_root_of_unity():
    with pytest.raises(NotRootOfUnity):
        rotation_action((1, 2), 0, 1j)


def test_rotation_group_law_k3_exact():
    tau = sp.Rational(-1, 2) + sp.sqrt(3) * sp.I / 2
    eps0 = (sp.Rational(1, 3), sp.Rational(2, 7) + sp.I, sp.Rational(-5, 2))
    eps = eps0
    for _ in range(3):
        eps, _ = rotation_action(eps, 0, tau)
    assert all(sp.simplify(sp.expand(x - y)) == 0 for x, y in zip(eps, eps0))


# ---------------------------------------------------------------------------
# Schwarz reflections

def test_schwarz_identical_curves():
    f = schwarz_pair_diffeo(Z(8, 1 + 0j), Z(8, 1 + 0j))
    assert f.f.series.max_abs_diff(Z(8, 1 + 0j)) < 1e-15


def test_schwarz_lines_at_quarter_angle():
    h2 = TruncatedSeries((0, cmath.exp(-1j * math.pi / 4)), 8)
    f = schwarz_pair_diffeo(Z(8, 1 + 0j), h2)
    assert abs(f.f.series[1] - 1j) < 1e-15
    assert max(abs(c) for c in f.f.series.coeffs[2:]) < 1e-15


def test_schwarz_tangent_curves_parabolic():
    h2 = TruncatedSeries((0, 1, 1j), 10)
    f = schwarz_pair_diffeo(Z(10, 1 + 0j), h2)
    inv = extract_parabolic_invariants(f.f.series, tol=1e-12)
    assert inv.k >= 1
    assert f.reversal_residual < 1e-12


# ---------------------------------------------------------------------------
# properties

cplx = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(1, 3), a=cplx)
def test_property_round_trip(k, a):
    X = FormalVectorField1D.rational_model(k, (0,) * k, a, N=2 * k + 4)
    inv = extract_parabolic_invariants(flow_time_t(X, 1, 2 * k + 4))
    assert inv.k == k and abs(inv.a - a) < 1e-10


rat = st.fractions(min_value=-1, max_value=1, max_denominator=9)


@settings(max_examples=15, deadline=None)
@given(c=st.lists(rat, min_size=3, max_size=3), s=rat, t=rat)
def test_property_group_law(c, s, t):
    # exact: the float Lie series cancels terms far larger than the result
    X = FormalVectorField1D.polynomial((0, 0) + tuple(c), N=20)
    lhs = flow_time_t(X, s, 20).compose(flow_time_t(X, t, 20))
    rhs = flow_time_t(X, s + t, 20)
    assert all(lhs.series[i] == rhs.series[i] for i in range(21))


@settings(max_examples=20, deadline=None)
@given(k=st.integers(1, 2), q=st.integers(2, 3), num=st.integers(-20, 20), den=st.integers(1, 9))
def test_property_B_relation_rational(k, q, num, den):
    A = Fraction(num, den)
    if q == 2:
        fq = iterate_q(resonant_germ(1, 2, k, A, root=-1), 2)
        assert fq[4 * k + 1] == iterate_relation_B(A, k, 2)
    else:
        fq = iterate_q(resonant_germ(1, 3, k, sp.Rational(num, den), root=_omega(3)), 3)
        want = iterate_relation_B(A, k, 3)
        assert sp.simplify(sp.expand(fq[6 * k + 1]) - sp.Rational(want.numerator, want.denominator)) == 0


@settings(max_examples=20, deadline=None)
@given(k=st.integers(1, 4), e=st.lists(st.tuples(st.integers(-9, 9), st.integers(1, 9)), min_size=4, max_size=4))
def test_property_rotation_group_action(k, e):
    tau = sp.exp(2 * sp.pi * sp.I / k)
    eps0 = tuple(sp.Rational(n, d) for n, d in e[:k])
    eps = eps0
    for _ in range(k):
        eps, _ = rotation_action(eps, 0, tau)
    assert all(sp.simplify(x - y) == 0 for x, y in zip(eps, eps0))


@settings(max_examples=20, deadline=None)
@given(c1=st.lists(cplx, min_size=3, max_size=3), c2=st.lists(cplx, min_size=3, max_size=3),
       t1=st.floats(-3, 3), t2=st.floats(-3, 3))
def test_property_schwarz_reversal(c1, c2, t1, t2):
    h1 = TruncatedSeries((0, cmath.exp(1j * t1)) + tuple(c1), 12)
    h2 = TruncatedSeries((0, cmath.exp(1j * t2)) + tuple(c2), 12)
    assert schwarz_pair_diffeo(h1, h2).reversal_residual < 1e-10
