from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confluence.errors import Discriminant, MultipleRoot, NotStructurallyStable
from confluence.polyfield import (
    PolyField,
    catalan,
    census,
    classify,
    des_domain_of,
    is_noncrossing,
    noncrossing_matchings,
    roots,
    separatrices_at_infinity,
    singular_points,
    zones,
)
from confluence.series import rotation_action


def _near(z, targets, tol=1e-12):
    return min(abs(z - t) for t in targets) < tol


# ---------------------------------------------------------------------------
# roots and singular points

def test_roots_square():
    rs = roots(PolyField(1, (-0.04,)))
    assert sorted(r.real for r, _ in rs) == pytest.approx([-0.2, 0.2], abs=1e-15)
    assert all(m == 1 for _, m in rs)


def test_roots_zero_eps_is_multiple():
    assert roots(PolyField(2, (0, 0))) == [(0j, 3)]


def test_roots_cube_roots():
    rs = roots(PolyField(2, (-0.001, 0)))
    want = [0.1 * cmath.exp(2j * math.pi * j / 3) for j in range(3)]
    assert len(rs) == 3 and all(_near(r, want) for r, _ in rs)


def test_polynomial_has_no_z_k_term():
    f = PolyField(3, (1, 2, 3))
    assert list(f.coeffs) == [1, 2, 3, 0, 1]
    q = PolyField(2, (5, 7), variant="Q")
    assert list(q.coeffs) == [0, 5, 7, 1]
    assert abs(q(0)) == 0


def test_stability_by_eigenvalue_sign():
    pts = {round(p.location.real, 6): p for p in singular_points(PolyField(1, (-0.04,)))}
    assert pts[0.2].stability == "repelling" and pts[-0.2].stability == "attracting"
    centers = singular_points(PolyField(1, (0.04,)))
    assert {p.stability for p in centers} == {"center"}


# ---------------------------------------------------------------------------
# separatrices and zones

def test_separatrices_k1_real_phase_line():
    g = separatrices_at_infinity(PolyField(1, (-0.04,)))
    assert len(g.separatrices) == 2
    land = {s.index: g.points[s.landing].location for s in g.separatrices}
    assert abs(land[0] - 0.2) < 1e-12 and abs(land[1] + 0.2) < 1e-12
    assert g.separatrices[0].kind == "repelling" and g.separatrices[1].kind == "attracting"


def test_slot_directions_of_z_squared():
    f = PolyField(1, (0,))
    assert list(f.slot_angles) == pytest.approx([0.0, math.pi])


def test_symmetric_k2_graph():
    g = separatrices_at_infinity(PolyField(2, (0, -1)))
    assert len(g.separatrices) == 4
    ends = [g.points[s.landing].location for s in g.separatrices]
    assert all(_near(-e, ends, 1e-10) for e in ends)
    for s in g.separatrices:
        flipped = -s.polyline[0]
        other = [t for t in g.separatrices if abs(t.polyline[0] - flipped) < 1e-8]
        assert len(other) == 1


def test_zones_k1():
    d = zones(separatrices_at_infinity(PolyField(1, (-0.04,))))
    assert len(d.zones) == 1
    z = d.zones[0]
    pts = d.graph.points
    assert abs(pts[z.alpha_limit].location - 0.2) < 1e-12
    assert abs(pts[z.omega_limit].location + 0.2) < 1e-12
    assert d.type_code.code == "(0,1)"


def test_zones_real_roots_k2():
    d = zones(separatrices_at_infinity(PolyField(2, (0, -1))))
    assert len(d.zones) == 2
    for z in d.zones:
        assert d.graph.points[z.alpha_limit].stability == "repelling"
        assert d.graph.points[z.omega_limit].stability == "attracting"
        assert z.probe_ok


def test_two_k2_types_from_real_configurations():
    a = classify(PolyField(2, (0, -1)))
    b = classify(PolyField(2, (0, 1)))
    assert a != b
    assert {a.pairing, b.pairing} == set(noncrossing_matchings(2))


def test_unstable_field_raises():
    with pytest.raises(NotStructurallyStable):
        classify(PolyField(2, (cmath.exp(0.25j * math.pi), 0)))


def test_multiple_root_not_traced():
    with pytest.raises(MultipleRoot):
        separatrices_at_infinity(PolyField(2, (0, 0)))


# ---------------------------------------------------------------------------
# DES domains and census

def test_des_k1_single_domain():
    for eps in (-0.04, 0.3 + 0.2j, 1j):
        d = des_domain_of((eps,), 1)
        assert d.domain_id == 0 and d.margin > 0


def test_des_homoclinic_reports_both_neighbours():
    d = des_domain_of((cmath.exp(0.25j * math.pi), 0), 2)
    assert d.on_bifurcation and d.domain_id is None
    assert {t.pairing for t in d.adjacent} == set(noncrossing_matchings(2))


def test_des_discriminant():
    with pytest.raises(Discriminant):
        des_domain_of((0, 0), 2)


def test_census_k3_finds_five_types():
    counts, unstable = census(3, samples=150, box=1.5, seed=3)
    assert len(counts) == catalan(3) == 5
    assert all(is_noncrossing(c) for c in counts)


@pytest.mark.parametrize("k,c", [(1, 1), (2, 2), (3, 5), (4, 14), (5, 42)])
def test_catalan(k, c):
    assert catalan(k) == c == len(noncrossing_matchings(k))


# ---------------------------------------------------------------------------
# properties

eps_st = st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(k=st.integers(1, 4), eps=st.lists(eps_st, min_size=4, max_size=4))
def test_property_counts(k, eps):
    field = PolyField(k, tuple(eps[:k]))
    if any(m > 1 for _, m in roots(field)):
        return
    g = separatrices_at_infinity(field)
    assert len(g.separatrices) == 2 * k
    assert [s.kind for s in g.separatrices] == ["repelling", "attracting"] * k
    try:
        d = zones(g)
    except NotStructurallyStable:
        return
    assert len(d.zones) == k
    assert all(s.landing is not None for s in g.separatrices)
    assert all(z.probe_ok for z in d.zones)
    assert is_noncrossing(d.type_code.pairing)


def test_zone_count_on_random_grid():
    rng = np.random.default_rng(11)
    stable = 0
    for k in (1, 2, 3, 4):
        for _ in range(60):
            eps = tuple(rng.uniform(-1.5, 1.5, k) + 1j * rng.uniform(-1.5, 1.5, k))
            try:
                d = zones(separatrices_at_infinity(PolyField(k, eps)))
            except NotStructurallyStable:
                continue
            stable += 1
            assert len(d.zones) == k
            assert all(z.probe_ok for z in d.zones)
    assert stable >= 200


@settings(max_examples=15, deadline=None)
@given(eps=st.lists(eps_st, min_size=2, max_size=2), seed=st.integers(0, 100))
def test_property_type_stable_under_small_perturbation(eps, seed):
    try:
        d = des_domain_of(tuple(eps), 2, seed=seed)
    except (Discriminant, MultipleRoot):
        return
    if d.on_bifurcation or d.margin == 0:
        return
    rng = np.random.default_rng(seed)
    delta = rng.normal(size=2) + 1j * rng.normal(size=2)
    delta *= 0.01 * d.margin / np.linalg.norm(delta)
    assert classify(PolyField(2, tuple(np.array(eps) + delta))) == d.type_code


@settings(max_examples=20, deadline=None)
@given(k=st.integers(2, 3), eps=st.lists(eps_st, min_size=3, max_size=3))
def test_property_rotation_equivariance(k, eps):
    tau = cmath.exp(2j * math.pi / k)
    e1 = tuple(eps[:k])
    e2, _ = rotation_action(e1, 0, tau)
    try:
        t1 = classify(PolyField(k, e1))
        t2 = classify(PolyField(k, e2))
    except (NotStructurallyStable, MultipleRoot):
        return
    # z = x / tau turns the portrait by -2 pi / k: slot m moves to m - 2
    assert t2 == t1.rotated(-2 % (2 * k), k)
