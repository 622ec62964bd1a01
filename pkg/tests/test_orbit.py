from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confluence.errors import NotSiegel, OnDiscriminant
from confluence.orbit import (
    Germ,
    ModelTimeOne,
    SectorParameter,
    fatou_coordinate,
    glutsyuk_comparison,
    horn_compatibility,
    horn_map,
    lavaurs_closed_form,
    lavaurs_map,
    model_germ,
    renormalized_return_map,
    resurgence_sequence,
)
from confluence.series import TruncatedSeries

TWO_PI2 = 2 * math.pi ** 2


def _moebius_germ(N=40):
    coeffs = (0, 1) + tuple((-1) ** (n + 1) for n in range(2, N + 1))
    return Germ(TruncatedSeries(coeffs, N), lambda z: z / (1 + z))


# ---------------------------------------------------------------------------
# sector parameter

def test_sector_parameter_sqrt_is_single_valued_on_cover():
    e = SectorParameter(0.04, 3.0)
    assert abs(e.sqrt - 0.2 * cmath.exp(1.5j)) < 1e-15
    assert abs(e.turned().sqrt + e.sqrt) < 1e-15
    assert abs(e.turned(2).sqrt - e.sqrt) < 1e-15
    assert e.in_omega and not e.turned().in_omega


# ---------------------------------------------------------------------------
# Fatou coordinates

def test_fatou_of_moebius_is_one_over_z():
    g = _moebius_germ()
    phi = fatou_coordinate(g, "attracting", normalization="asymptotic")
    zs = np.array([0.1, 0.2 + 0.05j, 0.05 - 0.02j, 0.3])
    assert np.max(np.abs(phi(zs) - 1 / zs)) < 1e-12
    assert phi.defect(zs, g) < 1e-13


@pytest.mark.parametrize("a", [0.0, 0.3, -0.5 + 0.2j])
def test_model_fatou_defect(a):
    m = model_germ(1, a)
    phi = fatou_coordinate(m, "attracting")
    zs = -0.05 * np.exp(1j * np.linspace(-0.5, 0.5, 5))
    assert phi.defect(zs, m) < 1e-10


def test_cubic_germ_fatou_defect_both_petals():
    p = Germ.polynomial([0, 1, 1, 1])
    zs = 0.04 * np.exp(1j * (math.pi + np.linspace(-0.6, 0.6, 7)))
    assert fatou_coordinate(p, "attracting").defect(zs, p) < 1e-8
    assert fatou_coordinate(p, "repelling").defect(-zs, p) < 1e-8


def test_base_normalization_vanishes_at_base_point():
    p = Germ.polynomial([0, 1, 1, 1])
    phi = fatou_coordinate(p, "attracting", base_point=-0.03)
    assert abs(phi(-0.03)) < 1e-13


# ---------------------------------------------------------------------------
# horn maps

@pytest.mark.parametrize("a", [0.0, 0.2])
def test_model_horn_maps_linear_and_compatible(a):
    m = model_germ(1, a)
    h0, hi = horn_map(m, "0"), horn_map(m, "inf")
    assert h0.nonlinearity < 1e-6 and hi.nonlinearity < 1e-6
    prod, want = horn_compatibility(m)
    assert abs(prod - want) < 1e-4 * abs(want)


def test_quartic_germ_horn_map_is_nonlinear_and_height_independent():
    p = Germ.polynomial([0, 1, 1, 0, 1])
    h = horn_map(p, "0")
    assert h.nonlinearity > 1e-6
    h3 = horn_map(p, "0", height=3.0)
    assert abs(h3.nonlinearity - h.nonlinearity) < 1e-8 * h.nonlinearity
    prod, want = horn_compatibility(p)
    assert abs(prod - want) < 1e-4 * abs(want)


def test_horn_sample_json_shape():
    d = horn_map(model_germ(1, 0.0), "0", samples=16).to_json()
    assert len(d["samples"]) == 16 and len(d["linear_part"]) == 2


# ---------------------------------------------------------------------------
# Lavaurs factor

@pytest.mark.parametrize("a", [0.0, 0.3])
@pytest.mark.parametrize("theta", [3 * math.pi / 4, math.pi, -2.5])
def test_lavaurs_matches_residue_oracle(a, theta):
    e = SectorParameter(0.01, theta)
    L = lavaurs_map(e, a)
    # clockwise residue at +s of (1 + a z)/(z^2 - s^2) is -2 pi i (1 + a s)/(2 s)
    s = e.sqrt
    assert abs(L.C - TWO_PI2 * (1 + a * s)) < 1e-12
    assert abs(L.K - lavaurs_closed_form(e, a)) < 1e-12 * abs(L.K)


def test_lavaurs_log_modulus_scales_like_inverse_sqrt():
    rs = np.geomspace(1e-3, 1e-1, 12)
    y = [math.log(abs(math.log(abs(lavaurs_map(SectorParameter(r, 3 * math.pi / 4)).K)))) for r in rs]
    assert abs(np.polyfit(np.log(rs), y, 1)[0] + 0.5) < 0.01


def test_lavaurs_errors():
    with pytest.raises(NotSiegel):
        lavaurs_map(SectorParameter(0.01, 0.3))
    with pytest.raises(OnDiscriminant):
        lavaurs_map(SectorParameter(0.0, math.pi))


@settings(max_examples=40, deadline=None)
@given(r=st.floats(1e-3, 0.2), theta=st.floats(1.7, 3.1), sign=st.sampled_from([1, -1]))
def test_property_branch_swap_inverts_K(r, theta, sign):
    e = SectorParameter(r, sign * theta)
    K, K2 = lavaurs_map(e).K, lavaurs_map(e.turned()).K
    assert abs(K * K2 - 1) < 1e-9


# ---------------------------------------------------------------------------
# return maps and resurgence

def test_model_return_map_linear_with_multiplier_K():
    R = renormalized_return_map(SectorParameter(0.01, 3.0), 0.0)
    assert np.max(np.abs(R.tau - R.K * R.w)) == 0
    assert R.multiplier == R.K


def test_return_map_multiplicativity():
    psi = 0.7 + 0.4j
    R = renormalized_return_map(SectorParameter(0.02, -2.8), 0.1, psi)
    assert abs(abs(R.multiplier) - abs(R.K) * abs(psi)) < 1e-10 * abs(R.multiplier)


def test_resurgence_leading_term():
    seq = resurgence_sequence(1.0, 0.0, 0, 1, range(1, 6))
    for d in seq:
        assert abs(d["sqrt_eps"] - TWO_PI2 / (2j * math.pi * d["n"])) < 1e-12


def test_resurgence_return_multiplier_hits_root_of_unity():
    psi, a = 1.0 + 0.1j, 0.1
    for d in resurgence_sequence(psi, a, 1, 3, range(30, 41)):
        s = d["sqrt_eps"]
        R = renormalized_return_map(SectorParameter(abs(s) ** 2, 2 * cmath.phase(s)), a, psi)
        assert abs(R.multiplier - cmath.exp(2j * math.pi / 3)) < 1e-4


def test_resurgence_rejects_non_coprime():
    with pytest.raises(ValueError):
        resurgence_sequence(1.0, 0.0, 2, 4, range(1, 3))


@settings(max_examples=25, deadline=None)
@given(mod=st.floats(0.5, 2.0), arg=st.floats(-1.0, 1.0), a=st.floats(-0.3, 0.3),
       pq=st.sampled_from([(0, 1), (1, 2), (1, 3), (2, 3), (3, 5)]))
def test_property_resurgence_residual_and_monotone(mod, arg, a, pq):
    seq = resurgence_sequence(mod * cmath.exp(1j * arg), a, *pq, range(3, 41))
    assert max(d["residual"] for d in seq) < 1e-8
    mags = [abs(d["eps"]) for d in seq]
    assert all(m2 < m1 for m1, m2 in zip(mags, mags[1:]))


# ---------------------------------------------------------------------------
# Poincare domain

def test_glutsyuk_model_transition_trivial():
    f = ModelTimeOne(1, 0, (-0.01j,))
    d = glutsyuk_comparison(f, 0.01j)
    assert d.norm < 1e-8 and d.koenigs_defect < 1e-10


def test_glutsyuk_perturbed_transition_stable_under_refinement():
    f = ModelTimeOne(1, 0, (-0.01j,))
    g = lambda z: f(z) + z ** 4  # noqa: E731
    norms = [glutsyuk_comparison(g, 0.01j, samples=n).norm for n in (58, 64, 70)]
    assert norms[1] > 1e-4
    assert max(norms) - min(norms) < 1e-6
