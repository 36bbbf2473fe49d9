from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest

from losik import triviality as tv
from losik.errors import DomainError, IntegrandSingular, ProfileDomainError
from losik.expr import VectorFieldSpec
from losik.jets import BPoint
from losik.prolong import flow, prolong

PROFILES = ["1", "1+r2", "2-r2", "r2"]


# -- profiles and fields ------------------------------------------------------


def test_profile_derivatives():
    f = tv.RadialProfile("1+r2")
    assert f.derivatives(0.5) == pytest.approx((1.25, 1.0, 2.0))
    assert tv.RadialProfile("3").derivatives(0.2, 1) == (3.0, 0.0)


def test_profile_domain():
    with pytest.raises(ProfileDomainError):
        tv.RadialProfile("1+r2")(-0.1)
    with pytest.raises(ProfileDomainError):
        tv.RadialProfile("1+r")(0.0)
    assert tv.RadialProfile("1+r").at_zero() == 1.0
    with pytest.raises(ProfileDomainError):
        tv.RadialProfile("0.25-r2").check_nonvanishing()
    tv.RadialProfile("1+r2").check_nonvanishing()


def test_radial_source_unit_profile(rng):
    V = tv.example_field("radial_source", "1")
    p = rng.uniform(-0.5, 0.5, 2)
    np.testing.assert_allclose(V(p), p)


def test_rotational_unit_profile(rng):
    V = tv.example_field("rotational", "1")
    p = rng.uniform(-0.5, 0.5, 2)
    np.testing.assert_allclose(V(p), [p[1], -p[0]])
    assert tv.cl_rhs(V, 0.0)(p) == 0.0


def test_valpha():
    V = tv.example_field("valpha", alpha=1.0)
    assert V([0.5])[0] == pytest.approx(math.exp(-2.0))
    assert V([0.0])[0] == 0.0
    t = V.taylor([0.0], 3)[0]
    assert not t.coeffs.any()
    # away from 0 the Taylor mode agrees with a central difference
    h = 1e-6
    fd = (V([0.5 + h])[0] - V([0.5 - h])[0]) / (2 * h)
    assert V.taylor([0.5], 1)[0].gradient()[0] == pytest.approx(fd, rel=1e-7)
    with pytest.raises(ProfileDomainError):
        tv.example_field("valpha")
    with pytest.raises(ProfileDomainError):
        tv.ValphaField(0.0)


def test_valpha_prolongs_to_zero_at_flat_point():
    F = prolong("B", tv.example_field("valpha", alpha=2.0))
    np.testing.assert_array_equal(F([0.0, 1.5]), [0.0, 0.0])


def test_unknown_example():
    with pytest.raises(ValueError):
        tv.example_field("spiral")


# -- the transport equation and its first integral --------------------------------


def test_cl_rhs_examples(rng):
    p = rng.uniform(-0.5, 0.5, 2)
    assert tv.cl_rhs(tv.example_field("radial_source", "1"), 2.0)(p) == pytest.approx(0.0, abs=1e-15)
    assert tv.forced_R("1") == 2.0
    r2 = p @ p
    assert tv.cl_rhs(tv.example_field("radial_source", "r2"), 0.0)(p) == pytest.approx(-4 * r2)
    assert tv.forced_R("r2") == 0.0
    assert tv.forced_R("2-r2") == 4.0


def test_first_integral_of_scaling_field():
    I = tv.first_integral(VectorFieldSpec.parse("y1", 1))
    assert I([2.0, 3.0]) == pytest.approx(1 - 6.0)
    F = prolong("B", VectorFieldSpec.parse("y1", 1))
    for t in (0.3, 1.0):
        p = [2.0 * math.exp(t), 3.0 * math.exp(-t)]
        assert I(p) == pytest.approx(-5.0, rel=1e-14)
    assert tv.apply_field(F, I, [2.0, 3.0]) == pytest.approx(0.0, abs=1e-14)


def test_first_integral_constant_field():
    V = VectorFieldSpec.parse("0.5, -2", 2)
    I = tv.first_integral(V)
    assert I([0.1, 0.2, 1.0, 1.0]) == pytest.approx(1.5)
    res = flow(prolong("B", V), BPoint(np.array([0.1, 0.2]), np.array([1.0, 1.0])), 0.5, 0.01)
    assert I(res.final) == pytest.approx(1.5, abs=1e-14)


@pytest.mark.parametrize("kind", ["radial_source", "rotational"])
@pytest.mark.parametrize("profile", ["1", "1+r2", "r2"])
def test_first_integral_drift(kind, profile):
    V = tv.example_field(kind, profile)
    I = tv.first_integral(V)
    res = flow(prolong("B", V), BPoint(np.array([0.3, -0.2]), np.array([0.7, 0.4])), 0.5, 1e-3)
    values = [I(s) for s in res.states]
    assert max(abs(v - values[0]) for v in values) <= 1e-8


# -- G0 ---------------------------------------------------------------------------


def test_g0_unit_profile():
    for r in (1e-6, 0.1, 0.9):
        assert tv.g0_eval("1", r, 0.5, 2.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("profile", ["1+r2", "2-r2", "r2", "r2^2"])
def test_g0_closed_forms(profile):
    R = tv.forced_R(profile)
    for r in (1e-6, 1e-3, 0.3, 0.8):
        assert tv.g0_eval(profile, r, 0.5, R) == pytest.approx(tv.g0_closed_form(profile, r, 0.5), abs=1e-8)


def test_g0_closed_form_unknown_profile():
    assert tv.g0_closed_form("exp(r2)", 0.1, 0.5) is None


def test_g0_errors():
    with pytest.raises(DomainError):
        tv.g0_eval("1", 0.0, 0.5, 2.0)
    with pytest.raises(DomainError):
        tv.g0_eval("1", 0.5, 1.2, 2.0)
    with pytest.raises(IntegrandSingular):
        tv.g0_eval("0.25-r2", 0.1, 0.9, 0.5)


@pytest.mark.parametrize(
    "profile,verdict",
    [
        ("1", "smooth-evidence"),
        ("1+r2", "smooth-evidence"),
        ("2-r2", "smooth-evidence"),
        ("r2", "divergence-evidence"),
        ("r2*(1-r2)", "divergence-evidence"),
        ("r2^2", "divergence-evidence"),
    ],
)
def test_probe_battery(profile, verdict):
    assert tv.blowup_probe(profile).verdict == verdict


def test_probe_slope_for_r2():
    rep = tv.blowup_probe("r2")
    assert rep.slope == pytest.approx(-4.0, rel=0.01)
    assert rep.R == 0.0


def test_probe_with_wrong_R_is_not_smooth():
    assert tv.blowup_probe("1", R=0.0).verdict == "divergence-evidence"


def test_probe_report_exports():
    rep = tv.blowup_probe("1+r2", r_min=1e-3)
    d = json.loads(rep.to_json())
    assert d["verdict"] == "smooth-evidence"
    assert d["samples"][-1] == [0.5, 0.0]
    assert d["samples"][0][0] == pytest.approx(1e-3)
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["r", "G0"]
    assert len(rows) == len(rep.samples) + 1
    for r, g in rep.samples:
        assert g == pytest.approx(tv.g0_closed_form("1+r2", r, 0.5), abs=1e-9)


def test_probe_domain():
    with pytest.raises(DomainError):
        tv.blowup_probe("1", r0=0.5, r_min=0.6)


# -- rotations, invariants ---------------------------------------------------------


def test_rot_average_examples(rng):
    p = rng.uniform(-1, 1, 4)
    assert tv.rot_average("y1")(p) == pytest.approx(0.0, abs=1e-15)
    assert tv.rot_average("y1^2 + y2^2")(p) == pytest.approx(p[0] ** 2 + p[1] ** 2, rel=1e-14)
    I2 = tv.ScalarFn("y4*y1 - y3*y2")
    assert tv.rot_average(I2)(p) == pytest.approx(I2(p), rel=1e-13, abs=1e-15)


def test_rot_average_averages_out_angle(rng):
    p = rng.uniform(-1, 1, 4)
    # (y^1)^2 averages to r^2 / 2
    assert tv.rot_average("y1^2")(p) == pytest.approx(0.5 * (p[0] ** 2 + p[1] ** 2), rel=1e-13)


@pytest.mark.parametrize("profile", ["1", "1+r2"])
def test_rot_average_commutes_with_lift(profile, rng):
    F = prolong("B", tv.example_field("radial_source", profile))
    G = tv.ScalarFn("y1*y3 + y2^2*y4 + y1^3")
    Q = tv.rot_average(G, nodes=64)
    VG = tv.rot_average(lambda p: tv.apply_field(F, G, p), nodes=64)
    for p in tv.random_disc_points(5, rng):
        assert tv.apply_field(F, Q, p) == pytest.approx(VG(p), abs=1e-7)


@pytest.mark.parametrize("alpha", [math.pi / 7, 1.0, math.pi])
def test_rotation_flow_matches_blocks(alpha, rng):
    Y = tv.example_field("Y")
    p = rng.uniform(-1, 1, 4)
    res = flow(Y, p, alpha, 1e-3)
    Rm = tv.rotation(alpha)
    np.testing.assert_allclose(res.final, np.concatenate([Rm @ p[:2], Rm @ p[2:]]), rtol=0, atol=1e-10)


def test_invariants_at_reference_point():
    I1, I2 = tv.example1_invariants("1")
    p = [1.0, 0.0, 0.0, 0.0]
    assert I1(p) == pytest.approx(2.0)
    assert I2(p) == 0.0


@pytest.mark.parametrize("profile", PROFILES)
def test_invariants_match_formula_and_are_killed(profile, rng):
    I1, I2 = tv.example1_invariants(profile)
    F = prolong("B", tv.example_field("radial_source", profile))
    Y = tv.example_field("Y")
    for p in tv.random_disc_points(50, rng):
        assert I1(p) == pytest.approx(tv.example1_I1_formula(profile, p), abs=1e-12)
        for field in (F, Y):
            for I in (I1, I2):
                assert abs(tv.apply_field(field, I, p)) <= 1e-9


def test_fiber_jacobian_det():
    I1, I2 = tv.example1_invariants("1+r2")
    assert tv.fiber_jacobian_det(I1, I2, [0.5, 0.0, 0.3, -0.7]) == pytest.approx(0.3125)
    I1, I2 = tv.example1_invariants("2-r2")
    assert tv.fiber_jacobian_det(I1, I2, [0.3, 0.4, 1.0, 1.0]) == pytest.approx(1.75 * 0.25)


@pytest.mark.parametrize("profile,tol", [("1", 1e-12), ("1+r2", 1e-10), ("r2", 1e-10)])
def test_example2_solution(profile, tol):
    assert tv.example2_check(profile, samples=200) <= tol


def test_random_disc_points_in_range(rng):
    pts = tv.random_disc_points(100, rng, r_range=(0.1, 0.2), fiber=0.5)
    r = np.hypot(pts[:, 0], pts[:, 1])
    assert pts.shape == (100, 4)
    assert np.all((r >= 0.1) & (r <= 0.2))
    assert np.all(np.abs(pts[:, 2:]) <= 0.5)
