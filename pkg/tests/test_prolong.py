from __future__ import annotations

import io
import math

import numpy as np
import pytest

from losik import checks, jets
from losik import forms as fm
from losik.errors import BlowUp, DimensionMismatch
from losik.expr import VectorFieldSpec
from losik.jets import BPoint
from losik.prolong import (
    FlowMap,
    base_flow_jet,
    flow,
    prolong,
    prolonged_flow_consistency,
    time_average_pullback,
)
from losik.triviality import example1_closed_form, example2_closed_form, example_field, random_disc_points

SCALING = VectorFieldSpec.parse("y1", 1)


# -- components -----------------------------------------------------------


@pytest.mark.parametrize("bundle", ["S2", "GL", "O", "SL", "A", "B"])
def test_constant_field_lifts_to_constant_base_part(bundle, rng):
    V = VectorFieldSpec.parse("0.3, -1.2", 2)
    c = prolong(bundle, V)(checks.random_point(bundle, 2, rng).flat())
    np.testing.assert_array_equal(c[:2], [0.3, -1.2])
    assert not np.any(c[2:])


def test_scaling_field_on_b():
    F = prolong("B", SCALING)
    np.testing.assert_allclose(F([2.0, 5.0]), [2.0, -5.0])


def test_scaling_field_on_s2():
    # second-order part: 0 - y_11 - y_11 + y_11
    F = prolong("S2", SCALING)
    np.testing.assert_allclose(F([2.0, 3.0, 5.0]), [2.0, 3.0, -5.0])


def test_dimension_check():
    with pytest.raises(DimensionMismatch):
        prolong("B", SCALING)([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        prolong("C", SCALING)


@pytest.mark.parametrize("profile", ["1", "1+r2", "2-r2", "r2"])
def test_example_fields_match_closed_forms(profile, rng):
    F1 = prolong("B", example_field("radial_source", profile))
    F2 = prolong("B", example_field("rotational", profile))
    for p in random_disc_points(30, rng):
        np.testing.assert_allclose(F1(p), example1_closed_form(profile, p), rtol=0, atol=1e-10)
        np.testing.assert_allclose(F2(p), example2_closed_form(profile, p), rtol=0, atol=1e-10)


def test_tangent_vec_from_point():
    F = prolong("B", SCALING)
    v = F.at(BPoint(np.array([2.0]), np.array([5.0])))
    np.testing.assert_allclose(v.components, [2.0, -5.0])


# -- flows ------------------------------------------------------------------


def test_zero_field_is_stationary():
    F = prolong("B", VectorFieldSpec.parse("0, 0", 2))
    p = BPoint(np.array([0.1, 0.2]), np.array([0.3, 0.4]))
    res = flow(F, p, 1.0, 0.1)
    np.testing.assert_array_equal(res.final, p.flat())


def test_translation_is_exact():
    F = prolong("M", VectorFieldSpec.parse("1", 1))
    res = flow(F, jets.MPoint(np.array([0.25])), 1.0, 0.1)
    assert res.final[0] == pytest.approx(1.25, abs=1e-15)
    assert res.times[-1] == 1.0


def test_scaling_flow_on_b():
    F = prolong("B", SCALING)
    res = flow(F, BPoint(np.array([1.0]), np.array([1.0])), 1.0, 1e-3)
    np.testing.assert_allclose(res.final, [math.e, 1 / math.e], rtol=0, atol=1e-8)
    assert np.all(np.diff(res.times) > 0)


def test_blow_up():
    F = prolong("M", VectorFieldSpec.parse("y1^2", 1))
    with pytest.raises(BlowUp):
        flow(F, jets.MPoint(np.array([1.0])), 2.0, 1e-3)


def test_bad_step():
    with pytest.raises(ValueError):
        flow(prolong("B", SCALING), BPoint(np.array([1.0]), np.array([1.0])), 1.0, 0.0)


def test_csv_export():
    F = prolong("B", SCALING)
    res = flow(F, BPoint(np.array([1.0]), np.array([1.0])), 0.5, 0.25)
    buf = io.StringIO()
    text = res.to_csv(buf)
    assert buf.getvalue() == text
    rows = text.strip().split("\n")
    assert rows[0] == "t,y^1,y_1"
    assert len(rows) == 4
    assert [float(x) for x in rows[1].split(",")] == [0.0, 1.0, 1.0]


def test_fourth_order_convergence():
    F = prolong("B", SCALING)
    p = BPoint(np.array([1.0]), np.array([1.0]))
    exact = np.array([math.e, 1 / math.e])
    errs = [np.abs(flow(F, p, 1.0, h).final - exact).max() for h in (0.1, 0.05)]
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.2)


# -- base flow jets and consistency ---------------------------------------------


def test_base_flow_jet_of_scaling():
    j = base_flow_jet(SCALING, [2.0], 1.0, 1e-3)
    assert j.z[0] == pytest.approx(2 * math.e, rel=1e-12)
    assert j.zj[0, 0] == pytest.approx(math.e, rel=1e-12)
    assert j.zjk[0, 0, 0] == pytest.approx(0.0, abs=1e-14)


def test_base_flow_jet_of_quadratic_field():
    # y' = y^2 from y0: y(t) = y0 / (1 - t y0); d/dy0 = 1/(1-t y0)^2; d2 = 2t/(1-t y0)^3
    V = VectorFieldSpec.parse("y1^2", 1)
    j = base_flow_jet(V, [0.5], 0.4, 1e-3)
    d = 1 - 0.4 * 0.5
    assert j.z[0] == pytest.approx(0.5 / d, rel=1e-10)
    assert j.zj[0, 0] == pytest.approx(1 / d**2, rel=1e-10)
    assert j.zjk[0, 0, 0] == pytest.approx(0.8 / d**3, rel=1e-10)


def test_consistency_constant_field(rng):
    V = VectorFieldSpec.parse("0.5, -0.25", 2)
    for bundle in ("S2", "O", "A", "B"):
        assert prolonged_flow_consistency(V, bundle, checks.random_point(bundle, 2, rng), 0.3) <= 1e-14


def test_consistency_scaling_field():
    p = BPoint(np.array([1.0]), np.array([1.0]))
    assert prolonged_flow_consistency(SCALING, "B", p, 0.5) <= 1e-8


@pytest.mark.parametrize("profile", ["1", "1+r2"])
def test_consistency_example_fields(profile):
    p = BPoint(np.array([0.3, -0.2]), np.array([0.7, 0.4]))
    for kind in ("radial_source", "rotational"):
        assert prolonged_flow_consistency(example_field(kind, profile), "B", p, 0.1) <= 1e-6


@pytest.mark.parametrize("bundle", ["S2", "GL", "O", "SL", "A"])
def test_consistency_sweep(bundle, rng):
    assert max(checks.flow_consistency_sweep(bundle, 2, 2, rng)) <= 1e-6


# -- time averages ----------------------------------------------------------


def test_time_average_of_y_dy():
    chart = fm.ChartModel("M", 1)
    a = fm.CoordinateForm(chart, 1, lambda P: {(0,): P[0]}, "y dy")
    avg = time_average_pullback(a, VectorFieldSpec.parse("1", 1), "M", quadrature_nodes=4)
    for y in (-1.0, 0.0, 0.7):
        assert avg([y], [1.0]) == pytest.approx(y + 0.5, abs=1e-13)


def test_time_average_of_invariant_form():
    chart = fm.ChartModel("M", 2)
    a = fm.coordinate_one_form(chart, 0) ^ fm.coordinate_one_form(chart, 1)
    avg = time_average_pullback(a, VectorFieldSpec.parse("y2, -y1", 2), "M", quadrature_nodes=4, step=0.005)
    p = np.array([0.3, -0.4])
    E = np.eye(2)
    assert avg(p, E[0], E[1]) == pytest.approx(1.0, abs=1e-10)


def test_time_average_is_flow_invariant(rng):
    # the rotation has period one, so phi_1 is the identity and any form is phi_1-invariant
    w = 2 * math.pi
    V = VectorFieldSpec.parse(f"{w}*y2, -{w}*y1", 2)
    chart = fm.ChartModel("M", 2)
    a = fm.CoordinateForm(chart, 1, lambda P: {(0,): P[0] * P[0], (1,): P[0] * P[1]}, "a")
    avg = time_average_pullback(a, V, "M", quadrature_nodes=12, step=0.01)
    L = fm.lie_derivative(prolong("M", V), avg)
    for _ in range(3):
        p = rng.uniform(-0.5, 0.5, 2)
        assert abs(L(p, rng.standard_normal(2))) <= 1e-6


def test_time_average_bundle_check():
    a = fm.coordinate_one_form(fm.ChartModel("M", 1), 0)
    with pytest.raises(DimensionMismatch):
        time_average_pullback(a, SCALING, "B")


def test_flow_map_inverse(rng):
    F = prolong("B", example_field("radial_source", "1+r2"))
    p = random_disc_points(1, rng, r_range=(0.2, 0.5))[0]
    back = FlowMap(F, -0.2, 0.01)(FlowMap(F, 0.2, 0.01)(p))
    np.testing.assert_allclose(back, p, atol=1e-9)
