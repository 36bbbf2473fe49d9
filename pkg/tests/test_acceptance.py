"""
Exit criteria of the toolkit, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (visible in the terminal even
under capture) before asserting.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from losik import checks
from losik import forms as fm
from losik import triviality as tv
from losik.expr import VectorFieldSpec
from losik.jets import BPoint
from losik.prolong import flow, prolong, prolonged_flow_consistency

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    def report(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})")
        assert ok, detail

    return report


def _rng(k: int) -> np.random.Generator:
    return np.random.default_rng(1000 + k)


def test_cocycle_law(verdict):
    rng = _rng(1)
    worst = 0.0
    for bundle in ("S2", "O", "SL", "A", "B"):
        for n in (1, 2, 3):
            worst = max(worst, max(checks.cocycle_sweep(bundle, n, 200, rng)))
    verdict(1, "cocycle law, 200 pairs per bundle and n", worst <= 1e-9, f"max relative residual {worst:.2e}")


def test_canonicity(verdict):
    rng = _rng(2)
    worst = 0.0
    for bundle in ("S2", "O", "SL", "A", "GL", "B"):
        for n in (1, 2):
            worst = max(worst, max(checks.canonicity_sweep(bundle, n, 50, rng)))
    verdict(2, "pullback invariance of the canonical forms", worst <= 1e-9, f"max residual {worst:.2e}")


def _table_diff(a, b, p):
    return fm.max_abs_difference(a.expand(p, 0), b.expand(p, 0))


def test_projection_of_lambda1(verdict):
    rng = _rng(3)
    worst = 0.0
    for n in (1, 2):
        pr = fm.ProjectionMap("O", n)
        L, G = fm.lambda1_form(n), fm.gamma1_form(n)
        pL, pdL, dG = fm.pullback_map(pr, L), fm.pullback_map(pr, fm.dform(L)), fm.dform(G)
        for _ in range(100):
            p = checks.random_s2_point(n, rng).flat()
            worst = max(worst, _table_diff(pL, G, p), _table_diff(pdL, dG, p))
    verdict(3, "p*Lambda1 = Gamma1 and p*dLambda1 = dGamma1", worst <= 1e-10, f"max residual {worst:.2e}")


def test_d_gamma1_identity(verdict):
    rng = _rng(4)
    worst = 0.0
    for n in (1, 2, 3):
        chart = fm.ChartModel("S2", n)
        trace = fm.constant_form(chart, 2, fm._trace_two_form(chart))
        dG = fm.dform(fm.gamma1_form(n))
        for _ in range(50):
            worst = max(worst, _table_diff(dG, trace, checks.random_s2_point(n, rng).flat()))
    verdict(4, "dGamma1 = dy^i_ik ^ dy^k", worst <= 1e-10, f"max residual {worst:.2e}")


def test_flow_consistency_and_convergence(verdict):
    rng = _rng(5)
    V = tv.example_field("radial_source", "1+r2")
    worst = 0.0
    for p in tv.random_disc_points(5, rng, r_range=(0.1, 0.8), fiber=1.0):
        bp = BPoint(p[:2], p[2:])
        worst = max(worst, prolonged_flow_consistency(V, "B", bp, 0.1, 1e-3))
    F = prolong("B", VectorFieldSpec.parse("y1", 1))
    p0 = BPoint(np.array([1.0]), np.array([1.0]))
    exact = np.array([math.e, 1 / math.e])
    errs = [np.abs(flow(F, p0, 1.0, h).final - exact).max() for h in (0.1, 0.05)]
    ratio = errs[0] / errs[1]
    ok = worst <= 1e-6 and abs(ratio - 16.0) <= 0.2 * 16.0
    verdict(5, "prolonged flow vs induced bundle map", ok, f"residual {worst:.2e}, step-halving ratio {ratio:.2f}")


def test_example_closed_forms(verdict):
    rng = _rng(6)
    worst = 0.0
    for profile in ("1", "1+r2", "2-r2", "r2"):
        F1 = prolong("B", tv.example_field("radial_source", profile))
        F2 = prolong("B", tv.example_field("rotational", profile))
        for p in tv.random_disc_points(100, rng):
            worst = max(
                worst,
                np.abs(F1(p) - tv.example1_closed_form(profile, p)).max(),
                np.abs(F2(p) - tv.example2_closed_form(profile, p)).max(),
            )
    verdict(6, "lifted example fields match their closed forms", worst <= 1e-10, f"max residual {worst:.2e}")


def test_conservation(verdict):
    rng = _rng(7)
    drift = 0.0
    for kind in ("radial_source", "rotational"):
        for profile in ("1", "1+r2", "r2"):
            V = tv.example_field(kind, profile)
            I = tv.first_integral(V)
            p = tv.random_disc_points(1, rng, r_range=(0.2, 0.7), fiber=1.0)[0]
            res = flow(prolong("B", V), BPoint(p[:2], p[2:]), 0.5, 1e-3)
            vals = np.array([I(s) for s in res.states])
            drift = max(drift, np.abs(vals - vals[0]).max())
    I1, I2 = tv.example1_invariants("1+r2")
    F = prolong("B", tv.example_field("radial_source", "1+r2"))
    Y = tv.example_field("Y")
    killed = 0.0
    for p in tv.random_disc_points(1000, rng):
        for field in (F, Y):
            for I in (I1, I2):
                killed = max(killed, abs(tv.apply_field(field, I, p)))
    ok = drift <= 1e-8 and killed <= 1e-9
    verdict(7, "first integral and invariants", ok, f"drift {drift:.2e}, max |V~I|, |YI| {killed:.2e}")


def test_blowup_battery(verdict):
    expected = {
        "1": "smooth-evidence",
        "1+r2": "smooth-evidence",
        "2-r2": "smooth-evidence",
        "r2": "divergence-evidence",
        "r2*(1-r2)": "divergence-evidence",
        "r2^2": "divergence-evidence",
    }
    wrong = []
    gap = 0.0
    for profile, want in expected.items():
        rep = tv.blowup_probe(profile)
        if rep.verdict != want:
            wrong.append(profile)
        if want == "smooth-evidence":
            g = tv.g0_eval(profile, 1e-6, 0.5, tv.forced_R(profile))
            gap = max(gap, abs(g - tv.g0_closed_form(profile, 1e-6, 0.5)))
    slope = tv.blowup_probe("r2").slope
    ok = not wrong and gap <= 1e-6 and abs(slope + 4.0) <= 0.04
    detail = f"misclassified {wrong or 'none'}, |G0 - closed form| {gap:.2e}, r2 slope {slope:.4f}"
    verdict(8, "G0 blow-up battery", ok, detail)


def test_rotational_example(verdict):
    worst = max(tv.example2_check(profile, samples=1000, seed=9) for profile in ("1", "1+r2", "r2"))
    verdict(9, "rotational example solves the transport equation", worst <= 1e-10, f"max |V~G| {worst:.2e}")


def test_gvl_a_volume_coefficient(verdict):
    c = fm.ChartModel("A", 2)
    order = [c.x(), c.lower(1), c.base(1), c.lower(2), c.base(2)]
    value = fm.gvl_form("A", 2).coefficient(np.zeros(c.dim), order)
    verdict(10, "gvl on A, n = 2", abs(value + 2.0) <= 1e-12, f"coefficient {value!r}")
