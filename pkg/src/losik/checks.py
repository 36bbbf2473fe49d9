"""
Randomized invariance sweeps shared by the command line and the test-suite.

Each sweep returns a list of per-trial maximum residuals; callers compare
them with a tolerance.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import forms as fm
from . import jets
from .expr import ComposedDiffeo, random_polynomial_diffeo
from .prolong import prolong, prolonged_flow_consistency

__all__ = [
    "random_s2_point",
    "random_point",
    "well_conditioned_diffeo",
    "canonical_forms",
    "cocycle_sweep",
    "canonicity_sweep",
    "lie_sweep",
    "flow_consistency_sweep",
    "relative_residual",
    "pullback_residual",
]


def random_s2_point(n: int, rng: np.random.Generator, spread: float = 0.3) -> jets.S2Point:
    """A frame near the identity over a point of ``[-0.5, 0.5]^n``."""
    y = rng.uniform(-0.5, 0.5, n)
    while True:
        yj = np.eye(n) + spread * rng.standard_normal((n, n))
        if np.linalg.cond(yj) < 20:
            break
    yjk = rng.standard_normal((n, n, n))
    yjk = 0.5 * (yjk + yjk.transpose(0, 2, 1))
    return jets.S2Point(y, yj, yjk)


def random_point(bundle: str, n: int, rng: np.random.Generator):
    """A random point of ``bundle``, obtained by projecting a random frame."""
    p = random_s2_point(n, rng)
    if bundle == "S2":
        return p
    q = jets.project(bundle, p)
    if bundle == "A":
        return jets.APoint(q.y, float(rng.uniform(-1, 1)), q.yi)
    return q


def well_conditioned_diffeo(n: int, rng: np.random.Generator, scale: float = 0.1, max_cond: float = 10.0):
    """A random polynomial diffeomorphism whose Jacobian is tame on ``[-1, 1]^n``."""
    probes = rng.uniform(-1, 1, (8, n))
    while True:
        h = random_polynomial_diffeo(n, rng, scale=scale)
        ok = True
        for y in probes:
            J = np.array([t.gradient() for t in h.taylor(y, 1)])
            if np.linalg.cond(J) > max_cond:
                ok = False
                break
        if ok:
            return h


def relative_residual(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


def cocycle_sweep(bundle: str, n: int, samples: int, rng: np.random.Generator) -> list:
    """``transition(g o f) = transition(g) o transition(f)`` on random data."""
    out = []
    for _ in range(samples):
        f = well_conditioned_diffeo(n, rng)
        g = well_conditioned_diffeo(n, rng)
        p = random_point(bundle, n, rng)
        direct = jets.transition(bundle, ComposedDiffeo(g, f), p).flat()
        stepwise = jets.transition(bundle, g, jets.transition(bundle, f, p)).flat()
        out.append(relative_residual(stepwise, direct))
    return out


def canonical_forms(bundle: str, n: int) -> list:
    """The forms that should be invariant under transitions of ``bundle``."""
    table: dict[str, Callable[[], list]] = {
        "S2": lambda: [fm.gamma1_form(n), fm.gvl_form("S2", n)],
        "O": lambda: [fm.lambda1_form(n), fm.gvl_form("O", n)],
        "SL": lambda: [fm.gvl_form("SL", n)],
        "A": lambda: [fm.gvl_form("A", n)],
        "GL": lambda: [fm.cl_form("GLchart", n)],
        "B": lambda: [fm.cl_form("Bchart", n)],
    }
    if bundle not in table:
        raise ValueError(f"no canonical forms on {bundle!r}")
    return table[bundle]()


def pullback_residual(form: fm.KForm, phi, p, rng: np.random.Generator, tuples: int = 200) -> float:
    """Relative gap between ``phi^* form`` and ``form`` on sampled coordinate k-tuples."""
    chart = form.chart
    flat = chart.flat(p)
    pb = fm.PulledBackForm(phi, form)
    q0, J = pb._pushforward(flat)
    tq = form.expand(q0, 0)
    tp = form.expand(flat, 0)
    k = form.degree
    if k == 0:
        return relative_residual(fm.evaluate_table(tq, J[:, :0]), fm.evaluate_table(tp, J[:, :0]))
    E = np.eye(chart.dim)
    worst = 0.0
    scale = max([1.0] + [abs(float(c)) for c in tp.values()])
    for idx in fm.random_direction_tuples(chart.dim, k, tuples, rng):
        a = fm.evaluate_table(tq, J[:, list(idx)])
        b = fm.evaluate_table(tp, E[:, list(idx)])
        worst = max(worst, abs(a - b) / scale)
    return worst


def canonicity_sweep(bundle: str, n: int, samples: int, rng: np.random.Generator, tuples: int = 200) -> list:
    """Pullback invariance of the canonical forms of ``bundle``."""
    forms = canonical_forms(bundle, n)
    out = []
    for _ in range(samples):
        h = well_conditioned_diffeo(n, rng)
        p = random_point(bundle, n, rng)
        phi = fm.TransitionMap(bundle, h, n)
        out.append(max(pullback_residual(a, phi, p, rng, tuples) for a in forms))
    return out


def lie_sweep(bundle: str, n: int, samples: int, rng: np.random.Generator) -> list:
    """``L_V~`` of each canonical form vanishes for random polynomial fields."""
    forms = canonical_forms(bundle, n)
    out = []
    for _ in range(samples):
        V = random_polynomial_diffeo(n, rng, scale=0.3)
        F = prolong(bundle, V)
        p = random_point(bundle, n, rng)
        worst = 0.0
        for a in forms:
            coeffs = fm.lie_derivative(F, a).coefficients(p)
            worst = max([worst] + [abs(c) for c in coeffs.values()])
        out.append(worst)
    return out


def flow_consistency_sweep(
    bundle: str, n: int, samples: int, rng: np.random.Generator, T: float = 0.1, step: float = 1e-3
) -> list:
    """Prolonged flow against the transition by the base-flow jet."""
    out = []
    for _ in range(samples):
        V = random_polynomial_diffeo(n, rng, scale=0.3)
        p = random_point(bundle, n, rng)
        out.append(prolonged_flow_consistency(V, bundle, p, T, step))
    return out
