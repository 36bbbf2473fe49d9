"""
Prolongation of base vector fields to the bundle charts, and their flows.

A :class:`ProlongedField` is the infinitesimal generator of the bundle maps
induced by the flow of a base field ``V``. Its components only need the
value, first and second derivatives of ``V`` at the base point, which come
from Taylor expansions of the field, so the evaluator accepts Taylor-valued
points too (that is what the exterior calculus needs).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import jets
from ._generic import as_array, const, field_jet, is_generic
from .errors import BlowUp, DimensionMismatch, DomainError
from .forms import ChartModel, KForm, PulledBackForm, SumForm, TangentVec

__all__ = [
    "ProlongedField",
    "prolong",
    "FlowResult",
    "flow",
    "FlowMap",
    "base_flow_jet",
    "prolonged_flow_consistency",
    "time_average_pullback",
    "BLOWUP_THRESHOLD",
]

BLOWUP_THRESHOLD = 1e12


def _tensordot(a, b, axes):
    if is_generic(a) or is_generic(b):
        a = np.asarray(a, dtype=object)
        b = np.asarray(b, dtype=object)
    return np.tensordot(a, b, axes=axes)


def _sum_generic(values):
    total = 0.0
    for v in values:
        total = total + v
    return total


class ProlongedField:
    """The lift of a base field ``V`` to a bundle chart.

    Call it on a flat coordinate array (floats or Taylor values) to get the
    flat components, or use :meth:`at` on a bundle point for a
    :class:`~losik.forms.TangentVec`.
    """

    def __init__(self, bundle: str, V):
        if bundle not in jets.BUNDLES:
            raise ValueError(f"unknown bundle {bundle!r}")
        self.bundle = bundle
        self.V = V
        self.n = V.n
        self.chart = ChartModel(bundle, V.n)

    def __repr__(self):
        return f"ProlongedField({self.bundle!r}, n={self.n})"

    def __call__(self, flat):
        flat = as_array(list(flat))
        if flat.shape != (self.chart.dim,):
            raise DimensionMismatch(f"{self.chart!r} expects {self.chart.dim} coordinates")
        p = jets.point_from_flat(self.bundle, flat, self.n)
        return self.components(p)

    def at(self, p) -> TangentVec:
        return TangentVec(self.chart, self.components(p))

    def components(self, p):
        """Flat components of the prolonged field at the bundle point ``p``."""
        n = self.n
        nderiv = 0 if self.bundle == "M" else 2
        jet = field_jet(self.V, p.y, max(nderiv, 1))
        val, DV = jet[0], jet[1]
        D2V = jet[2] if nderiv == 2 else None
        parts = [list(val)]
        b = self.bundle
        if b == "M":
            return as_array(parts[0])
        div = _sum_generic(DV[i, i] for i in range(n))
        if b in ("A", "B"):
            grad_div = [_sum_generic(D2V[j, j, i] for j in range(n)) for i in range(n)]
            yi = np.asarray(p.yi)
            lower = [grad_div[i] - _sum_generic(DV[j, i] * yi[j] for j in range(n)) for i in range(n)]
            if b == "A":
                parts.append([div])
            parts.append(lower)
            return as_array([c for part in parts for c in part])
        if b == "SL":
            parts.append([div * p.ydet])
        elif b == "S2":
            parts.append(list(np.asarray(_tensordot(DV, p.yj, ([1], [0]))).ravel()))
        elif b == "O":
            Y = np.asarray(p.yij)
            DVY = _tensordot(DV, Y, ([1], [0]))
            W = DVY + DVY.T
            parts.append([W[i, j] for i in range(n) for j in range(i, n)])
        yjk = np.asarray(p.yjk)
        t2 = np.transpose(_tensordot(yjk, DV, ([1], [0])), (0, 2, 1))
        t3 = _tensordot(yjk, DV, ([2], [0]))
        t4 = _tensordot(DV, yjk, ([1], [0]))
        T = D2V - t2 - t3 + t4
        parts.append([T[i, j, k] for i in range(n) for j in range(n) for k in range(j, n)])
        return as_array([c for part in parts for c in part])


def prolong(bundle: str, V) -> ProlongedField:
    """Lift ``V`` to the bundle chart ``bundle`` (any of ``jets.BUNDLES``)."""
    return ProlongedField(bundle, V)


# -- flows ----------------------------------------------------------------


@dataclass
class FlowResult:
    """Fixed-step RK4 trajectory in flat chart coordinates."""

    chart: ChartModel
    times: np.ndarray
    states: np.ndarray
    step: float
    order: int = 4

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def final_point(self):
        return self.chart.point(self.final)

    def to_csv(self, stream=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.chart.names])
        for t, s in zip(self.times, self.states):
            w.writerow([repr(float(t)), *(repr(float(x)) for x in s)])
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


def _rk4_steps(T: float, step: float):
    if step <= 0:
        raise ValueError("step must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    nsteps = max(1, int(np.ceil(T / step - 1e-9))) if T > 0 else 0
    return nsteps, (T / nsteps if nsteps else 0.0)


def _check_state(state, t):
    c = const(state)
    if not np.all(np.isfinite(c)) or np.abs(c).max(initial=0.0) > BLOWUP_THRESHOLD:
        raise BlowUp(f"trajectory blew up near t={t:.6g}")


def _rk4(F, state, h):
    k1 = as_array(F(state))
    k2 = as_array(F(state + (0.5 * h) * k1))
    k3 = as_array(F(state + (0.5 * h) * k2))
    k4 = as_array(F(state + h * k3))
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def flow(F: ProlongedField, p0, T: float, step: float) -> FlowResult:
    """Integrate the prolonged field from ``p0`` to time ``T`` with classical RK4.

    The step is shrunk slightly when needed so the last sample lands on ``T``.
    """
    state = F.chart.flat(p0)
    nsteps, h = _rk4_steps(T, step)
    times = [0.0]
    states = [state.copy()]
    for s in range(nsteps):
        try:
            state = np.asarray(_rk4(F, state, h), dtype=float)
        except DomainError as exc:
            raise DomainError(f"trajectory left the chart near t={(s + 1) * h:.6g}: {exc}") from exc
        _check_state(state, (s + 1) * h)
        times.append((s + 1) * h)
        states.append(state.copy())
    return FlowResult(F.chart, np.array(times), np.array(states), h)


class FlowMap:
    """Time-``t`` flow of a chart field, usable as a map in pullbacks.

    Works on Taylor-valued points, so derivatives of the flow map come out of
    the same RK4 recursion.
    """

    def __init__(self, F, t: float, step: float = 0.05):
        self.F = F
        self.t = float(t)
        self.step = step
        self.source = self.target = F.chart

    def __call__(self, flat):
        state = as_array(list(flat))
        nsteps, h = _rk4_steps(abs(self.t), self.step)
        h = h if self.t >= 0 else -h
        for s in range(nsteps):
            state = as_array(list(_rk4(self.F, state, h)))
            _check_state(state, (s + 1) * h)
        return state


def base_flow_jet(V, y0, T: float, step: float) -> jets.Jet2:
    """2-jet at ``y0`` of the time-``T`` flow of ``V``.

    Integrates the base ODE together with its first and second variational
    equations, ``J' = DV J`` and ``H' = D2V(J, J) + DV H``.
    """
    y0 = np.asarray(y0, dtype=float)
    n = V.n
    if y0.shape != (n,):
        raise DimensionMismatch("starting point has the wrong dimension")
    sizes = (n, n * n, n * n * n)

    def unpack(s):
        return s[:n], s[n : n + n * n].reshape(n, n), s[n + n * n :].reshape(n, n, n)

    def rhs(s):
        y, J, H = unpack(s)
        val, DV, D2V = field_jet(V, y, 2)
        dJ = DV @ J
        dH = np.einsum("iab,ap,bq->ipq", D2V, J, J) + np.einsum("ia,apq->ipq", DV, H)
        return np.concatenate([val, dJ.ravel(), dH.ravel()])

    state = np.concatenate([y0, np.eye(n).ravel(), np.zeros(sizes[2])])
    nsteps, h = _rk4_steps(T, step)
    for s in range(nsteps):
        state = _rk4(rhs, state, h)
        _check_state(state, (s + 1) * h)
    y, J, H = unpack(state)
    return jets.Jet2(y.copy(), J.copy(), 0.5 * (H + H.transpose(0, 2, 1)), y0.copy())


def prolonged_flow_consistency(V, bundle: str, p0, T: float, step: float = 1e-3) -> float:
    """Max coordinate gap between the prolonged flow and the induced bundle map.

    Path (a) integrates ``prolong(bundle, V)`` from ``p0``; path (b) applies
    ``transition(bundle, phi_T, p0)`` with ``phi_T`` the 2-jet of the base flow.
    """
    F = prolong(bundle, V)
    a = flow(F, p0, T, step).final
    jet = base_flow_jet(V, np.asarray(const(p0.y), dtype=float), T, step)
    b = np.asarray(const(jets.transition(bundle, jet, p0).flat()), dtype=float)
    return float(np.abs(a - b).max())


def time_average_pullback(a: KForm, V, bundle: str, quadrature_nodes: int = 8, step: float = 0.05) -> KForm:
    """``int_0^1 phi_t^* a dt`` by Gauss-Legendre quadrature in ``t``.

    ``phi_t`` is the flow of ``prolong(bundle, V)``; ``bundle`` must match the
    form's chart.
    """
    if a.chart.bundle != bundle:
        raise DimensionMismatch(f"form lives on {a.chart.bundle}, not {bundle}")
    F = prolong(bundle, V)
    nodes, weights = np.polynomial.legendre.leggauss(quadrature_nodes)
    terms = []
    for x, w in zip(nodes, weights):
        t = 0.5 * (x + 1.0)
        terms.append((0.5 * float(w), PulledBackForm(FlowMap(F, t, step), a)))
    return SumForm(terms)
