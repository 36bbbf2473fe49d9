"""
First-CL-class laboratory on the disc: radial examples, the transport equation,
its first integral, the ``G0`` quadrature and a blow-up probe.

Everything lives on the B chart over the disc, with flat coordinates
``(y^1, y^2, y_1, y_2)``. In expressions over that chart they are written
``y1, y2, y3, y4`` and ``r``/``r2`` refer to the base coordinates only.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import expr as ex
from . import taylor as tm
from ._generic import as_array, const, field_jet, taylor_point
from .errors import DimensionMismatch, DomainError, IntegrandSingular, ProfileDomainError
from .forms import ChartModel
from .prolong import ProlongedField, prolong
from .taylor import TaylorValue

__all__ = [
    "RadialProfile",
    "ValphaField",
    "ChartExprField",
    "ScalarFn",
    "example_field",
    "ClRhs",
    "cl_rhs",
    "forced_R",
    "FirstIntegralFn",
    "first_integral",
    "apply_field",
    "g0_eval",
    "g0_closed_form",
    "CLReport",
    "blowup_probe",
    "rotation",
    "rot_average",
    "example1_invariants",
    "fiber_jacobian_det",
    "example2_check",
    "random_disc_points",
    "B_CHART",
]

B_CHART = ChartModel("B", 2)


# -- profiles ------------------------------------------------------------


class RadialProfile:
    """A radial profile ``f`` written in ``r2`` (smooth at 0) or ``r``.

    ``r``-authored profiles are only evaluated at ``r > 0``.
    """

    def __init__(self, src):
        if isinstance(src, RadialProfile):
            src = src.source
        if isinstance(src, str):
            self.expr = ex.parse(src, 0)
            self.source = src.strip()
        else:
            self.expr = src
            self.source = ex.to_source(src)
        self.uses_r = ex.uses_symbol(self.expr, "r")
        self._fn = ex.compile_expr(self.expr)

    def __repr__(self):
        return f"RadialProfile({self.source!r})"

    def _check_r(self, r: float):
        if r < 0 or (self.uses_r and r == 0):
            raise ProfileDomainError(f"profile {self.source!r} cannot be evaluated at r={r}")

    def __call__(self, r: float) -> float:
        self._check_r(r)
        return float(self._fn(ex.Env((), 0, r2=r * r, r=r)))

    def derivatives(self, r: float, order: int = 2) -> tuple:
        """``(f(r), f'(r), ..., f^(order)(r))`` by Taylor expansion in ``r``."""
        self._check_r(r)
        t = TaylorValue.variable(0, 1, order, float(r))
        v = self._fn(ex.Env((), 0, r2=t * t, r=t))
        if not isinstance(v, TaylorValue):
            return (float(v),) + (0.0,) * order
        return tuple(float(v.partial((k,))) for k in range(order + 1))

    def at_zero(self) -> float:
        """``f(0)``; for ``r``-authored profiles the one-sided limit is taken by evaluating the formula at 0."""
        return float(self._fn(ex.Env((), 0, r2=0.0, r=0.0)))

    def check_nonvanishing(self, grid: Sequence[float] | None = None) -> None:
        """Spot-check ``f != 0`` on (0, 1)."""
        grid = np.linspace(0.01, 0.99, 99) if grid is None else grid
        vals = np.array([self(float(r)) for r in grid])
        if np.any(vals == 0) or np.any(np.sign(vals) != np.sign(vals[0])):
            raise ProfileDomainError(f"profile {self.source!r} vanishes on (0, 1)")


def _times(a: ex.Expr, b: ex.Expr) -> ex.Expr:
    return ex.BinOp("*", a, b)


class ValphaField:
    """``V(x) = exp(-1/|x|^alpha)`` on the line, flat at ``x = 0``.

    At 0 every derivative vanishes, so the expansion there is exactly zero.
    """

    def __init__(self, alpha: float):
        if not alpha > 0:
            raise ProfileDomainError("alpha must be positive")
        self.alpha = float(alpha)
        self.n = 1

    def __repr__(self):
        return f"ValphaField(alpha={self.alpha})"

    def taylor(self, center, order: int = tm.DEFAULT_ORDER) -> list:
        x0 = float(np.asarray(center, dtype=float).reshape(-1)[0])
        if x0 == 0.0:
            return [TaylorValue.constant(0.0, 1, order)]
        x = TaylorValue.variable(0, 1, order, x0)
        return [(-(abs(x) ** (-self.alpha))).exp()]

    def __call__(self, point) -> np.ndarray:
        x = float(np.asarray(point, dtype=float).reshape(-1)[0])
        return np.array([0.0 if x == 0.0 else math.exp(-(abs(x) ** -self.alpha))])


class ChartExprField:
    """A vector field on a bundle chart given by expressions in the flat coordinates."""

    def __init__(self, components: Sequence[ex.Expr], chart: ChartModel, base_n: int | None = None):
        if len(components) != chart.dim:
            raise DimensionMismatch(f"{chart!r} fields need {chart.dim} components")
        self.chart = chart
        self.components = tuple(components)
        self.base_n = chart.n if base_n is None else base_n
        self._fns = [ex.compile_expr(c) for c in self.components]

    @classmethod
    def parse(cls, src: str, chart: ChartModel):
        return cls(ex.parse_list(src, chart.dim), chart)

    def __call__(self, flat):
        env = ex.Env(list(flat), self.base_n)
        return as_array([f(env) for f in self._fns])


class ScalarFn:
    """A scalar expression over the flat coordinates of a chart."""

    def __init__(self, e, chart: ChartModel = B_CHART, base_n: int | None = None):
        self.chart = chart
        self.base_n = chart.n if base_n is None else base_n
        if isinstance(e, str):
            self.source = e.strip()
            e = ex.parse(e, chart.dim)
        else:
            self.source = ex.to_source(e)
        self.expr = e
        self._fn = ex.compile_expr(e)

    def __repr__(self):
        return f"ScalarFn({self.source!r})"

    def __call__(self, flat):
        return self._fn(ex.Env(list(flat), self.base_n))


def example_field(kind: str, profile=None, alpha: float | None = None):
    """The example fields on the disc.

    ``radial_source`` is ``f(r)(y^1, y^2)``, ``rotational`` is
    ``f(r)(y^2, -y^1)``, ``Y`` is the simultaneous rotation field on the B
    chart and ``valpha`` is the flat one-dimensional field.
    """
    if kind in ("radial_source", "rotational"):
        f = RadialProfile("1" if profile is None else profile)
        y1, y2 = ex.Var(1), ex.Var(2)
        if kind == "radial_source":
            comps = (_times(f.expr, y1), _times(f.expr, y2))
        else:
            comps = (_times(f.expr, y2), ex.Neg(_times(f.expr, y1)))
        return ex.VectorFieldSpec(comps, 2)
    if kind == "Y":
        return ChartExprField.parse("y2, -y1, y4, -y3", B_CHART)
    if kind == "valpha":
        if alpha is None:
            raise ProfileDomainError("valpha needs alpha")
        return ValphaField(alpha)
    raise ValueError(f"unknown example field {kind!r}")


# -- the transport equation ----------------------------------------------


def _divergence(V, y):
    _, DV = field_jet(V, y, 1)
    total = 0.0
    for i in range(V.n):
        total = total + DV[i, i]
    return total


@dataclass(frozen=True)
class ClRhs:
    """Right-hand side ``-div V + R`` of the transport equation, on base points."""

    V: object
    R: float = 0.0

    def __call__(self, y):
        return -_divergence(self.V, as_array(list(y))) + self.R


def cl_rhs(V, R: float = 0.0) -> ClRhs:
    return ClRhs(V, float(R))


def forced_R(profile) -> float:
    """``2 f(0)``: the only constant for which ``G0`` can extend smoothly."""
    return 2.0 * RadialProfile(profile).at_zero()


class FirstIntegralFn:
    """``div V - V^i y_i`` on B-chart points (flat, floats or Taylor values)."""

    def __init__(self, V):
        self.V = V
        self.chart = ChartModel("B", V.n)

    def __call__(self, flat):
        flat = as_array(list(flat))
        n = self.V.n
        y, yi = flat[:n], flat[n:]
        val, DV = field_jet(self.V, y, 1)
        total = 0.0
        for i in range(n):
            total = total + DV[i, i] - val[i] * yi[i]
        return total


def first_integral(V) -> FirstIntegralFn:
    return FirstIntegralFn(V)


def apply_field(F, G: Callable, p) -> float:
    """Directional derivative ``F(G)`` at the flat point ``p``."""
    p = np.asarray(p, dtype=float)
    g = G(taylor_point(p, 1))
    if not isinstance(g, TaylorValue):
        return 0.0
    return float(np.dot(g.gradient(), const(F(p))))


# -- G0 and the blow-up probe ----------------------------------------------


def _g0_integrand(f: RadialProfile, R: float) -> Callable[[float], float]:
    """Integrand of ``G0`` in ``u = ln rho``: ``(2 f + rho f' - R) / f``."""

    def g(u):
        rho = math.exp(u)
        f0, f1 = f.derivatives(rho, 1)
        if f0 == 0.0:
            raise IntegrandSingular(f"f vanishes at rho={rho:.6g}")
        return (2.0 * f0 + rho * f1 - R) / f0

    return g


def _check_sign(f: RadialProfile, a: float, b: float, samples: int = 65):
    lo, hi = min(a, b), max(a, b)
    vals = np.array([f(float(r)) for r in np.geomspace(lo, hi, samples)])
    if np.any(vals == 0.0) or np.any(np.sign(vals) != np.sign(vals[0])):
        raise IntegrandSingular(f"profile vanishes between {lo:.3g} and {hi:.3g}")


def _quad(g, a: float, b: float) -> float:
    val, _ = integrate.quad(g, a, b, epsabs=1e-10, epsrel=1e-12, limit=200)
    return float(val)


def g0_eval(profile, r: float, r0: float, R: float) -> float:
    """``G0(r) = -int_{r0}^{r} (2 f + f' rho - R) / (f rho) drho``."""
    f = RadialProfile(profile)
    if not (0 < r < 1 and 0 < r0 < 1):
        raise DomainError("g0_eval needs 0 < r, r0 < 1")
    _check_sign(f, r, r0)
    return -_quad(_g0_integrand(f, float(R)), math.log(r0), math.log(r))


def g0_closed_form(profile: str, r: float, r0: float) -> float | None:
    """Hand-derived ``G0`` (with ``R = 2 f(0)``) for a few reference profiles."""
    key = profile.replace(" ", "")
    table = {
        "1": lambda: 0.0,
        "1+r2": lambda: 2 * math.log(1 + r0**2) - 2 * math.log(1 + r**2),
        "2-r2": lambda: 2 * math.log(2 - r0**2) - 2 * math.log(2 - r**2),
        "r2": lambda: -4 * math.log(r / r0),
        "r2^2": lambda: -6 * math.log(r / r0),
        "r2*r2": lambda: -6 * math.log(r / r0),
    }
    fn = table.get(key)
    return None if fn is None else fn()


VERDICTS = ("smooth-evidence", "divergence-evidence", "inconclusive")


@dataclass
class CLReport:
    """Evidence about the smooth extendability of ``G0`` at the origin.

    The verdict is evidence only; the probe cannot decide extendability.
    """

    profile: str
    R: float
    r0: float
    r_min: float
    samples: list
    slope: float
    intercept: float
    residual: float
    total_variation: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "R": self.R,
            "r0": self.r0,
            "r_min": self.r_min,
            "samples": [[float(r), float(g)] for r, g in self.samples],
            "fit": {"slope": self.slope, "intercept": self.intercept, "residual": self.residual},
            "total_variation": self.total_variation,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "G0"])
        for r, g in self.samples:
            w.writerow([repr(float(r)), repr(float(g))])
        return buf.getvalue()


def blowup_probe(
    profile,
    r0: float = 0.5,
    r_min: float = 1e-6,
    R: float | None = None,
    per_decade: int = 10,
) -> CLReport:
    """Sample ``G0`` on a log grid down to ``r_min`` and classify its behaviour.

    The lowest decade ``[r_min, 10 r_min]`` decides: a linear fit of ``G0``
    against ``ln r`` with ``|slope| >= 0.5`` and max residual at most 1% of
    the sampled range gives ``divergence-evidence``; a total variation of at
    most ``1e-3`` gives ``smooth-evidence``; anything else is ``inconclusive``.
    """
    f = RadialProfile(profile)
    if not (0 < r_min < r0 < 1):
        raise DomainError("blowup_probe needs 0 < r_min < r0 < 1")
    R = forced_R(f) if R is None else float(R)
    _check_sign(f, r_min, r0)
    decades = math.log10(r0 / r_min)
    count = max(2, int(math.ceil(decades * per_decade)) + 1)
    grid = np.geomspace(r0, r_min, count)
    g = _g0_integrand(f, R)
    values = [0.0]
    for a, b in zip(grid[:-1], grid[1:]):
        values.append(values[-1] - _quad(g, math.log(a), math.log(b)))
    values = np.array(values)

    window = grid <= 10.0 * r_min * (1 + 1e-12)
    if window.sum() < 3:
        window = np.zeros_like(window)
        window[-3:] = True
    x, y = np.log(grid[window]), values[window]
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.abs(y - (slope * x + intercept)).max())
    span = float(y.max() - y.min())
    tv = float(np.abs(np.diff(y)).sum())
    if abs(slope) >= 0.5 and residual <= 0.01 * span:
        verdict = "divergence-evidence"
    elif tv <= 1e-3:
        verdict = "smooth-evidence"
    else:
        verdict = "inconclusive"
    samples = [(float(r), float(v)) for r, v in zip(grid[::-1], values[::-1])]
    return CLReport(f.source, R, r0, r_min, samples, float(slope), float(intercept), residual, tv, verdict)


# -- rotational averaging and invariants ----------------------------------


def rotation(alpha: float) -> np.ndarray:
    """The block ``[[cos a, sin a], [-sin a, cos a]]`` of the rotation flow."""
    c, s = math.cos(alpha), math.sin(alpha)
    return np.array([[c, s], [-s, c]])


def _rotate(flat, alpha: float):
    Rm = rotation(alpha)
    flat = as_array(list(flat))
    out = list(Rm @ flat[:2]) + list(Rm @ flat[2:4])
    return as_array(out)


def rot_average(G, nodes: int = 256) -> Callable:
    """``Q(p) = (1/2pi) int_0^{2pi} G(phi_a(p)) da`` by the trapezoid rule.

    ``G`` is a :class:`ScalarFn`, a source string over ``y1..y4`` or any
    callable on flat B points.
    """
    if isinstance(G, (str, ex.Num, ex.Var, ex.Sym, ex.Neg, ex.BinOp, ex.Pow, ex.Call)):
        G = ScalarFn(G)
    alphas = 2 * math.pi * np.arange(nodes) / nodes

    def Q(flat):
        total = 0.0
        for a in alphas:
            total = total + G(_rotate(flat, float(a)))
        return total / nodes

    return Q


def example1_invariants(profile) -> tuple:
    """``(I1, I2)`` for the radial source field.

    ``I1 = f(r)(2 - y_1 y^1 - y_2 y^2) + f'(r) r`` equals the first integral
    of that field, which is how it is evaluated; ``I2 = y_1 y^2 - y_2 y^1``.
    """
    V = example_field("radial_source", profile)
    I1 = first_integral(V)
    I2 = ScalarFn("y3*y2 - y4*y1")
    return I1, I2


def example1_I1_formula(profile, flat) -> float:
    """``I1`` straight from its closed form, at a float point with ``r > 0``."""
    f = RadialProfile(profile)
    y = np.asarray(flat, dtype=float)
    r = math.hypot(y[0], y[1])
    f0, f1 = f.derivatives(r, 1)
    return f0 * (2 - y[2] * y[0] - y[3] * y[1]) + f1 * r


def fiber_jacobian_det(I1, I2, flat) -> float:
    """Determinant of ``(y_1, y_2) -> (I1, I2)`` at a B point."""
    P = taylor_point(np.asarray(flat, dtype=float), 1)
    g1, g2 = I1(P), I2(P)
    a = g1.gradient()[2:4] if isinstance(g1, TaylorValue) else np.zeros(2)
    b = g2.gradient()[2:4] if isinstance(g2, TaylorValue) else np.zeros(2)
    return float(a[0] * b[1] - a[1] * b[0])


def random_disc_points(
    count: int, rng: np.random.Generator, r_range=(0.05, 0.95), fiber: float = 2.0
) -> np.ndarray:
    """Flat B points with ``r`` in ``r_range`` and fiber coordinates in ``[-fiber, fiber]``."""
    r = rng.uniform(*r_range, count)
    th = rng.uniform(0, 2 * math.pi, count)
    fib = rng.uniform(-fiber, fiber, (count, 2))
    return np.column_stack([r * np.cos(th), r * np.sin(th), fib])


def example1_closed_form(profile, flat) -> np.ndarray:
    """Lifted radial source field from its closed form (``r > 0``)."""
    f = RadialProfile(profile)
    y1, y2, l1, l2 = np.asarray(flat, dtype=float)
    r = math.hypot(y1, y2)
    f0, f1, f2 = f.derivatives(r, 2)
    s = 3 - l1 * y1 - l2 * y2
    return np.array(
        [
            f0 * y1,
            f0 * y2,
            f1 / r * y1 * s + f2 * y1 - f0 * l1,
            f1 / r * y2 * s + f2 * y2 - f0 * l2,
        ]
    )


def example2_closed_form(profile, flat) -> np.ndarray:
    """Lifted rotational field from its closed form (``r > 0``)."""
    f = RadialProfile(profile)
    y1, y2, l1, l2 = np.asarray(flat, dtype=float)
    r = math.hypot(y1, y2)
    f0, f1 = f.derivatives(r, 1)
    w = l2 * y1 - l1 * y2
    return np.array([f0 * y2, -f0 * y1, f0 * l2 + f1 / r * y1 * w, -f0 * l1 + f1 / r * y2 * w])


def example2_check(profile, samples: int = 1000, seed: int = 0) -> float:
    """Max of ``|V~ G|`` for ``G = y_2 y^1 - y_1 y^2`` and of ``|div V|``.

    ``V`` is the rotational field, so the transport equation reduces to
    ``V~ G = R`` and ``G`` solves it with ``R = 0``.
    """
    V = example_field("rotational", profile)
    F = prolong("B", V)
    G = ScalarFn("y4*y1 - y3*y2")
    rng = np.random.default_rng(seed)
    worst = 0.0
    rhs = cl_rhs(V, 0.0)
    for p in random_disc_points(samples, rng):
        worst = max(worst, abs(apply_field(F, G, p)), abs(float(rhs(p[:2]))))
    return worst
