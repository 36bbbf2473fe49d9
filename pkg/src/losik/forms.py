"""
Numerical exterior calculus on bundle charts.

A :class:`KForm` is an evaluator. Its one required method,
:meth:`KForm.expand`, returns the coordinate coefficients of the form around
a point as a sparse alternating table ``{(i1 < ... < ik): coefficient}``.
At order 0 the coefficients are floats; at order ``K > 0`` they are Taylor
series in the chart coordinates, which is how exterior derivatives, Lie
derivatives and pullbacks differentiate without a symbolic layer.

The value of a form on vectors follows the determinant convention, so
``(dx ^ dy)(d/dx, d/dy) = 1``.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

from . import jets
from ._generic import const, inv, is_generic, taylor_point
from .errors import DimensionMismatch, SingularJacobian, SingularMatrix, ZeroDeterminant
from .taylor import TaylorValue, basis, compose_with, substitution_matrix

__all__ = [
    "ChartModel",
    "TangentVec",
    "KForm",
    "CoordinateForm",
    "wedge",
    "dform",
    "interior",
    "pullback",
    "pullback_map",
    "lie_derivative",
    "theta_form",
    "gamma1_form",
    "lambda1_form",
    "cl_form",
    "gvl_form",
    "TransitionMap",
    "ProjectionMap",
    "coordinate_one_form",
    "max_abs_difference",
]


class ChartModel:
    """Flat coordinate layout of a bundle chart over an ``n``-dimensional base."""

    def __init__(self, bundle: str, n: int):
        self.bundle = bundle
        self.n = n
        self.names = jets.coordinate_names(bundle, n)
        self.dim = len(self.names)
        if self.dim != jets.chart_dim(bundle, n):
            raise AssertionError("coordinate layout out of sync with chart_dim")
        self._index = {name: i for i, name in enumerate(self.names)}

    def __eq__(self, other):
        return isinstance(other, ChartModel) and (self.bundle, self.n) == (other.bundle, other.n)

    def __hash__(self):
        return hash((self.bundle, self.n))

    def __repr__(self):
        return f"ChartModel({self.bundle!r}, n={self.n})"

    def index(self, name: str) -> int:
        return self._index[name]

    # 1-based index helpers mirroring the coordinate names
    def base(self, i: int) -> int:
        return i - 1

    def frame(self, i: int, j: int) -> int:
        return self._index[f"y^{i}_{j}"]

    def sec(self, i: int, j: int, k: int) -> int:
        j, k = min(j, k), max(j, k)
        return self._index[f"y^{i}_{j}{k}"]

    def metric(self, i: int, j: int) -> int:
        i, j = min(i, j), max(i, j)
        return self._index[f"y^{i}{j}"]

    def det(self) -> int:
        return self._index["y"]

    def x(self) -> int:
        return self._index["x"]

    def lower(self, i: int) -> int:
        return self._index[f"y_{i}"]

    def point(self, flat):
        return jets.point_from_flat(self.bundle, flat, self.n)

    def flat(self, p) -> np.ndarray:
        if isinstance(p, jets._Point):
            if p.bundle != self.bundle or p.n != self.n:
                raise DimensionMismatch(f"point on {p.bundle}(n={p.n}) given to {self!r}")
            return np.asarray(const(p.flat()), dtype=float)
        flat = np.asarray(p, dtype=float)
        if flat.shape != (self.dim,):
            raise DimensionMismatch(f"{self!r} expects {self.dim} coordinates, got {flat.shape}")
        return flat

    def basis_vector(self, i: int) -> np.ndarray:
        e = np.zeros(self.dim)
        e[i] = 1.0
        return e


class TangentVec:
    """Tangent vector components in a chart's flat coordinates."""

    __slots__ = ("chart", "components")

    def __init__(self, chart: ChartModel, components):
        comps = np.asarray(components)
        if comps.shape != (chart.dim,):
            raise DimensionMismatch(f"{chart!r} vectors have {chart.dim} components")
        self.chart = chart
        self.components = comps

    def __repr__(self):
        return f"TangentVec({self.chart!r}, {self.components!r})"


# -- sparse alternating tables -----------------------------------------


def _is_zero(c) -> bool:
    if isinstance(c, TaylorValue):
        return not c.coeffs.any()
    return c == 0


def _accumulate(acc: dict, key: tuple, val) -> None:
    if key in acc:
        acc[key] = acc[key] + val
    else:
        acc[key] = val


def _merge_sign(I: tuple, J: tuple):
    """Sign and sorted union of ``dx^I ^ dx^J``; ``None`` when they overlap."""
    if set(I) & set(J):
        return None, None
    inversions = sum(1 for i in I for j in J if i > j)
    return (-1 if inversions % 2 else 1), tuple(sorted(I + J))


def wedge_tables(A: dict, B: dict) -> dict:
    out: dict = {}
    for I, a in A.items():
        for J, b in B.items():
            sign, key = _merge_sign(I, J)
            if key is None:
                continue
            _accumulate(out, key, a * b if sign > 0 else -(a * b))
    return out


def _drop_zeros(table: dict) -> dict:
    return {k: v for k, v in table.items() if not _is_zero(v)}


def evaluate_table(table: dict, vectors: np.ndarray) -> float:
    """``sum_I c_I det(vectors[I, :])`` for a (dim, k) matrix of vectors."""
    total = 0.0
    if vectors.shape[1] == 0:
        return float(table.get((), 0.0))
    for I, c in table.items():
        total += float(c) * float(np.linalg.det(vectors[list(I), :]))
    return total


def _to_order0(c):
    return c.value if isinstance(c, TaylorValue) else float(c)


class KForm:
    """Base class for differential forms on a chart."""

    def __init__(self, chart: ChartModel, degree: int):
        if degree < 0:
            raise ValueError("negative degree")
        self.chart = chart
        self.degree = degree

    def expand(self, p0: np.ndarray, order: int) -> dict:
        raise NotImplementedError

    def coefficients(self, p) -> dict:
        """Non-zero coefficients at ``p`` keyed by sorted index tuples."""
        table = self.expand(self.chart.flat(p), 0)
        return {k: _to_order0(v) for k, v in sorted(table.items()) if _to_order0(v) != 0.0}

    def __call__(self, p, *vectors) -> float:
        if len(vectors) != self.degree:
            raise DimensionMismatch(f"{self.degree}-form evaluated on {len(vectors)} vectors")
        flat = self.chart.flat(p)
        V = np.zeros((self.chart.dim, self.degree))
        for c, v in enumerate(vectors):
            v = v.components if isinstance(v, TangentVec) else np.asarray(v, dtype=float)
            if v.shape != (self.chart.dim,):
                raise DimensionMismatch("tangent vector has the wrong length")
            V[:, c] = v
        return self._evaluate(flat, V)

    def _evaluate(self, flat: np.ndarray, V: np.ndarray) -> float:
        return evaluate_table(self.expand(flat, 0), V)

    def coefficient(self, p, indices: Sequence[int]) -> float:
        """Value on the coordinate basis vectors ``e_{indices[0]}, ...`` (in that order)."""
        return self(p, *(self.chart.basis_vector(i) for i in indices))

    def __add__(self, other: "KForm") -> "KForm":
        return SumForm([(1.0, self), (1.0, other)])

    def __sub__(self, other: "KForm") -> "KForm":
        return SumForm([(1.0, self), (-1.0, other)])

    def __neg__(self) -> "KForm":
        return SumForm([(-1.0, self)])

    def __rmul__(self, scalar: float) -> "KForm":
        return SumForm([(float(scalar), self)])

    def __xor__(self, other: "KForm") -> "KForm":
        return wedge(self, other)


def _chart_point(p0, order: int):
    return np.asarray(p0, dtype=float) if order == 0 else taylor_point(p0, order)


class CoordinateForm(KForm):
    """A form given by a coefficient function ``fn(point) -> {I: c}``.

    ``fn`` receives the flat point (floats, or Taylor values when the caller
    needs derivatives) and must be written with generic arithmetic.
    """

    def __init__(self, chart: ChartModel, degree: int, fn: Callable[[np.ndarray], dict], name: str = ""):
        super().__init__(chart, degree)
        self.fn = fn
        self.name = name

    def expand(self, p0, order):
        return dict(self.fn(_chart_point(p0, order)))

    def __repr__(self):
        return f"CoordinateForm({self.name or '?'}, degree={self.degree}, {self.chart!r})"


def constant_form(chart: ChartModel, degree: int, table: dict, name: str = "") -> CoordinateForm:
    table = {tuple(k): float(v) for k, v in table.items()}
    return CoordinateForm(chart, degree, lambda P: table, name)


def coordinate_one_form(chart: ChartModel, index: int) -> CoordinateForm:
    """``dx^index``."""
    return constant_form(chart, 1, {(index,): 1.0}, f"d{chart.names[index]}")


class SumForm(KForm):
    def __init__(self, terms):
        terms = list(terms)
        charts = {f.chart for _, f in terms}
        degrees = {f.degree for _, f in terms}
        if len(charts) != 1 or len(degrees) != 1:
            raise DimensionMismatch("summands must share chart and degree")
        super().__init__(terms[0][1].chart, terms[0][1].degree)
        self.terms = terms

    def expand(self, p0, order):
        out: dict = {}
        for s, f in self.terms:
            for k, v in f.expand(p0, order).items():
                _accumulate(out, k, v if s == 1.0 else s * v)
        return out

    def _evaluate(self, flat, V):
        return sum(s * f._evaluate(flat, V) for s, f in self.terms)


class WedgeForm(KForm):
    def __init__(self, a: KForm, b: KForm):
        if a.chart != b.chart:
            raise DimensionMismatch("wedge of forms on different charts")
        super().__init__(a.chart, a.degree + b.degree)
        self.a, self.b = a, b

    def expand(self, p0, order):
        if self.degree > self.chart.dim:
            return {}
        return wedge_tables(self.a.expand(p0, order), self.b.expand(p0, order))


def wedge(a: KForm, b: KForm) -> KForm:
    """Exterior product; degrees beyond the chart dimension give the zero form."""
    return WedgeForm(a, b)


class ExteriorDerivative(KForm):
    def __init__(self, a: KForm):
        super().__init__(a.chart, a.degree + 1)
        self.a = a

    def expand(self, p0, order):
        out: dict = {}
        if self.degree > self.chart.dim:
            return out
        for I, c in self.a.expand(p0, order + 1).items():
            if not isinstance(c, TaylorValue):
                continue
            for b in range(self.chart.dim):
                if b in I:
                    continue
                dc = c.derivative(b)
                if order == 0:
                    dc = dc.value
                if _is_zero(dc):
                    continue
                before = sum(1 for i in I if i < b)
                key = tuple(sorted(I + (b,)))
                _accumulate(out, key, -dc if before % 2 else dc)
        return out


def dform(a: KForm) -> KForm:
    """Exterior derivative, using Taylor differentiation of the coefficients."""
    return ExteriorDerivative(a)


class InteriorProduct(KForm):
    """``iota_V a`` for a chart vector field ``V`` (callable on flat points)."""

    def __init__(self, field, a: KForm):
        if a.degree == 0:
            raise ValueError("interior product of a function is not defined here")
        super().__init__(a.chart, a.degree - 1)
        self.field = field
        self.a = a

    def expand(self, p0, order):
        Vv = self.field(_chart_point(p0, order))
        out: dict = {}
        for I, c in self.a.expand(p0, order).items():
            for pos, i in enumerate(I):
                v = Vv[i]
                if _is_zero(v):
                    continue
                key = I[:pos] + I[pos + 1 :]
                term = c * v
                _accumulate(out, key, -term if pos % 2 else term)
        return out


def interior(field, a: KForm) -> KForm:
    return InteriorProduct(field, a)


def lie_derivative(field, a: KForm) -> KForm:
    """Cartan's formula ``L_V a = d(iota_V a) + iota_V(d a)``.

    ``field`` is a vector field on ``a``'s chart (e.g. a prolonged field).
    """
    chart = getattr(field, "chart", None)
    if chart is not None and chart != a.chart:
        raise DimensionMismatch(f"field lives on {chart!r}, form on {a.chart!r}")
    if a.degree == 0:
        return InteriorProduct(field, dform(a))
    return SumForm([(1.0, dform(InteriorProduct(field, a))), (1.0, InteriorProduct(field, dform(a)))])


# -- maps between charts and pullbacks --------------------------------------


class TransitionMap:
    """The bundle map induced by a local diffeomorphism, on flat coordinates."""

    def __init__(self, bundle: str, h, n: int | None = None):
        n = h.n if n is None else n
        self.h = h
        self.source = self.target = ChartModel(bundle, n)

    def __call__(self, flat):
        p = jets.point_from_flat(self.source.bundle, flat, self.source.n)
        return jets.transition(self.source.bundle, self.h, p).flat()


class ProjectionMap:
    """``S2 -> target`` projection on flat coordinates."""

    def __init__(self, target: str, n: int):
        self.source = ChartModel("S2", n)
        self.target = ChartModel(target, n)

    def __call__(self, flat):
        p = jets.point_from_flat("S2", flat, self.source.n)
        return jets.project(self.target.bundle, p).flat()


def _jacobian_entries(Phi, dim: int, order: int):
    """d Phi_i / d x_b as Taylor values of ``order`` (floats at order 0)."""
    J = []
    for comp in Phi:
        row = []
        for b in range(dim):
            if isinstance(comp, TaylorValue):
                d = comp.derivative(b)
                row.append(d.value if order == 0 else d)
            else:
                row.append(0.0)
        J.append(row)
    return J


class PulledBackForm(KForm):
    """``phi^* a`` for a chart map ``phi`` with ``source``/``target`` charts."""

    def __init__(self, phi, a: KForm):
        if phi.target != a.chart:
            raise DimensionMismatch(f"map lands in {phi.target!r}, form lives on {a.chart!r}")
        super().__init__(phi.source, a.degree)
        self.phi = phi
        self.a = a

    def _pushforward(self, p0):
        Phi = self.phi(taylor_point(p0, 1))
        q0 = const(Phi)
        J = np.array(_jacobian_entries(Phi, self.chart.dim, 0), dtype=float)
        return q0, J

    def _evaluate(self, flat, V):
        q0, J = self._pushforward(flat)
        return self.a._evaluate(q0, J @ V)

    def expand(self, p0, order):
        dim = self.chart.dim
        Phi = self.phi(taylor_point(p0, order + 1))
        q0 = const(Phi)
        J = _jacobian_entries(Phi, dim, order)
        table = self.a.expand(q0, order)
        if order > 0 and any(isinstance(c, TaylorValue) for c in table.values()):
            tb = basis(dim, order)
            deltas = []
            for comp in Phi:
                if isinstance(comp, TaylorValue):
                    d = comp.truncate(order)
                    d.coeffs[0] = 0.0
                else:
                    d = TaylorValue.constant(0.0, dim, order)
                deltas.append(d)
            M = substitution_matrix(deltas, order)
            table = {
                k: (compose_with(c, M, tb) if isinstance(c, TaylorValue) else c) for k, c in table.items()
            }
        one_forms = [{(b,): J[i][b] for b in range(dim) if not _is_zero(J[i][b])} for i in range(len(Phi))]
        out: dict = {}
        for I, c in table.items():
            acc = {(): c}
            for i in I:
                acc = wedge_tables(acc, one_forms[i])
                if not acc:
                    break
            for k, v in acc.items():
                _accumulate(out, k, v)
        return out


def pullback_map(phi, a: KForm) -> KForm:
    return PulledBackForm(phi, a)


def pullback(h, bundle: str, a: KForm) -> KForm:
    """Pull ``a`` back along the bundle map induced by the diffeomorphism ``h``."""
    if a.chart.bundle != bundle:
        raise DimensionMismatch(f"form lives on {a.chart.bundle}, not {bundle}")
    return PulledBackForm(TransitionMap(bundle, h, a.chart.n), a)


# -- the named forms ------------------------------------------------------


def _n_range(n):
    return range(1, n + 1)


def theta_form(i: int, j: int, n: int) -> KForm:
    """``theta^i_j = -v^i_k dy^k_j + y^i_jk dy^k`` on S2 (indices 1-based)."""
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError("theta indices out of range")
    chart = ChartModel("S2", n)

    def fn(P):
        p = chart.point(P)
        v = inv(p.yj, SingularJacobian)
        out = {}
        for k in _n_range(n):
            out[(chart.frame(k, j),)] = -v[i - 1, k - 1]
            _accumulate(out, (chart.base(k),), p.yjk[i - 1, j - 1, k - 1])
        return out

    return CoordinateForm(chart, 1, fn, f"theta^{i}_{j}")


def gamma1_form(n: int) -> KForm:
    """``Gamma_1 = theta^i_i`` on S2."""
    chart = ChartModel("S2", n)

    def fn(P):
        p = chart.point(P)
        v = inv(p.yj, SingularJacobian)
        out: dict = {}
        for i in _n_range(n):
            for k in _n_range(n):
                _accumulate(out, (chart.frame(k, i),), -v[i - 1, k - 1])
                _accumulate(out, (chart.base(k),), p.yjk[i - 1, i - 1, k - 1])
        return out

    return CoordinateForm(chart, 1, fn, "Gamma_1")


def lambda1_form(n: int) -> KForm:
    """``Lambda_1 = -1/2 y_ij dy^ij + y^j_jk dy^k`` on the O-quotient chart."""
    chart = ChartModel("O", n)

    def fn(P):
        p = chart.point(P)
        ylow = inv(p.yij, SingularMatrix)
        out: dict = {}
        for i in _n_range(n):
            for j in _n_range(n):
                _accumulate(out, (chart.metric(i, j),), -0.5 * ylow[i - 1, j - 1])
        for k in _n_range(n):
            for j in _n_range(n):
                _accumulate(out, (chart.base(k),), p.yjk[j - 1, j - 1, k - 1])
        return out

    return CoordinateForm(chart, 1, fn, "Lambda_1")


def _trace_two_form(chart: ChartModel) -> dict:
    """``dy^k_kl ^ dy^l`` as a constant table."""
    n = chart.n
    out: dict = {}
    for k in _n_range(n):
        for l in _n_range(n):
            sign, key = _merge_sign((chart.sec(k, k, l),), (chart.base(l),))
            _accumulate(out, key, float(sign))
    return _drop_zeros(out)


def _symplectic_table(chart: ChartModel) -> dict:
    """``dy_i ^ dy^i`` on A or B."""
    out: dict = {}
    for i in _n_range(chart.n):
        sign, key = _merge_sign((chart.lower(i),), (chart.base(i),))
        _accumulate(out, key, float(sign))
    return out


def _power(table: dict, n: int) -> dict:
    out = {(): 1.0}
    for _ in range(n):
        out = _drop_zeros(wedge_tables(out, table))
    return out


def cl_form(variant: str, n: int) -> KForm:
    """First Chern-Losik representative: ``GLchart`` or ``Bchart``."""
    if variant == "GLchart":
        chart = ChartModel("GL", n)
        return constant_form(chart, 2, _trace_two_form(chart), "cl_GL")
    if variant == "Bchart":
        chart = ChartModel("B", n)
        return constant_form(chart, 2, _symplectic_table(chart), "cl_B")
    raise ValueError(f"unknown CL variant {variant!r}")


def gvl_form(variant: str, n: int) -> KForm:
    """Godbillon-Vey-Losik (2n+1)-form on the S2, O, SL or A chart."""
    if variant == "A":
        chart = ChartModel("A", n)
        table = wedge_tables({(chart.x(),): -1.0}, _power(_symplectic_table(chart), n))
        return constant_form(chart, 2 * n + 1, _drop_zeros(table), "gvl_A")
    if variant not in ("S2", "O", "SL"):
        raise ValueError(f"unknown GVL variant {variant!r}")
    chart = ChartModel(variant, n)
    tail = _power(_trace_two_form(chart), n)

    if variant == "S2":

        def head(p):
            v = inv(p.yj, SingularJacobian)
            return {(chart.frame(i, j),): -v[j - 1, i - 1] for i in _n_range(n) for j in _n_range(n)}

    elif variant == "O":

        def head(p):
            ylow = inv(p.yij, SingularMatrix)
            out: dict = {}
            for i in _n_range(n):
                for j in _n_range(n):
                    _accumulate(out, (chart.metric(i, j),), -0.5 * ylow[i - 1, j - 1])
            return out

    else:

        def head(p):
            if not isinstance(p.ydet, TaylorValue) and p.ydet == 0:
                raise ZeroDeterminant("SL coordinate y vanishes")
            return {(chart.det(),): -1.0 / p.ydet}

    def fn(P):
        return wedge_tables(head(chart.point(P)), tail)

    return CoordinateForm(chart, 2 * n + 1, fn, f"gvl_{variant}")


def max_abs_difference(t1: dict, t2: dict) -> float:
    keys = set(t1) | set(t2)
    return max((abs(_to_order0(t1.get(k, 0.0)) - _to_order0(t2.get(k, 0.0))) for k in keys), default=0.0)


def random_direction_tuples(dim: int, k: int, count: int, rng: np.random.Generator):
    """``count`` random ordered k-tuples of distinct coordinate directions."""
    if k > dim:
        return []
    return [tuple(int(i) for i in rng.choice(dim, size=k, replace=False)) for _ in range(count)]


def all_index_sets(dim: int, k: int):
    return itertools.combinations(range(dim), k)
