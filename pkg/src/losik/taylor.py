"""
Truncated multivariate Taylor arithmetic.

A :class:`TaylorValue` stores the coefficients of a polynomial in ``m``
variables truncated at total degree ``K``. Coefficients follow the Taylor
convention, i.e. the coefficient of ``x**alpha`` is ``d^alpha f / alpha!`` at
the expansion point, which is always the origin of the local variables.
Storage is dense and ordered by graded-lex rank, so truncating to a lower
order is a prefix slice.

The module level functions :func:`exp`, :func:`log`, :func:`sin`, ... accept
plain floats as well as Taylor values, which lets the geometric code further
up run unchanged on numbers and on jets.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, DivisionBySingular, DomainError

DEFAULT_ORDER = 3

__all__ = [
    "DEFAULT_ORDER",
    "Basis",
    "TaylorValue",
    "TaylorMap",
    "basis",
    "t_arith",
    "t_elem",
    "t_compose",
    "exp",
    "log",
    "sin",
    "cos",
    "sqrt",
    "power",
    "constant_term",
    "is_taylor",
]


class Basis:
    """Monomial bookkeeping for ``m`` variables up to degree ``K``."""

    def __init__(self, m: int, K: int):
        if m < 0 or K < 0:
            raise ValueError("number of variables and order must be non-negative")
        self.m = m
        self.K = K
        exps = []
        self.offsets = [0]
        for d in range(K + 1):
            for combo in itertools.combinations_with_replacement(range(m), d):
                e = [0] * m
                for v in combo:
                    e[v] += 1
                exps.append(tuple(e))
            self.offsets.append(len(exps))
        self.exponents = exps
        self.size = len(exps)
        self.rank = {e: i for i, e in enumerate(exps)}
        self.degrees = np.array([sum(e) for e in exps], dtype=int)
        self.factorials = np.array(
            [math.prod(math.factorial(a) for a in e) for e in exps], dtype=float
        )
        self._mul = None
        self._deriv = {}
        self._parents = None

    def count(self, degree: int) -> int:
        """Number of monomials of total degree <= ``degree``."""
        return self.offsets[min(degree, self.K) + 1]

    @property
    def mul_table(self):
        if self._mul is None:
            ia, ib, ic = [], [], []
            for i, a in enumerate(self.exponents):
                room = self.K - self.degrees[i]
                for j in range(self.count(room)):
                    b = self.exponents[j]
                    ia.append(i)
                    ib.append(j)
                    ic.append(self.rank[tuple(x + y for x, y in zip(a, b))])
            self._mul = (np.array(ia), np.array(ib), np.array(ic))
        return self._mul

    def deriv_table(self, var: int):
        """Index map for d/dx_var; the result lives in the order K-1 basis."""
        if var not in self._deriv:
            lower = basis(self.m, max(self.K - 1, 0))
            src, dst, fac = [], [], []
            for i, e in enumerate(self.exponents):
                if e[var] == 0:
                    continue
                f = list(e)
                f[var] -= 1
                src.append(i)
                dst.append(lower.rank[tuple(f)])
                fac.append(float(e[var]))
            self._deriv[var] = (np.array(src, dtype=int), np.array(dst, dtype=int), np.array(fac))
        return self._deriv[var]

    @property
    def parents(self):
        """For each monomial of degree >= 1: (rank of monomial / x_j, j)."""
        if self._parents is None:
            par = [(-1, -1)]
            for e in self.exponents[1:]:
                j = next(v for v, a in enumerate(e) if a)
                f = list(e)
                f[j] -= 1
                par.append((self.rank[tuple(f)], j))
            self._parents = par
        return self._parents


@lru_cache(maxsize=None)
def basis(m: int, K: int) -> Basis:
    return Basis(m, K)


def _is_number(x) -> bool:
    return isinstance(x, (Real, np.floating, np.integer)) and not isinstance(x, bool)



def _over_arrays(method):
    """Apply a binary TaylorValue method elementwise when ``other`` is an ndarray."""

    def wrapped(self, other):
        if isinstance(other, np.ndarray):
            out = np.empty(other.shape, dtype=object)
            for idx, v in np.ndenumerate(other):
                out[idx] = method(self, v.item() if isinstance(v, np.generic) else v)
            return out
        return method(self, other)

    wrapped.__name__ = method.__name__
    wrapped.__doc__ = method.__doc__
    return wrapped

class TaylorValue:
    """A truncated Taylor series in ``num_vars`` variables of order ``order``."""

    __slots__ = ("coeffs", "basis")
    __array_ufunc__ = None  # let numpy scalars defer to our reflected operators

    def __init__(self, coeffs, num_vars: int, order: int = DEFAULT_ORDER):
        b = basis(num_vars, order)
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (b.size,):
            raise DimensionMismatch(
                f"expected {b.size} coefficients for m={num_vars}, K={order}, got {c.shape}"
            )
        self.coeffs = c
        self.basis = b

    @classmethod
    def _make(cls, coeffs: np.ndarray, b: Basis) -> "TaylorValue":
        obj = cls.__new__(cls)
        obj.coeffs = coeffs
        obj.basis = b
        return obj

    @classmethod
    def constant(cls, value: float, num_vars: int, order: int = DEFAULT_ORDER) -> "TaylorValue":
        b = basis(num_vars, order)
        c = np.zeros(b.size)
        c[0] = value
        return cls._make(c, b)

    @classmethod
    def variable(
        cls, index: int, num_vars: int, order: int = DEFAULT_ORDER, value: float = 0.0
    ) -> "TaylorValue":
        """The coordinate function ``value + x_index``."""
        b = basis(num_vars, order)
        c = np.zeros(b.size)
        c[0] = value
        if order >= 1:
            c[1 + index] = 1.0
        return cls._make(c, b)

    @classmethod
    def from_monomials(
        cls, terms: dict, num_vars: int, order: int = DEFAULT_ORDER
    ) -> "TaylorValue":
        """Build from ``{exponent tuple: coefficient}``; higher degrees are dropped."""
        b = basis(num_vars, order)
        c = np.zeros(b.size)
        for e, v in terms.items():
            e = tuple(e)
            if len(e) != num_vars:
                raise DimensionMismatch("exponent length differs from num_vars")
            if sum(e) <= order:
                c[b.rank[e]] += v
        return cls._make(c, b)

    # -- introspection ---------------------------------------------------

    @property
    def num_vars(self) -> int:
        return self.basis.m

    @property
    def order(self) -> int:
        return self.basis.K

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def coefficient(self, exponents: Sequence[int]) -> float:
        e = tuple(exponents)
        if sum(e) > self.order:
            return 0.0
        return float(self.coeffs[self.basis.rank[e]])

    def partial(self, exponents: Sequence[int]) -> float:
        """The partial derivative ``d^alpha f`` at the expansion point."""
        e = tuple(exponents)
        return self.coefficient(e) * math.prod(math.factorial(a) for a in e)

    def gradient(self) -> np.ndarray:
        if self.order < 1:
            raise DomainError("gradient needs order >= 1")
        return self.coeffs[1 : 1 + self.num_vars].copy()

    def hessian(self) -> np.ndarray:
        if self.order < 2:
            raise DomainError("hessian needs order >= 2")
        m = self.num_vars
        H = np.empty((m, m))
        b = self.basis
        for i in range(m):
            for j in range(i, m):
                e = [0] * m
                e[i] += 1
                e[j] += 1
                c = self.coeffs[b.rank[tuple(e)]]
                H[i, j] = H[j, i] = c * (2.0 if i == j else 1.0)
        return H

    def truncate(self, order: int) -> "TaylorValue":
        if order > self.order:
            raise DomainError("cannot raise the order of a truncated series")
        b = basis(self.num_vars, order)
        return TaylorValue._make(self.coeffs[: b.size].copy(), b)

    def derivative(self, var: int) -> "TaylorValue":
        """d/dx_var; the result has order ``order - 1`` (order 0 stays 0)."""
        b = self.basis
        lower = basis(b.m, max(b.K - 1, 0))
        out = np.zeros(lower.size)
        if b.K > 0:
            src, dst, fac = b.deriv_table(var)
            out[dst] = self.coeffs[src] * fac
        return TaylorValue._make(out, lower)

    def allclose(self, other: "TaylorValue", atol: float = 1e-12, rtol: float = 0.0) -> bool:
        _check_same(self, other)
        return bool(np.allclose(self.coeffs, other.coeffs, atol=atol, rtol=rtol))

    def __repr__(self) -> str:
        terms = []
        for e, c in zip(self.basis.exponents, self.coeffs):
            if c == 0.0:
                continue
            mono = "*".join(
                f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(e) if a
            )
            terms.append(f"{c:.6g}" + (f"*{mono}" if mono else ""))
        return f"TaylorValue({' + '.join(terms) or '0'}; m={self.num_vars}, K={self.order})"

    # -- arithmetic ------------------------------------------------------
    # numpy defers to these methods (__array_ufunc__ = None), so an ndarray
    # operand arrives here and is handled elementwise.

    def _coerce(self, other):
        if isinstance(other, TaylorValue):
            if other.basis is not self.basis:
                _check_same(self, other)
            return other
        if _is_number(other):
            return None
        return NotImplemented

    def __neg__(self):
        return TaylorValue._make(-self.coeffs, self.basis)

    def __pos__(self):
        return self

    @_over_arrays
    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o is None:
            c = self.coeffs.copy()
            c[0] += other
            return TaylorValue._make(c, self.basis)
        return TaylorValue._make(self.coeffs + o.coeffs, self.basis)

    __radd__ = __add__

    @_over_arrays
    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o is None:
            c = self.coeffs.copy()
            c[0] -= other
            return TaylorValue._make(c, self.basis)
        return TaylorValue._make(self.coeffs - o.coeffs, self.basis)

    @_over_arrays
    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        c = -self.coeffs
        c[0] += other
        return TaylorValue._make(c, self.basis)

    @_over_arrays
    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o is None:
            return TaylorValue._make(self.coeffs * other, self.basis)
        b = self.basis
        if b.size == 1:
            return TaylorValue._make(self.coeffs * o.coeffs, b)
        ia, ib, ic = b.mul_table
        c = np.bincount(ic, weights=self.coeffs[ia] * o.coeffs[ib], minlength=b.size)
        return TaylorValue._make(c, b)

    __rmul__ = __mul__

    @_over_arrays
    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o is None:
            if other == 0:
                raise DivisionBySingular("division by zero")
            return TaylorValue._make(self.coeffs / other, self.basis)
        return self * o.reciprocal()

    @_over_arrays
    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and not isinstance(p, bool):
            return self.pow_int(int(p))
        if _is_number(p):
            return self.pow_real(float(p))
        return NotImplemented

    def __abs__(self):
        a0 = self.coeffs[0]
        if a0 == 0.0:
            raise DomainError("abs is not smooth at 0")
        return self if a0 > 0 else -self

    # -- univariate functions ---------------------------------------------

    def _apply_series(self, c: Sequence[float]) -> "TaylorValue":
        """Evaluate sum_k c[k] * (self - self0)^k by Horner's rule."""
        b = self.basis
        h = TaylorValue._make(self.coeffs.copy(), b)
        h.coeffs[0] = 0.0
        out = TaylorValue.constant(c[b.K], b.m, b.K)
        for k in range(b.K - 1, -1, -1):
            out = out * h
            out.coeffs[0] += c[k]
        return out

    def reciprocal(self) -> "TaylorValue":
        a0 = float(self.coeffs[0])
        if a0 == 0.0:
            raise DivisionBySingular("constant term of divisor is 0")
        K = self.order
        return self._apply_series([(-1.0) ** k / a0 ** (k + 1) for k in range(K + 1)])

    def exp(self) -> "TaylorValue":
        e = math.exp(self.coeffs[0])
        return self._apply_series([e / math.factorial(k) for k in range(self.order + 1)])

    def log(self) -> "TaylorValue":
        a0 = float(self.coeffs[0])
        if a0 <= 0.0:
            raise DomainError(f"ln of non-positive value {a0}")
        c = [math.log(a0)] + [
            (-1.0) ** (k + 1) / (k * a0**k) for k in range(1, self.order + 1)
        ]
        return self._apply_series(c)

    def sin(self) -> "TaylorValue":
        s, co = math.sin(self.coeffs[0]), math.cos(self.coeffs[0])
        cyc = (s, co, -s, -co)
        return self._apply_series([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def cos(self) -> "TaylorValue":
        s, co = math.sin(self.coeffs[0]), math.cos(self.coeffs[0])
        cyc = (co, -s, -co, s)
        return self._apply_series([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def pow_real(self, p: float) -> "TaylorValue":
        a0 = float(self.coeffs[0])
        if a0 <= 0.0:
            raise DomainError(f"real power of non-positive value {a0}")
        c = []
        binom = 1.0
        for k in range(self.order + 1):
            c.append(a0**p * binom / a0**k)
            binom *= (p - k) / (k + 1)
        return self._apply_series(c)

    def sqrt(self) -> "TaylorValue":
        return self.pow_real(0.5)

    def pow_int(self, p: int) -> "TaylorValue":
        if p < 0:
            return self.pow_int(-p).reciprocal()
        result = TaylorValue.constant(1.0, self.num_vars, self.order)
        base = self
        while p:
            if p & 1:
                result = result * base
            p >>= 1
            if p:
                base = base * base
        return result


def _check_same(a: TaylorValue, b: TaylorValue) -> None:
    if a.num_vars != b.num_vars or a.order != b.order:
        raise DimensionMismatch(
            f"Taylor values differ: (m={a.num_vars}, K={a.order}) vs (m={b.num_vars}, K={b.order})"
        )


class TaylorMap:
    """An ordered tuple of Taylor values sharing ``num_vars`` and ``order``."""

    __slots__ = ("components",)

    def __init__(self, components: Iterable[TaylorValue]):
        comps = tuple(components)
        if comps:
            first = comps[0]
            for c in comps[1:]:
                _check_same(first, c)
        self.components = comps

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    @property
    def num_vars(self) -> int:
        return self.components[0].num_vars

    @property
    def order(self) -> int:
        return self.components[0].order

    def constants(self) -> np.ndarray:
        return np.array([c.coeffs[0] for c in self.components])

    def jacobian(self) -> np.ndarray:
        return np.array([c.gradient() for c in self.components])

    @classmethod
    def identity(cls, num_vars: int, order: int = DEFAULT_ORDER, center=None) -> "TaylorMap":
        center = np.zeros(num_vars) if center is None else center
        return cls(TaylorValue.variable(i, num_vars, order, float(center[i])) for i in range(num_vars))


def substitution_matrix(deltas: Sequence[TaylorValue], order: int) -> np.ndarray:
    """Rows are the coefficient arrays of ``prod_j deltas[j]**alpha_j``.

    ``alpha`` runs over the monomials of ``len(deltas)`` variables up to
    ``order``; the deltas must have vanishing constant terms. Composing any
    outer series with the deltas is then a single matrix product.
    """
    m_out = len(deltas)
    inner_b = deltas[0].basis
    ob = basis(m_out, order)
    M = np.zeros((ob.size, inner_b.size))
    M[0, 0] = 1.0
    vals = [TaylorValue.constant(1.0, inner_b.m, inner_b.K)]
    for r in range(1, ob.size):
        parent, j = ob.parents[r]
        v = vals[parent] * deltas[j]
        vals.append(v)
        M[r] = v.coeffs
    return M


def compose_with(outer: TaylorValue, matrix: np.ndarray, inner_basis: Basis) -> TaylorValue:
    n_rows = matrix.shape[0]
    return TaylorValue._make(outer.coeffs[:n_rows] @ matrix, inner_basis)


def t_compose(outer: TaylorMap, inner: TaylorMap) -> TaylorMap:
    """Taylor coefficients of ``outer o inner``.

    ``outer`` is understood as expanded around the constant terms of
    ``inner``. The result has the order ``min(outer.order, inner.order)``.
    """
    if len(inner) != outer.num_vars:
        raise DimensionMismatch(
            f"outer takes {outer.num_vars} variables, inner has {len(inner)} components"
        )
    K = min(outer.order, inner.order)
    inner_t = [c.truncate(K) if c.order != K else c for c in inner]
    deltas = []
    for c in inner_t:
        d = TaylorValue._make(c.coeffs.copy(), c.basis)
        d.coeffs[0] = 0.0
        deltas.append(d)
    M = substitution_matrix(deltas, K)
    b = inner_t[0].basis
    return TaylorMap(compose_with(o, M, b) for o in outer)


_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


def t_arith(op: str, a: TaylorValue, b: TaylorValue) -> TaylorValue:
    if op not in _OPS:
        raise ValueError(f"unknown operation {op!r}")
    if isinstance(a, TaylorValue) and isinstance(b, TaylorValue):
        _check_same(a, b)
    return _OPS[op](a, b)


def t_elem(fn: str, a: TaylorValue, p: float | None = None) -> TaylorValue:
    if fn == "exp":
        return a.exp()
    if fn == "ln":
        return a.log()
    if fn == "sin":
        return a.sin()
    if fn == "cos":
        return a.cos()
    if fn == "sqrt":
        return a.sqrt()
    if fn == "pow_int":
        if p is None or int(p) != p:
            raise ValueError("pow_int needs an integer exponent")
        return a.pow_int(int(p))
    if fn == "pow_real":
        if p is None:
            raise ValueError("pow_real needs an exponent")
        return a.pow_real(float(p))
    raise ValueError(f"unknown function {fn!r}")


# -- generic scalar functions (floats or Taylor values) -------------------


def is_taylor(x) -> bool:
    return isinstance(x, TaylorValue)


def constant_term(x) -> float:
    return x.value if isinstance(x, TaylorValue) else float(x)


def exp(x):
    return x.exp() if isinstance(x, TaylorValue) else math.exp(x)


def log(x):
    if isinstance(x, TaylorValue):
        return x.log()
    if x <= 0:
        raise DomainError(f"ln of non-positive value {x}")
    return math.log(x)


def sin(x):
    return x.sin() if isinstance(x, TaylorValue) else math.sin(x)


def cos(x):
    return x.cos() if isinstance(x, TaylorValue) else math.cos(x)


def sqrt(x):
    if isinstance(x, TaylorValue):
        return x.sqrt()
    if x < 0:
        raise DomainError(f"sqrt of negative value {x}")
    return math.sqrt(x)


def power(x, p: float):
    """Real power with a positive base."""
    if isinstance(x, TaylorValue):
        return x.pow_real(p)
    if x <= 0:
        raise DomainError(f"real power of non-positive value {x}")
    return float(x) ** p
