"""Helpers that run on float arrays and on object arrays of Taylor values alike."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, SingularMatrix
from .taylor import TaylorValue, basis, compose_with, substitution_matrix


def is_generic(arr) -> bool:
    return isinstance(arr, np.ndarray) and arr.dtype == object


def as_array(values) -> np.ndarray:
    """float array when possible, object array when any entry is a Taylor value."""
    arr = np.asarray(values, dtype=object)
    if any(isinstance(v, TaylorValue) for v in arr.flat):
        return arr
    return arr.astype(float)


def const(arr) -> np.ndarray:
    """Constant terms of a (possibly generic) array."""
    arr = np.asarray(arr)
    if arr.dtype != object:
        return arr.astype(float)
    out = np.empty(arr.shape)
    for idx, v in np.ndenumerate(arr):
        out[idx] = v.value if isinstance(v, TaylorValue) else float(v)
    return out


def taylor_basis_of(arr):
    """The shared Taylor basis of an object array, or None for plain numbers."""
    for v in np.asarray(arr, dtype=object).flat:
        if isinstance(v, TaylorValue):
            return v.basis
    return None


def det(M):
    M = np.asarray(M)
    if M.dtype != object:
        return float(np.linalg.det(M))
    n = M.shape[0]
    if n == 1:
        return M[0, 0]
    if n == 2:
        return M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if n == 3:
        return (
            M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
            - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
            + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0])
        )
    A = M.copy()
    sign = 1.0
    result = 1.0
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(const(A[r, c])))
        if const(A[p, c]) == 0.0:
            return 0.0 * A[0, 0]
        if p != c:
            A[[c, p]] = A[[p, c]]
            sign = -sign
        result = result * A[c, c]
        inv_piv = 1.0 / A[c, c]
        for r in range(c + 1, n):
            f = A[r, c] * inv_piv
            A[r, c:] = A[r, c:] - f * A[c, c:]
    return sign * result


def inv(M, error=SingularMatrix):
    """Matrix inverse; raises ``error`` for a singular (constant part) matrix."""
    M = np.asarray(M)
    n = M.shape[0]
    if M.shape != (n, n):
        raise DimensionMismatch("inverse of a non-square matrix")
    if M.dtype != object:
        if not np.all(np.isfinite(M)):
            raise error("non-finite matrix")
        d = np.linalg.det(M)
        scale = np.prod(np.linalg.norm(M, axis=1)) if n else 1.0
        if d == 0.0 or abs(d) <= 1e-14 * scale:
            raise error(f"matrix is singular (det={d:.3e})")
        return np.linalg.inv(M)
    if abs(np.linalg.det(const(M))) == 0.0:
        raise error("matrix is singular")
    A = M.copy()
    I = np.empty((n, n), dtype=object)
    I[...] = 0.0
    for i in range(n):
        I[i, i] = 1.0
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(const(A[r, c])))
        if p != c:
            A[[c, p]] = A[[p, c]]
            I[[c, p]] = I[[p, c]]
        inv_piv = 1.0 / A[c, c]
        A[c] = A[c] * inv_piv
        I[c] = I[c] * inv_piv
        for r in range(n):
            if r != c:
                f = A[r, c]
                A[r] = A[r] - f * A[c]
                I[r] = I[r] - f * I[c]
    return I


def symmetrize(T):
    """Symmetrize an n x n x n array in its last two slots."""
    return 0.5 * (T + np.swapaxes(T, 1, 2))


def field_jet(field, y, nderiv: int = 2):
    """Value and first/second derivatives of ``field`` at ``y``.

    ``y`` may hold Taylor values (a point depending on further variables);
    the derivatives are then Taylor series in those variables, obtained by
    expanding the field at the constant part of ``y`` to a higher order and
    substituting the displacement.
    """
    y = np.asarray(y, dtype=object) if is_generic(np.asarray(y)) else np.asarray(y, dtype=float)
    n = field.n
    if y.shape != (n,):
        raise DimensionMismatch(f"field has dimension {n}, point has shape {y.shape}")
    tb = taylor_basis_of(y) if y.dtype == object else None
    if tb is None:
        tv = field.taylor(const(y), nderiv)
        val = np.array([t.value for t in tv])
        out = [val]
        if nderiv >= 1:
            out.append(np.array([t.gradient() for t in tv]))
        if nderiv >= 2:
            out.append(np.array([t.hessian() for t in tv]))
        return tuple(out)
    K = tb.K
    y0 = const(y)
    deltas = []
    for v in y:
        if isinstance(v, TaylorValue):
            d = TaylorValue._make(v.coeffs.copy(), v.basis)
            d.coeffs[0] = 0.0
        else:
            d = TaylorValue.constant(0.0, tb.m, K)
        deltas.append(d)
    M = substitution_matrix(deltas, K)
    tv = field.taylor(y0, K + nderiv)
    val = np.empty(n, dtype=object)
    D1 = np.empty((n, n), dtype=object)
    D2 = np.empty((n, n, n), dtype=object)
    for i, t in enumerate(tv):
        val[i] = compose_with(t, M, tb)
        if nderiv >= 1:
            for j in range(n):
                tj = t.derivative(j)
                D1[i, j] = compose_with(tj, M, tb)
                if nderiv >= 2:
                    for k in range(j, n):
                        D2[i, j, k] = D2[i, k, j] = compose_with(tj.derivative(k), M, tb)
    out = [val]
    if nderiv >= 1:
        out.append(D1)
    if nderiv >= 2:
        out.append(D2)
    return tuple(out)


def taylor_point(p0, order: int) -> np.ndarray:
    """``p0 + s`` as an object array of Taylor values in ``len(p0)`` variables."""
    p0 = np.asarray(p0, dtype=float)
    m = len(p0)
    basis(m, order)
    out = np.empty(m, dtype=object)
    for i in range(m):
        out[i] = TaylorValue.variable(i, m, order, float(p0[i]))
    return out
