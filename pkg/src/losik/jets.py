"""
Second-order jets, frame-bundle coordinates and their transition maps.

Bundles are identified by short tags:

==== ===================================== ===============================
tag  coordinates                           dimension
==== ===================================== ===============================
M    y^i                                   n
S2   y^i, y^i_j, y^i_jk (j <= k)           n + n^2 + n^2(n+1)/2
GL   y^i, y^i_jk                           n + n^2(n+1)/2
O    y^i, y^ij (i <= j), y^i_jk            n + n(n+1)/2 + n^2(n+1)/2
SL   y^i, y (= det y^i_j), y^i_jk          n + 1 + n^2(n+1)/2
A    y^i, x (= ln|det y^i_j|), y_i         2n + 1
B    y^i, y_i                              2n
==== ===================================== ===============================

Here ``y_i = y^j_{ji}``. Point classes hold numpy arrays which may be of
object dtype (entries are Taylor values); every formula below is written
so that it runs on both.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import ClassVar

import numpy as np

from . import taylor as tm
from ._generic import as_array, const, det, field_jet, inv, is_generic, symmetrize
from .errors import DimensionMismatch, SingularJacobian, SingularMatrix

BUNDLES = ("M", "S2", "GL", "O", "SL", "A", "B")

__all__ = [
    "BUNDLES",
    "Jet2",
    "MPoint",
    "S2Point",
    "GLPoint",
    "OPoint",
    "SLPoint",
    "APoint",
    "BPoint",
    "POINT_TYPES",
    "chart_dim",
    "coordinate_names",
    "jet_of",
    "jet_compose",
    "jet_invert",
    "jet_identity",
    "s2_from_jet",
    "jet_from_s2",
    "gl_action",
    "project",
    "sl_to_a",
    "transition",
    "point_from_flat",
    "point_from_json",
]


def _pairs(n: int):
    return [(j, k) for j in range(n) for k in range(j, n)]


@lru_cache(maxsize=None)
def _sym_index(n: int):
    """Maps (i, j, k) and (i, k, j) to the flat offset of y^i_jk inside its block."""
    idx = {}
    pairs = _pairs(n)
    for i in range(n):
        for p, (j, k) in enumerate(pairs):
            idx[i, j, k] = idx[i, k, j] = i * len(pairs) + p
    return idx


def chart_dim(bundle: str, n: int) -> int:
    s = n * n * (n + 1) // 2
    return {
        "M": n,
        "S2": n + n * n + s,
        "GL": n + s,
        "O": n + n * (n + 1) // 2 + s,
        "SL": n + 1 + s,
        "A": 2 * n + 1,
        "B": 2 * n,
    }[_check_bundle(bundle)]


def _check_bundle(bundle: str) -> str:
    if bundle not in BUNDLES:
        raise ValueError(f"unknown bundle {bundle!r}; expected one of {BUNDLES}")
    return bundle


@lru_cache(maxsize=None)
def coordinate_names(bundle: str, n: int) -> tuple:
    """Flat coordinate names, e.g. ``('y^1', 'x', 'y_1')`` for A with n = 1."""
    base = [f"y^{i + 1}" for i in range(n)]
    sec = [f"y^{i + 1}_{j + 1}{k + 1}" for i in range(n) for j, k in _pairs(n)]
    if bundle == "M":
        return tuple(base)
    if bundle == "S2":
        return tuple(base + [f"y^{i + 1}_{j + 1}" for i in range(n) for j in range(n)] + sec)
    if bundle == "GL":
        return tuple(base + sec)
    if bundle == "O":
        return tuple(base + [f"y^{i + 1}{j + 1}" for i, j in _pairs(n)] + sec)
    if bundle == "SL":
        return tuple(base + ["y"] + sec)
    if bundle == "A":
        return tuple(base + ["x"] + [f"y_{i + 1}" for i in range(n)])
    if bundle == "B":
        return tuple(base + [f"y_{i + 1}" for i in range(n)])
    _check_bundle(bundle)


# -- flat <-> structured helpers ------------------------------------------


def _sym_to_flat(T) -> list:
    n = T.shape[0]
    return [T[i, j, k] for i in range(n) for j, k in _pairs(n)]


def _sym_from_flat(vals, n: int) -> np.ndarray:
    vals = list(vals)
    T = np.empty((n, n, n), dtype=object)
    for (i, j, k), p in _sym_index(n).items():
        T[i, j, k] = vals[p]
    return as_array(T)


def _symmat_from_flat(vals, n: int) -> np.ndarray:
    vals = list(vals)
    Y = np.empty((n, n), dtype=object)
    for p, (i, j) in enumerate(_pairs(n)):
        Y[i, j] = Y[j, i] = vals[p]
    return as_array(Y)


def _json_value(a):
    if is_generic(np.asarray(a)):
        raise TypeError("only float points serialize to JSON")
    return np.asarray(a, dtype=float).tolist()


def _is_float(arr) -> bool:
    return not is_generic(np.asarray(arr))


def _check_sym(T, what: str):
    if _is_float(T):
        T = np.asarray(T, dtype=float)
        if not np.allclose(T, np.swapaxes(T, 1, 2), rtol=0, atol=1e-12 * max(1.0, np.abs(T).max(initial=0))):
            raise ValueError(f"{what} must be symmetric in its last two indices")


# -- jets -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Jet2:
    """2-jet of a map: value ``z``, Jacobian ``zj`` and second derivatives
    ``zjk[i, j, k] = d^2 z^i / dt^j dt^k`` at the source point ``base``."""

    z: np.ndarray
    zj: np.ndarray
    zjk: np.ndarray
    base: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.z)
        if np.shape(self.zj) != (n, n) or np.shape(self.zjk) != (n, n, n):
            raise DimensionMismatch("inconsistent jet shapes")
        if self.base is None:
            object.__setattr__(self, "base", np.zeros(n))
        _check_sym(self.zjk, "zjk")

    @property
    def n(self) -> int:
        return len(self.z)


def jet_identity(p) -> Jet2:
    p = np.asarray(p, dtype=float)
    n = len(p)
    return Jet2(p.copy(), np.eye(n), np.zeros((n, n, n)), p.copy())


def jet_of(h, p) -> Jet2:
    """2-jet at ``p`` of a map given by ``h.taylor`` (e.g. a DiffeoSpec)."""
    p = np.asarray(p, dtype=float)
    z, zj, zjk = field_jet(h, p, 2)
    if abs(np.linalg.det(zj)) == 0.0:
        raise SingularJacobian(f"Jacobian of the map is singular at {p.tolist()}")
    return Jet2(z, zj, zjk, p)


def jet_compose(g: Jet2, f: Jet2) -> Jet2:
    """Jet of ``g o f``; ``g`` is taken to be based at ``f.z``."""
    if g.n != f.n:
        raise DimensionMismatch("jets of different dimension")
    zj = g.zj @ f.zj
    zjk = np.einsum("ipq,pj,qk->ijk", g.zjk, f.zj, f.zj) + np.einsum("ip,pjk->ijk", g.zj, f.zjk)
    return Jet2(g.z.copy(), zj, symmetrize(zjk), f.base.copy())


def jet_invert(f: Jet2) -> Jet2:
    """Jet of the local inverse of ``f`` (based at ``f.z``)."""
    w = inv(f.zj, SingularJacobian)
    zjk = -np.einsum("ip,pjk,ja,kb->iab", w, f.zjk, w, w)
    return Jet2(f.base.copy(), w, symmetrize(zjk), f.z.copy())


# -- bundle points --------------------------------------------------------


class _Point:
    bundle: ClassVar[str] = ""

    @property
    def n(self) -> int:
        return len(self.y)

    def flat(self) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def is_generic(self) -> bool:
        return is_generic(self.flat())


@dataclass(frozen=True, eq=False)
class MPoint(_Point):
    y: np.ndarray
    bundle: ClassVar[str] = "M"

    def flat(self):
        return as_array(list(self.y))

    @classmethod
    def from_flat(cls, flat, n):
        return cls(as_array(list(flat)[:n]))

    def to_json(self):
        return {"bundle": "M", "n": self.n, "coords": {"y": _json_value(self.y)}}


@dataclass(frozen=True, eq=False)
class S2Point(_Point):
    """Frame coordinates ``(y^i, y^i_j, y^i_jk)``."""

    y: np.ndarray
    yj: np.ndarray
    yjk: np.ndarray
    bundle: ClassVar[str] = "S2"

    def __post_init__(self):
        n = len(self.y)
        if np.shape(self.yj) != (n, n) or np.shape(self.yjk) != (n, n, n):
            raise DimensionMismatch("inconsistent S2 point shapes")
        if _is_float(self.yj):
            yj = np.asarray(self.yj, dtype=float)
            v = inv(yj, SingularMatrix)
            if np.abs(yj @ v - np.eye(n)).max() > 1e-10:
                raise SingularMatrix("frame matrix is numerically singular")
        _check_sym(self.yjk, "yjk")

    def flat(self):
        return as_array(list(self.y) + list(np.asarray(self.yj).ravel()) + _sym_to_flat(self.yjk))

    @classmethod
    def from_flat(cls, flat, n):
        flat = list(flat)
        y = as_array(flat[:n])
        yj = as_array(flat[n : n + n * n]).reshape(n, n)
        return cls(y, yj, _sym_from_flat(flat[n + n * n :], n))

    def to_json(self):
        return {
            "bundle": "S2",
            "n": self.n,
            "coords": {"y": _json_value(self.y), "yj": _json_value(self.yj), "yjk": _json_value(self.yjk)},
        }

    @property
    def v(self):
        return inv(self.yj, SingularMatrix)


@dataclass(frozen=True, eq=False)
class GLPoint(_Point):
    y: np.ndarray
    yjk: np.ndarray
    bundle: ClassVar[str] = "GL"

    def __post_init__(self):
        _check_sym(self.yjk, "yjk")

    def flat(self):
        return as_array(list(self.y) + _sym_to_flat(self.yjk))

    @classmethod
    def from_flat(cls, flat, n):
        flat = list(flat)
        return cls(as_array(flat[:n]), _sym_from_flat(flat[n:], n))

    def to_json(self):
        return {"bundle": "GL", "n": self.n, "coords": {"y": _json_value(self.y), "yjk": _json_value(self.yjk)}}


@dataclass(frozen=True, eq=False)
class OPoint(_Point):
    """``y^ij`` is the symmetric positive-definite matrix ``y^i_l y^j_l``."""

    y: np.ndarray
    yij: np.ndarray
    yjk: np.ndarray
    bundle: ClassVar[str] = "O"

    def __post_init__(self):
        if _is_float(self.yij):
            Y = np.asarray(self.yij, dtype=float)
            if not np.allclose(Y, Y.T, atol=1e-12 * max(1.0, np.abs(Y).max())):
                raise ValueError("y^ij must be symmetric")
            if np.linalg.eigvalsh(0.5 * (Y + Y.T)).min() <= 0:
                raise SingularMatrix("y^ij must be positive-definite")
        _check_sym(self.yjk, "yjk")

    @property
    def y_lower(self):
        """The inverse matrix ``y_ij``."""
        return inv(self.yij, SingularMatrix)

    def flat(self):
        n = self.n
        return as_array(list(self.y) + [self.yij[i, j] for i, j in _pairs(n)] + _sym_to_flat(self.yjk))

    @classmethod
    def from_flat(cls, flat, n):
        flat = list(flat)
        m = n * (n + 1) // 2
        return cls(as_array(flat[:n]), _symmat_from_flat(flat[n : n + m], n), _sym_from_flat(flat[n + m :], n))

    def to_json(self):
        return {
            "bundle": "O",
            "n": self.n,
            "coords": {"y": _json_value(self.y), "yij": _json_value(self.yij), "yjk": _json_value(self.yjk)},
        }


@dataclass(frozen=True, eq=False)
class SLPoint(_Point):
    y: np.ndarray
    ydet: object
    yjk: np.ndarray
    bundle: ClassVar[str] = "SL"

    def __post_init__(self):
        if not isinstance(self.ydet, tm.TaylorValue) and float(self.ydet) == 0.0:
            raise SingularMatrix("ydet must be non-zero")
        _check_sym(self.yjk, "yjk")

    def flat(self):
        return as_array(list(self.y) + [self.ydet] + _sym_to_flat(self.yjk))

    @classmethod
    def from_flat(cls, flat, n):
        flat = list(flat)
        return cls(as_array(flat[:n]), flat[n], _sym_from_flat(flat[n + 1 :], n))

    def to_json(self):
        return {
            "bundle": "SL",
            "n": self.n,
            "coords": {"y": _json_value(self.y), "ydet": float(self.ydet), "yjk": _json_value(self.yjk)},
        }


@dataclass(frozen=True, eq=False)
class APoint(_Point):
    y: np.ndarray
    x: object
    yi: np.ndarray
    bundle: ClassVar[str] = "A"

    def flat(self):
        return as_array(list(self.y) + [self.x] + list(self.yi))

    @classmethod
    def from_flat(cls, flat, n):
        flat = list(flat)
        return cls(as_array(flat[:n]), flat[n], as_array(flat[n + 1 :]))

    def to_json(self):
        return {
            "bundle": "A",
            "n": self.n,
            "coords": {"y": _json_value(self.y), "x": float(self.x), "yi": _json_value(self.yi)},
        }


@dataclass(frozen=True, eq=False)
class BPoint(_Point):
    y: np.ndarray
    yi: np.ndarray
    bundle: ClassVar[str] = "B"

    def flat(self):
        return as_array(list(self.y) + list(self.yi))

    @classmethod
    def from_flat(cls, flat, n):
        flat = list(flat)
        return cls(as_array(flat[:n]), as_array(flat[n:]))

    def to_json(self):
        return {"bundle": "B", "n": self.n, "coords": {"y": _json_value(self.y), "yi": _json_value(self.yi)}}


POINT_TYPES = {
    "M": MPoint,
    "S2": S2Point,
    "GL": GLPoint,
    "O": OPoint,
    "SL": SLPoint,
    "A": APoint,
    "B": BPoint,
}


def point_from_flat(bundle: str, flat, n: int):
    flat = list(flat)
    if len(flat) != chart_dim(bundle, n):
        raise DimensionMismatch(
            f"{bundle} chart with n={n} has {chart_dim(bundle, n)} coordinates, got {len(flat)}"
        )
    return POINT_TYPES[bundle].from_flat(flat, n)


def point_from_json(record: dict):
    bundle = _check_bundle(record["bundle"])
    n = int(record["n"])
    c = record["coords"]
    arr = lambda k: np.asarray(c[k], dtype=float)  # noqa: E731
    if bundle == "M":
        p = MPoint(arr("y"))
    elif bundle == "S2":
        p = S2Point(arr("y"), arr("yj"), arr("yjk"))
    elif bundle == "GL":
        p = GLPoint(arr("y"), arr("yjk"))
    elif bundle == "O":
        p = OPoint(arr("y"), arr("yij"), arr("yjk"))
    elif bundle == "SL":
        p = SLPoint(arr("y"), float(c["ydet"]), arr("yjk"))
    elif bundle == "A":
        p = APoint(arr("y"), float(c["x"]), arr("yi"))
    else:
        p = BPoint(arr("y"), arr("yi"))
    if p.n != n:
        raise DimensionMismatch("declared n does not match the coordinates")
    return p


def s2_from_jet(jet: Jet2) -> S2Point:
    """Frame coordinates of the 2-jet at 0 of a frame map."""
    v = inv(jet.zj, SingularJacobian)
    yjk = np.einsum("pj,ipq,qk->ijk", v, jet.zjk, v)
    return S2Point(np.asarray(jet.z, dtype=float).copy(), np.asarray(jet.zj, dtype=float).copy(), symmetrize(yjk))


def jet_from_s2(p: S2Point) -> Jet2:
    zjk = np.einsum("ijk,jp,kq->ipq", p.yjk, p.yj, p.yj)
    return Jet2(np.asarray(p.y, dtype=float).copy(), np.asarray(p.yj, dtype=float).copy(), symmetrize(zjk))


def gl_action(A, p: S2Point) -> S2Point:
    """Right action ``(y^i, y^i_j, y^i_jk) -> (y^i, y^i_p A^p_j, y^i_jk)``."""
    A = np.asarray(A, dtype=float)
    if A.shape != (p.n, p.n):
        raise DimensionMismatch("matrix size differs from the point dimension")
    if np.linalg.det(A) == 0.0:
        raise SingularMatrix("GL action needs an invertible matrix")
    return S2Point(p.y, p.yj @ A, p.yjk)


def _trace_first(yjk):
    """``y_i = y^j_{ji}``."""
    n = yjk.shape[0]
    return as_array([sum((yjk[j, j, i] for j in range(n)), 0.0) for i in range(n)])


def project(target: str, p: S2Point):
    """Project a frame-bundle point to one of the reduced bundles."""
    if not isinstance(p, S2Point):
        raise TypeError("project expects an S2Point")
    if target == "S2":
        return p
    if target == "M":
        return MPoint(p.y)
    if target == "GL":
        return GLPoint(p.y, p.yjk)
    if target == "O":
        yj = p.yj
        return OPoint(p.y, symmetrize_matrix(yj @ yj.T), p.yjk)
    if target == "SL":
        return SLPoint(p.y, det(p.yj), p.yjk)
    if target == "A":
        return APoint(p.y, tm.log(abs(det(p.yj))), _trace_first(p.yjk))
    if target == "B":
        return BPoint(p.y, _trace_first(p.yjk))
    raise ValueError(f"unknown projection target {target!r}")


def symmetrize_matrix(M):
    return 0.5 * (M + M.T)


def sl_to_a(p: SLPoint) -> APoint:
    """``x = ln|y|`` and ``y_i = y^j_ji``; the sign of ``y`` is forgotten."""
    return APoint(p.y, tm.log(abs(p.ydet)), _trace_first(p.yjk))


# -- transitions ----------------------------------------------------------


def _map_jet(h, y):
    """(alpha, d alpha/dy, d^2 alpha/dy dy) of the diffeomorphism at ``y``."""
    if isinstance(h, Jet2):
        if is_generic(np.asarray(y)):
            raise TypeError("a fixed Jet2 cannot be evaluated at a Taylor-valued point")
        if not np.allclose(h.base, np.asarray(y, dtype=float), rtol=0, atol=1e-12):
            raise DimensionMismatch("jet is based at a different point")
        return h.z, h.zj, h.zjk
    return field_jet(h, y, 2)


def _second_order(W, J, H, yjk):
    """``alpha^i_jk = W^p_j (H^i_pq + J^i_s y^s_pq) W^q_k`` with ``W = J^-1``."""
    n = J.shape[0]
    T = H + np.tensordot(J, yjk, axes=([1], [0]))
    out = np.empty((n, n, n), dtype=object if (is_generic(T) or is_generic(W)) else float)
    Wt = W.T
    for i in range(n):
        out[i] = Wt @ T[i] @ W
    return symmetrize(out)


def _log_det_gradient(W, H):
    """``d ln|det J| / dy^q = W^p_j H^j_pq``."""
    n = W.shape[0]
    return as_array([sum((W[p, j] * H[j, p, q] for j in range(n) for p in range(n)), 0.0) for q in range(n)])


def transition(bundle: str, h, p):
    """Apply the bundle map induced by the local diffeomorphism ``h``.

    ``h`` provides ``taylor(center, order)`` (DiffeoSpec and friends) or is a
    :class:`Jet2` based at the base point of ``p``.
    """
    _check_bundle(bundle)
    if p.bundle != bundle:
        raise TypeError(f"point lives on {p.bundle}, not {bundle}")
    y = p.y
    alpha, J, H = _map_jet(h, y)
    if bundle == "M":
        return MPoint(alpha)
    if not is_generic(np.asarray(J)) and np.linalg.det(np.asarray(J, dtype=float)) == 0.0:
        raise SingularJacobian("Jacobian of the diffeomorphism is singular")
    W = inv(J, SingularJacobian)
    if bundle in ("A", "B"):
        c = _log_det_gradient(W, H)
        yi_new = c @ W + p.yi @ W
        if bundle == "B":
            return BPoint(alpha, as_array(yi_new))
        return APoint(alpha, p.x + tm.log(abs(det(J))), as_array(yi_new))
    yjk = _second_order(W, J, H, p.yjk)
    if bundle == "S2":
        return S2Point(alpha, J @ p.yj, yjk)
    if bundle == "GL":
        return GLPoint(alpha, yjk)
    if bundle == "O":
        return OPoint(alpha, symmetrize_matrix(J @ p.yij @ J.T), yjk)
    return SLPoint(alpha, det(J) * p.ydet, yjk)
