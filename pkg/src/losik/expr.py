"""
Expression language for scalar functions and vector fields on charts.

Grammar::

    expr    := term { ("+" | "-") term }
    term    := unary { ("*" | "/") unary }
    unary   := "-" unary | power
    power   := primary [ "^" ["-"] intlit ]
    primary := number | ident | "(" expr ")" | func "(" args ")"
    func    := sin | cos | exp | ln | sqrt | pow
    ident   := y<digits> | r | r2 | pi

``r2`` is the sum of squares of the base coordinates and ``r`` its square
root. ``pow(x, c)`` takes a real literal ``c`` and needs ``x > 0``. Unary
minus binds looser than ``^``, so ``-y1^2`` is ``-(y1^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np

from . import taylor as tm
from .errors import ArityError, DimensionMismatch, ExprSyntaxError, UnknownIdentifier
from .taylor import DEFAULT_ORDER, TaylorValue

__all__ = [
    "Num",
    "Var",
    "Sym",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "Expr",
    "parse",
    "parse_list",
    "to_source",
    "evaluate",
    "eval_taylor",
    "compile_expr",
    "VectorFieldSpec",
    "DiffeoSpec",
    "ComposedDiffeo",
    "random_polynomial_diffeo",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Sym:
    name: str  # "r", "r2" or "pi"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Num, Var, Sym, Neg, BinOp, Pow, Call]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "ln": 1, "sqrt": 1, "pow": 2}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, ident, op, end
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(src, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), start))
        pos = m.end()
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src: str, n: int):
        self.src = src
        self.n = n
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str) -> _Token:
        t = self.tok
        if t.kind != "op" or t.text != op:
            raise ExprSyntaxError(f"unexpected {_describe(t)}", t.pos, (repr(op),))
        return self.advance()

    def at_op(self, *ops) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def expr(self) -> Expr:
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.at_op("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.at_op("-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        node = self.primary()
        if self.at_op("^"):
            self.advance()
            sign = 1
            if self.at_op("-"):
                self.advance()
                sign = -1
            t = self.tok
            if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
                raise ExprSyntaxError(
                    f"unexpected {_describe(t)}; '^' takes an integer literal",
                    t.pos,
                    ("integer literal",),
                )
            self.advance()
            node = Pow(node, sign * int(t.text))
        return node

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        if t.kind == "ident":
            self.advance()
            name = t.text
            if self.at_op("("):
                return self.call(name, t)
            if name in ("r", "r2", "pi"):
                return Sym(name)
            m = re.fullmatch(r"y(\d+)", name)
            if m:
                idx = int(m.group(1))
                if 1 <= idx <= self.n:
                    return Var(idx)
                raise UnknownIdentifier(
                    f"variable {name!r} outside chart dimension {self.n}", t.pos
                )
            if name in FUNCTIONS:
                raise ExprSyntaxError(f"function {name!r} needs arguments", self.tok.pos, ("'('",))
            raise UnknownIdentifier(f"unknown identifier {name!r}", t.pos)
        raise ExprSyntaxError(
            f"unexpected {_describe(t)}", t.pos, ("number", "identifier", "'('")
        )

    def call(self, name: str, name_tok: _Token) -> Expr:
        if name not in FUNCTIONS:
            raise UnknownIdentifier(f"unknown function {name!r}", name_tok.pos)
        self.expect_op("(")
        args = []
        if not self.at_op(")"):
            while True:
                if name == "pow" and len(args) == 1:
                    args.append(self.real_literal())
                else:
                    args.append(self.expr())
                if not self.at_op(","):
                    break
                self.advance()
        close = self.tok
        self.expect_op(")")
        if len(args) != FUNCTIONS[name]:
            raise ArityError(
                f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", close.pos
            )
        return Call(name, tuple(args))

    def real_literal(self) -> Num:
        sign = 1.0
        if self.at_op("-", "+"):
            sign = -1.0 if self.advance().text == "-" else 1.0
        t = self.tok
        if t.kind != "num":
            raise ExprSyntaxError(
                f"unexpected {_describe(t)}; pow exponent must be a real literal",
                t.pos,
                ("real literal",),
            )
        self.advance()
        return Num(sign * float(t.text))

    def finish(self):
        t = self.tok
        if t.kind != "end":
            raise ExprSyntaxError(f"unexpected {_describe(t)}", t.pos, ("operator", "end of input"))


def _describe(t: _Token) -> str:
    return "end of input" if t.kind == "end" else repr(t.text)


def parse(src: str, n: int) -> Expr:
    """Parse one scalar expression over the variables ``y1..yn``."""
    p = _Parser(src, n)
    node = p.expr()
    p.finish()
    return node


def parse_list(src: str, n: int) -> tuple:
    """Parse a comma separated list of expressions (commas inside calls are fine)."""
    p = _Parser(src, n)
    items = [p.expr()]
    while p.at_op(","):
        p.advance()
        items.append(p.expr())
    p.finish()
    return tuple(items)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(e: Expr) -> str:
    """Render an expression so that :func:`parse` gives back the same tree."""
    if isinstance(e, Num):
        s = repr(float(e.value))
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, Var):
        return f"y{e.index}"
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Pow):
        base = to_source(e.base)
        if isinstance(e.base, (Pow,)):
            base = f"({base})"
        return f"{base}^{e.exponent}"
    if isinstance(e, Call):
        if e.func == "pow":
            return f"pow({to_source(e.args[0])}, {float(e.args[1].value)!r})"
        return f"{e.func}({', '.join(to_source(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


def max_variable(e: Expr) -> int:
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Neg):
        return max_variable(e.arg)
    if isinstance(e, BinOp):
        return max(max_variable(e.left), max_variable(e.right))
    if isinstance(e, Pow):
        return max_variable(e.base)
    if isinstance(e, Call):
        return max(max_variable(a) for a in e.args)
    return 0


def uses_symbol(e: Expr, name: str) -> bool:
    if isinstance(e, Sym):
        return e.name == name
    if isinstance(e, Neg):
        return uses_symbol(e.arg, name)
    if isinstance(e, BinOp):
        return uses_symbol(e.left, name) or uses_symbol(e.right, name)
    if isinstance(e, Pow):
        return uses_symbol(e.base, name)
    if isinstance(e, Call):
        return any(uses_symbol(a, name) for a in e.args)
    return False


class Env:
    """Variable bindings; ``r2`` and ``r`` are derived lazily from the first
    ``base_n`` variables unless given explicitly."""

    __slots__ = ("ys", "base_n", "_r2", "_r")

    def __init__(self, ys: Sequence, base_n: int | None = None, r2=None, r=None):
        self.ys = ys
        self.base_n = len(ys) if base_n is None else base_n
        self._r2 = r2
        self._r = r

    @property
    def r2(self):
        if self._r2 is None:
            if self._r is not None:
                self._r2 = self._r * self._r
            else:
                acc = 0.0
                for v in self.ys[: self.base_n]:
                    acc = acc + v * v
                self._r2 = acc
        return self._r2

    @property
    def r(self):
        if self._r is None:
            self._r = tm.sqrt(self.r2)
        return self._r


def _ipow(x, p: int):
    if isinstance(x, TaylorValue):
        return x.pow_int(p)
    if p < 0 and x == 0:
        raise tm.DivisionBySingular("zero to a negative power")
    return x**p


def _div(a, b):
    if not isinstance(b, TaylorValue) and b == 0:
        raise tm.DivisionBySingular("division by zero")
    return a / b


_FUNC_IMPL = {
    "sin": tm.sin,
    "cos": tm.cos,
    "exp": tm.exp,
    "ln": tm.log,
    "sqrt": tm.sqrt,
}


@lru_cache(maxsize=4096)
def compile_expr(e: Expr) -> Callable[[Env], object]:
    """Turn an AST into a closure ``f(env)``; works on floats and Taylor values."""
    if isinstance(e, Num):
        v = float(e.value)
        return lambda env: v
    if isinstance(e, Var):
        i = e.index - 1

        def var(env):
            try:
                return env.ys[i]
            except IndexError:
                raise DimensionMismatch(f"y{e.index} not bound (chart has {len(env.ys)} variables)")

        return var
    if isinstance(e, Sym):
        if e.name == "pi":
            return lambda env: math.pi
        if e.name == "r2":
            return lambda env: env.r2
        return lambda env: env.r
    if isinstance(e, Neg):
        f = compile_expr(e.arg)
        return lambda env: -f(env)
    if isinstance(e, BinOp):
        fl, fr = compile_expr(e.left), compile_expr(e.right)
        if e.op == "+":
            return lambda env: fl(env) + fr(env)
        if e.op == "-":
            return lambda env: fl(env) - fr(env)
        if e.op == "*":
            return lambda env: fl(env) * fr(env)
        return lambda env: _div(fl(env), fr(env))
    if isinstance(e, Pow):
        fb = compile_expr(e.base)
        p = e.exponent
        return lambda env: _ipow(fb(env), p)
    if isinstance(e, Call):
        fa = compile_expr(e.args[0])
        if e.func == "pow":
            c = float(e.args[1].value)
            return lambda env: tm.power(fa(env), c)
        g = _FUNC_IMPL[e.func]
        return lambda env: g(fa(env))
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, point: Sequence, base_n: int | None = None):
    """Evaluate at a point whose entries are floats or Taylor values."""
    return compile_expr(e)(Env(point, base_n))


def eval_taylor(e: Expr, center: Sequence[float], order: int = DEFAULT_ORDER, base_n=None):
    """Taylor expansion of ``e`` at ``center`` in the displacement variables."""
    center = np.asarray(center, dtype=float)
    m = len(center)
    if max_variable(e) > m:
        raise DimensionMismatch(f"expression uses y{max_variable(e)} but center has {m} entries")
    ys = [TaylorValue.variable(i, m, order, float(center[i])) for i in range(m)]
    out = compile_expr(e)(Env(ys, base_n))
    if not isinstance(out, TaylorValue):
        out = TaylorValue.constant(out, m, order)
    return out


class VectorFieldSpec:
    """``n`` component expressions on an ``n``-dimensional chart."""

    def __init__(self, components: Sequence[Expr], n: int | None = None):
        comps = tuple(components)
        n = len(comps) if n is None else n
        if len(comps) != n:
            raise DimensionMismatch(f"{len(comps)} components for dimension {n}")
        for c in comps:
            if max_variable(c) > n:
                raise DimensionMismatch("component uses a variable beyond the chart dimension")
        self.n = n
        self.components = comps
        self._fns = [compile_expr(c) for c in comps]

    @classmethod
    def parse(cls, src: str, n: int):
        comps = parse_list(src, n)
        if len(comps) != n:
            raise ArityError(f"expected {n} components, got {len(comps)}", None)
        return cls(comps, n)

    def taylor(self, center, order: int = DEFAULT_ORDER) -> list:
        center = np.asarray(center, dtype=float)
        if center.shape != (self.n,):
            raise DimensionMismatch(f"center must have {self.n} entries")
        ys = [TaylorValue.variable(i, self.n, order, float(center[i])) for i in range(self.n)]
        env = Env(ys)
        out = []
        for f in self._fns:
            v = f(env)
            if not isinstance(v, TaylorValue):
                v = TaylorValue.constant(v, self.n, order)
            out.append(v)
        return out

    def __call__(self, point) -> np.ndarray:
        point = [float(v) for v in point]
        if len(point) != self.n:
            raise DimensionMismatch(f"point must have {self.n} entries")
        env = Env(point)
        return np.array([float(f(env)) for f in self._fns])

    def source(self) -> str:
        return ", ".join(to_source(c) for c in self.components)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.source()!r}, n={self.n})"


class DiffeoSpec(VectorFieldSpec):
    """A local diffeomorphism ``alpha^i = alpha^i(y^1..y^n)``.

    Regularity is checked where the map is used.
    """


class ComposedDiffeo:
    """``outer o inner`` realized by Taylor composition."""

    def __init__(self, outer, inner):
        if outer.n != inner.n:
            raise DimensionMismatch("composed maps must share the dimension")
        self.n = outer.n
        self.outer = outer
        self.inner = inner

    def taylor(self, center, order: int = DEFAULT_ORDER) -> list:
        inner = tm.TaylorMap(self.inner.taylor(center, order))
        outer = tm.TaylorMap(self.outer.taylor(inner.constants(), order))
        return list(tm.t_compose(outer, inner))

    def __call__(self, point) -> np.ndarray:
        return self.outer(self.inner(point))


def _monomials(n: int, max_degree: int):
    import itertools

    for d in range(1, max_degree + 1):
        yield from itertools.combinations_with_replacement(range(n), d)


def random_polynomial_diffeo(
    n: int, rng: np.random.Generator, max_degree: int = 3, scale: float = 0.1
) -> DiffeoSpec:
    """Identity plus a polynomial perturbation with coefficients in [-scale, scale]."""
    comps = []
    for i in range(n):
        node: Expr = Var(i + 1)
        for mono in _monomials(n, max_degree):
            c = float(rng.uniform(-scale, scale))
            term: Expr = Num(abs(c))
            for v in mono:
                term = BinOp("*", term, Var(v + 1))
            node = BinOp("+" if c >= 0 else "-", node, term)
        comps.append(node)
    return DiffeoSpec(comps, n)
