"""Floating-point evaluation of Exprs.

Atom implementations are looked up by function name in an ``atom_impls``
mapping.  A value may be

* a plain callable (used for the underived function only),
* a mapping from derivative orders (a tuple, or an int for unary functions)
  to callables,
* any object with a ``derivative(orders) -> callable`` method, such as
  :class:`ExprImpl` or :class:`GenericImpl`.

``log``, ``exp``, ``sin`` and ``cos`` are always available.
"""

from __future__ import annotations

import math
import zlib
from typing import Callable, Mapping, Sequence

from ..errors import EvalDomainError, MissingAtomImpl
from .core import Atom, Expr, Symbol, as_expr

DENOMINATOR_FLOOR = 1e-300


def _safe_log(u: float) -> float:
    if u <= 0.0:
        raise EvalDomainError(f"log of non-positive value {u:.6g}")
    return math.log(u)


_BUILTIN_IMPLS = {
    "log": _safe_log,
    "exp": math.exp,
    "sin": math.sin,
    "cos": math.cos,
}


class ExprImpl:
    """Implementation of a function given by a rational Expr in formal parameters.

    Derivatives of any order are produced symbolically, then compiled.
    """

    def __init__(self, params: Sequence[Symbol], body: Expr, atom_impls=None):
        self.params = tuple(params)
        self.body = as_expr(body)
        self.atom_impls = atom_impls
        self._cache: dict = {}

    def derivative(self, orders: tuple[int, ...]) -> Callable[..., float]:
        fn = self._cache.get(orders)
        if fn is None:
            d = self.body
            for p, k in zip(self.params, orders):
                for _ in range(k):
                    d = d.diff(p)
            compiled = compile_expr(d, self.params, self.atom_impls)
            fn = self._cache[orders] = lambda *args: compiled(args)
        return fn


class GenericImpl:
    """Deterministic analytic stand-in for an opaque function.

    ``F(u) = prod_i (2 + sin(a_i u_i + c_i))`` with coefficients seeded from the
    function name, so every derivative has a closed form.
    """

    def __init__(self, name: str, arity: int):
        seed = zlib.crc32(name.encode())
        self.a = []
        self.c = []
        for i in range(arity):
            h = zlib.crc32(f"{name}/{i}".encode(), seed)
            self.a.append(0.5 + (h % 1000) / 1000.0)
            self.c.append(2 * math.pi * ((h // 1000) % 1000) / 1000.0)

    def derivative(self, orders: tuple[int, ...]) -> Callable[..., float]:
        a, c = self.a, self.c

        def fn(*u):
            out = 1.0
            for ai, ci, d, ui in zip(a, c, orders, u):
                s = ai ** d * math.sin(ai * ui + ci + d * math.pi / 2)
                out *= s + 2.0 if d == 0 else s
            return out

        return fn


def lookup_impl(atom_impls: Mapping | None, name: str, orders: tuple[int, ...]):
    if name in _BUILTIN_IMPLS and not any(orders):
        return _BUILTIN_IMPLS[name]
    impl = (atom_impls or {}).get(name)
    if impl is None:
        raise MissingAtomImpl(f"no implementation for function {name!r}")
    if hasattr(impl, "derivative"):
        return impl.derivative(tuple(orders))
    if isinstance(impl, Mapping):
        fn = impl.get(tuple(orders))
        if fn is None and len(orders) == 1:
            fn = impl.get(orders[0])
        if fn is None:
            raise MissingAtomImpl(f"no implementation for {name} with derivative orders {orders}")
        return fn
    if callable(impl) and not any(orders):
        return impl
    raise MissingAtomImpl(f"no implementation for {name} with derivative orders {orders}")


def _terms(poly) -> list:
    out = []
    for monom, coeff in poly.items():
        out.append((float(coeff), tuple((i, e) for i, e in enumerate(monom) if e)))
    return out


def _eval_terms(terms, vals) -> float:
    total = 0.0
    for c, factors in terms:
        for i, e in factors:
            c *= vals[i] if e == 1 else vals[i] ** e
        total += c
    return total


class CompiledExpr:
    """Callable evaluating an Expr at a point given as a sequence over ``symbols``."""

    def __init__(self, expr: Expr, symbols: Sequence[Symbol], atom_impls=None):
        self.expr = expr
        index = {s: i for i, s in enumerate(symbols)}
        self._gens = [self._gen_fn(g, index, symbols, atom_impls) for g in expr.gens]
        self._num = _terms(expr.num)
        self._den = _terms(expr.den)

    @staticmethod
    def _gen_fn(g, index, symbols, atom_impls):
        if isinstance(g, Symbol):
            if g not in index:
                raise EvalDomainError(f"no value supplied for symbol {g.name}")
            i = index[g]
            return lambda x: x[i]
        impl = lookup_impl(atom_impls, g.name, g.orders)
        args = [CompiledExpr(a, symbols, atom_impls) for a in g.args]

        def fn(x):
            try:
                return impl(*[a(x) for a in args])
            except (ValueError, OverflowError, ZeroDivisionError) as exc:
                raise EvalDomainError(f"{g}: {exc}") from exc

        return fn

    def parts(self, x) -> tuple[float, float]:
        vals = [fn(x) for fn in self._gens]
        return _eval_terms(self._num, vals), _eval_terms(self._den, vals)

    def __call__(self, x) -> float:
        n, d = self.parts(x)
        if abs(d) < DENOMINATOR_FLOOR:
            raise EvalDomainError(f"denominator of {self.expr} vanishes")
        return n / d


def compile_expr(e: Expr, symbols: Sequence[Symbol], atom_impls=None) -> CompiledExpr:
    return CompiledExpr(as_expr(e), tuple(symbols), atom_impls)


def evaluate(e: Expr, point: Mapping, atom_impls=None) -> float:
    """Evaluate at ``point`` (Symbol or name -> float)."""
    syms = []
    vals = []
    for k, v in point.items():
        syms.append(k if isinstance(k, Symbol) else Symbol(str(k)))
        vals.append(float(v))
    return compile_expr(e, syms, atom_impls)(vals)


def generic_impls(e_or_atoms, existing: Mapping | None = None) -> dict:
    """``existing`` extended with :class:`GenericImpl` for every unbound opaque function."""
    out = dict(existing or {})
    atoms = set()
    items = e_or_atoms if isinstance(e_or_atoms, (list, tuple, set)) else [e_or_atoms]
    for item in items:
        if isinstance(item, Atom):
            atoms.add(item)
        else:
            atoms |= as_expr(item).all_atoms()
    for a in atoms:
        if a.name not in out and a.name not in _BUILTIN_IMPLS:
            out[a.name] = GenericImpl(a.name, a.arity)
    return out
