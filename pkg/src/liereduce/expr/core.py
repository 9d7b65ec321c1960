"""Canonical rational functions over Q in symbols and opaque function atoms.

Every :class:`Expr` is stored as a reduced fraction ``num/den`` of integer
polynomials over a sorted tuple of generators (symbols and atoms).  The
polynomial arithmetic and gcd come from sympy's sparse ``PolyRing``; this
module owns the generator bookkeeping, the canonical form and the calculus.

Canonical form:

* ``gcd(num, den) = 1`` and the integer content of the pair is 1;
* the leading coefficient of ``den`` (graded lex over the generator order) is
  positive;
* only generators that actually occur are kept.

Hence two Exprs are mathematically equal iff they compare equal, and an
Expr is zero iff its numerator is the zero polynomial.
"""

from __future__ import annotations

import itertools
import re
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union

import sympy
from sympy.polys.domains import ZZ
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyRing

from ..errors import ContextMismatch, DivisionByZero, UnknownSymbol

_lock = threading.RLock()
_registry: dict = {}
_uid = itertools.count()

# Functions with known derivative rules. Everything else is opaque.
BUILTIN_FUNCTIONS = ("log", "exp", "sin", "cos")


def natural_key(name: str) -> tuple:
    """Sort key that orders x2 before x10."""
    return tuple((0, int(p)) if p.isdigit() else (1, p) for p in re.split(r"(\d+)", name) if p)


class Symbol:
    """An interned coordinate or parameter name."""

    __slots__ = ("name", "sort_key", "_sympy")

    def __new__(cls, name: str):
        key = ("s", name)
        obj = _registry.get(key)
        if obj is not None:
            return obj
        with _lock:
            obj = _registry.get(key)
            if obj is None:
                obj = object.__new__(cls)
                obj.name = name
                obj.sort_key = (0, natural_key(name))
                obj._sympy = sympy.Symbol(f"_g{next(_uid)}")
                _registry[key] = obj
        return obj

    def __reduce__(self):
        return (Symbol, (self.name,))

    def __repr__(self):
        return f"Symbol({self.name!r})"

    def __str__(self):
        return self.name


def _orders_text(name: str, orders: tuple[int, ...]) -> str:
    if len(orders) == 1:
        k = orders[0]
        if k == 0:
            return name
        if k <= 2:
            return name + "'" * k
        return f"{name}^({k})"
    if not any(orders):
        return name
    return name + "_{" + ",".join(str(k) for k in orders) + "}"


class Atom:
    """An interned application ``name^(orders)(args)`` of an opaque function.

    Atoms with different (name, orders, args) are algebraically independent.
    """

    __slots__ = ("name", "orders", "args", "sort_key", "text", "_sympy")

    def __new__(cls, name: str, orders: Sequence[int], args: Sequence):
        orders = tuple(int(k) for k in orders)
        args = tuple(as_expr(a) for a in args)
        if len(orders) != len(args) or not args:
            raise ValueError(f"atom {name}: orders {orders} do not match {len(args)} arguments")
        if any(k < 0 for k in orders):
            raise ValueError("derivative orders must be non-negative")
        key = ("a", name, orders, args)
        obj = _registry.get(key)
        if obj is not None:
            return obj
        with _lock:
            obj = _registry.get(key)
            if obj is None:
                obj = object.__new__(cls)
                obj.name = name
                obj.orders = orders
                obj.args = args
                argtext = tuple(str(a) for a in args)
                obj.sort_key = (1, name, orders, argtext)
                obj.text = _orders_text(name, orders) + "(" + ", ".join(argtext) + ")"
                obj._sympy = sympy.Symbol(f"_g{next(_uid)}")
                _registry[key] = obj
        return obj

    @property
    def arity(self) -> int:
        return len(self.args)

    def __reduce__(self):
        return (Atom, (self.name, self.orders, self.args))

    def __repr__(self):
        return f"Atom({self.text})"

    def __str__(self):
        return self.text


Generator = Union[Symbol, Atom]


@lru_cache(maxsize=4096)
def _ring(gens: tuple) -> PolyRing:
    return PolyRing(tuple(g._sympy for g in gens), ZZ, grlex)


@lru_cache(maxsize=8192)
def _positions(old: tuple, new: tuple) -> tuple[int, ...]:
    where = {g: i for i, g in enumerate(new)}
    return tuple(where[g] for g in old)


def _lift(poly, old: tuple, new: tuple, ring: PolyRing):
    if old == new:
        return poly
    pos = _positions(old, new)
    n = len(new)
    out = {}
    for monom, coeff in poly.items():
        exps = [0] * n
        for i, e in zip(pos, monom):
            exps[i] = e
        out[tuple(exps)] = coeff
    return ring.from_dict(out) if out else ring.zero


def _union(gen_tuples: Iterable[tuple]) -> tuple:
    seen = set()
    for gs in gen_tuples:
        seen.update(gs)
    return tuple(sorted(seen, key=lambda g: g.sort_key))


def _is_one(poly) -> bool:
    return len(poly) == 1 and poly.get(poly.ring.zero_monom) == 1


class Expr:
    """Immutable canonical rational function. Build via arithmetic, ``parse`` or ``const``."""

    __slots__ = ("gens", "num", "den", "_hash", "_str")

    def __init__(self, gens, num, den):
        # raw constructor: callers guarantee canonical form
        self.gens = gens
        self.num = num
        self.den = den
        self._hash = None
        self._str = None

    # construction -------------------------------------------------------

    @staticmethod
    def _build(gens: tuple, num, den, cancel: bool = True) -> "Expr":
        if not num:
            return ZERO
        if not den:
            raise DivisionByZero("denominator is identically zero")
        if cancel and not _is_one(den):
            num, den = num.cancel(den)
        return _prune(gens, num, den)

    @staticmethod
    def const(value) -> "Expr":
        q = Fraction(value)
        if q == 0:
            return ZERO
        r = _ring(())
        return Expr((), r(q.numerator), r(q.denominator))

    @staticmethod
    def from_generator(g: Generator) -> "Expr":
        r = _ring((g,))
        return Expr((g,), r.gens[0], r.one)

    # inspection ---------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.num

    @property
    def is_constant(self) -> bool:
        return not self.gens

    @property
    def is_polynomial(self) -> bool:
        return _is_one(self.den)

    def as_fraction(self) -> Fraction:
        if self.gens:
            raise ValueError(f"{self} is not constant")
        return Fraction(int(self.num.LC) if self.num else 0, int(self.den.LC))

    def numerator(self) -> "Expr":
        return Expr._build(self.gens, self.num, _ring(self.gens).one, cancel=False)

    def denominator(self) -> "Expr":
        return Expr._build(self.gens, self.den, _ring(self.gens).one, cancel=False)

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return tuple(g for g in self.gens if isinstance(g, Atom))

    def all_atoms(self) -> set[Atom]:
        """Atoms at any nesting depth."""
        out = set()
        for a in self.atoms:
            out.add(a)
            for arg in a.args:
                out |= arg.all_atoms()
        return out

    @property
    def free_symbols(self) -> set[Symbol]:
        out = set()
        for g in self.gens:
            if isinstance(g, Symbol):
                out.add(g)
            else:
                for arg in g.args:
                    out |= arg.free_symbols
        return out

    def depends_on(self, v: Symbol) -> bool:
        return v in self.free_symbols

    def degree(self, g: Generator) -> int:
        """Degree of the numerator in ``g`` (-1 for zero, 0 if absent)."""
        if g not in self.gens:
            return 0 if self.num else -1
        return self.num.degree(self.gens.index(g))

    def nterms(self) -> int:
        return len(self.num) + len(self.den)

    # arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not other.num:
            return self
        if not self.num:
            return other
        gens, (n1, d1), (n2, d2) = _common2(self, other)
        if d1 == d2:
            return Expr._build(gens, n1 + n2, d1)
        return Expr._build(gens, n1 * d2 + n2 * d1, d1 * d2)

    __radd__ = __add__

    def __neg__(self):
        if not self.num:
            return self
        return Expr(self.gens, -self.num, self.den)

    def __pos__(self):
        return self

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not self.num or not other.num:
            return ZERO
        gens, (n1, d1), (n2, d2) = _common2(self, other)
        if _is_one(d1) and _is_one(d2):
            return Expr(gens, n1 * n2, d1)
        return Expr._build(gens, n1 * n2, d1 * d2)

    __rmul__ = __mul__

    def inverse(self) -> "Expr":
        if not self.num:
            raise DivisionByZero("division by the zero expression")
        num, den = self.den, self.num
        if den.LC < 0:
            num, den = -num, -den
        return Expr(self.gens, num, den)

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        if k == 0:
            return ONE
        # coprime stays coprime; positive leading coefficient is preserved
        return Expr(self.gens, self.num ** k, self.den ** k)

    # comparison ---------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Expr.const(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return (
            self.gens == other.gens
            and dict.__eq__(self.num, other.num)
            and dict.__eq__(self.den, other.den)
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(
                (self.gens, frozenset(self.num.items()), frozenset(self.den.items()))
            )
        return self._hash

    def __bool__(self):
        return bool(self.num)

    # calculus -----------------------------------------------------------

    def diff(self, v: Symbol) -> "Expr":
        """Exact partial derivative; atoms differentiate by the chain rule."""
        if not self.gens:
            return ZERO
        ring = _ring(self.gens)
        num, den = self.num, self.den
        plain = _is_one(den)
        out = ZERO
        for i, g in enumerate(self.gens):
            dg = generator_derivative(g, v)
            if not dg.num:
                continue
            x = ring.gens[i]
            if plain:
                part = Expr._build(self.gens, num.diff(x), den, cancel=False)
            else:
                part = Expr._build(self.gens, num.diff(x) * den - num * den.diff(x), den * den)
            out = out + part * dg
        return out

    def subs(self, bindings: Mapping) -> "Expr":
        """Simultaneous substitution of symbols (keys: Symbol or name) by Exprs."""
        if not self.gens or not bindings:
            return self
        table = {}
        for k, v in bindings.items():
            table[k if isinstance(k, Symbol) else Symbol(str(k))] = as_expr(v)
        images = []
        changed = False
        for g in self.gens:
            if isinstance(g, Symbol):
                img = table.get(g)
                if img is None:
                    img = Expr.from_generator(g)
                else:
                    changed = True
            else:
                new_args = tuple(a.subs(table) for a in g.args)
                if new_args != g.args:
                    changed = True
                    img = make_atom(g.name, g.orders, new_args)
                else:
                    img = Expr.from_generator(g)
            images.append(img)
        if not changed:
            return self
        return compose(self, images)

    def map_atoms(self, fn) -> "Expr":
        """Replace every top-level atom ``a`` by ``fn(a)`` (an Expr), simultaneously."""
        images = [fn(g) if isinstance(g, Atom) else Expr.from_generator(g) for g in self.gens]
        return compose(self, images)

    # printing -----------------------------------------------------------

    def __str__(self):
        if self._str is None:
            self._str = _expr_str(self)
        return self._str

    def __repr__(self):
        return f"Expr({self})"


def _prune(gens: tuple, num, den) -> Expr:
    n = len(gens)
    if n:
        used = [False] * n
        for monom in itertools.chain(num.keys(), den.keys()):
            for i, e in enumerate(monom):
                if e:
                    used[i] = True
        if not all(used):
            keep = [i for i in range(n) if used[i]]
            new = tuple(gens[i] for i in keep)
            r = _ring(new)
            num = r.from_dict({tuple(m[i] for i in keep): c for m, c in num.items()})
            den = r.from_dict({tuple(m[i] for i in keep): c for m, c in den.items()})
            gens = new
    return Expr(gens, num, den)


def _common2(a: Expr, b: Expr):
    if a.gens == b.gens:
        return a.gens, (a.num, a.den), (b.num, b.den)
    gens = _union((a.gens, b.gens))
    r = _ring(gens)
    return (
        gens,
        (_lift(a.num, a.gens, gens, r), _lift(a.den, a.gens, gens, r)),
        (_lift(b.num, b.gens, gens, r), _lift(b.den, b.gens, gens, r)),
    )


def common_ring(exprs: Sequence[Expr]):
    """Lift several Exprs into one ring; returns (gens, ring, [(num, den), ...])."""
    gens = _union(e.gens for e in exprs)
    r = _ring(gens)
    return gens, r, [(_lift(e.num, e.gens, gens, r), _lift(e.den, e.gens, gens, r)) for e in exprs]


def from_polys(gens: tuple, num, den=None) -> Expr:
    """Canonical Expr from polynomials living in ``_ring(gens)``."""
    if den is None:
        den = _ring(gens).one
    return Expr._build(gens, num, den)


def _coerce(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Expr.const(x)
    if isinstance(x, (Symbol, Atom)):
        return Expr.from_generator(x)
    return NotImplemented


def as_expr(x) -> Expr:
    out = _coerce(x)
    if out is NotImplemented:
        raise TypeError(f"cannot convert {type(x).__name__} to Expr")
    return out


def compose(e: Expr, images: Sequence[Expr]) -> Expr:
    """Evaluate ``e`` with its i-th generator replaced by ``images[i]``."""
    gens, ring, pairs = common_ring(images)
    plain = all(_is_one(b) for _, b in pairs)
    nvars = len(e.gens)
    num_deg = e.num.degrees() if nvars else ()
    den_deg = e.den.degrees() if nvars else ()

    pa: list[dict] = [{0: ring.one} for _ in range(nvars)]
    pb: list[dict] = [{0: ring.one} for _ in range(nvars)]

    def power(cache, base, k):
        got = cache.get(k)
        if got is None:
            got = cache[k] = base ** k
        return got

    def expand(poly, degs):
        acc = ring.zero
        for monom, coeff in poly.items():
            term = ring(coeff)
            for i, k in enumerate(monom):
                a, b = pairs[i]
                if k:
                    term = term * power(pa[i], a, k)
                if not plain and degs[i] - k:
                    term = term * power(pb[i], b, degs[i] - k)
            acc += term
        return acc

    top = expand(e.num, num_deg)
    bottom = expand(e.den, den_deg)
    if not plain:
        for i in range(nvars):
            shift = den_deg[i] - num_deg[i]
            b = pairs[i][1]
            if shift > 0:
                top = top * power(pb[i], b, shift)
            elif shift < 0:
                bottom = bottom * power(pb[i], b, -shift)
    if not bottom:
        raise DivisionByZero(f"substitution makes the denominator of {e} vanish")
    return Expr._build(gens, top, bottom)


def make_atom(name: str, orders: Sequence[int], args: Sequence) -> Expr:
    """Expr for ``name^(orders)(args)``; builtin functions simplify where exact."""
    args = tuple(as_expr(a) for a in args)
    orders = tuple(orders)
    if name in BUILTIN_FUNCTIONS and len(args) == 1 and orders == (0,):
        u = args[0]
        if name == "exp" and u.is_zero:
            return ONE
        if name == "log" and u == ONE:
            return ZERO
        if name in ("sin",) and u.is_zero:
            return ZERO
        if name == "cos" and u.is_zero:
            return ONE
    return Expr.from_generator(Atom(name, orders, args))


_deriv_cache: dict = {}


def generator_derivative(g: Generator, v: Symbol) -> Expr:
    """d g / d v for a single generator, applying the chain rule through atom arguments."""
    if isinstance(g, Symbol):
        return ONE if g is v else ZERO
    key = (g, v)
    got = _deriv_cache.get(key)
    if got is not None:
        return got
    out = ZERO
    for i, arg in enumerate(g.args):
        da = arg.diff(v)
        if da.is_zero:
            continue
        out = out + da * _atom_partial(g, i)
    _deriv_cache[key] = out
    return out


def _atom_partial(a: Atom, i: int) -> Expr:
    if a.name in BUILTIN_FUNCTIONS and a.arity == 1 and a.orders == (0,):
        u = a.args[0]
        if a.name == "log":
            return u.inverse()
        if a.name == "exp":
            return Expr.from_generator(a)
        if a.name == "sin":
            return make_atom("cos", (0,), (u,))
        if a.name == "cos":
            return -make_atom("sin", (0,), (u,))
    orders = list(a.orders)
    orders[i] += 1
    return make_atom(a.name, orders, a.args)


def instantiate(e: Expr, name: str, params: Sequence[Symbol], body: Expr) -> Expr:
    """Replace every atom of function ``name`` by ``body`` (a rational Expr in ``params``).

    Derivative atoms become the matching partial derivatives of ``body``.
    """
    params = tuple(params)

    def image(a: Atom) -> Expr:
        args = tuple(instantiate(x, name, params, body) for x in a.args)
        if a.name != name:
            return make_atom(a.name, a.orders, args)
        d = body
        for p, k in zip(params, a.orders):
            for _ in range(k):
                d = d.diff(p)
        return d.subs(dict(zip(params, args)))

    if not any(True for _ in e.all_atoms()):
        return e
    return e.map_atoms(image)


# printing ---------------------------------------------------------------

def _power_text(g: Generator, e: int) -> str:
    text = str(g)
    return text if e == 1 else f"{text}^{e}"


def poly_text(poly, gens: tuple) -> str:
    if not poly:
        return "0"
    pieces = []
    for monom, coeff in poly.terms():
        c = int(coeff)
        factors = [_power_text(g, e) for g, e in zip(gens, monom) if e]
        if not factors:
            body = str(abs(c))
        elif abs(c) == 1:
            body = "*".join(factors)
        else:
            body = f"{abs(c)}*" + "*".join(factors)
        pieces.append(("-" if c < 0 else "+", body))
    sign, body = pieces[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out


def _expr_str(e: Expr) -> str:
    top = poly_text(e.num, e.gens)
    if _is_one(e.den):
        return top
    if len(e.num) > 1:
        top = f"({top})"
    bottom = poly_text(e.den, e.gens)
    if len(e.den) > 1:
        bottom = f"({bottom})"
    else:
        (monom, coeff), = e.den.terms()
        nfactors = sum(1 for k in monom if k) + (1 if coeff != 1 else 0)
        if nfactors > 1:
            bottom = f"({bottom})"
    return f"{top}/{bottom}"


_ring_zero = _ring(())
ZERO = Expr((), _ring_zero.zero, _ring_zero.one)
ONE = Expr((), _ring_zero.one, _ring_zero.one)


def symbols(names: str | Iterable[str]) -> tuple[Symbol, ...]:
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    return tuple(Symbol(n) for n in names)


@dataclass(frozen=True)
class VariableContext:
    """Coordinates, constant parameters and declared function names.

    Lie derivatives and Jacobians run over ``variables`` only; ``params`` are
    treated as constants.
    """

    variables: tuple[Symbol, ...]
    params: tuple[Symbol, ...] = ()
    functions: tuple[tuple[str, int], ...] = field(default=())

    @classmethod
    def create(cls, variables, params=(), functions: Mapping[str, int] | None = None):
        variables = symbols(variables) if isinstance(variables, str) else tuple(
            v if isinstance(v, Symbol) else Symbol(v) for v in variables)
        params = symbols(params) if isinstance(params, str) else tuple(
            p if isinstance(p, Symbol) else Symbol(p) for p in params)
        funcs = tuple(sorted((functions or {}).items()))
        names = [s.name for s in variables + params] + [f for f, _ in funcs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate names in context: {names}")
        return cls(variables, params, funcs)

    @property
    def dim(self) -> int:
        return len(self.variables)

    @property
    def function_arities(self) -> dict[str, int]:
        return dict(self.functions)

    def __getitem__(self, name: str) -> Symbol:
        s = Symbol(name)
        if s not in self.variables and s not in self.params:
            raise UnknownSymbol(name)
        return s

    def symbol(self, name: str) -> Symbol:
        return self[name]

    def index(self, v: Symbol) -> int:
        return self.variables.index(v)

    def knows(self, name: str) -> bool:
        s = Symbol(name)
        return s in self.variables or s in self.params

    def parse(self, text: str) -> Expr:
        from .parse import parse

        return parse(text, self)

    def with_functions(self, functions: Mapping[str, int]) -> "VariableContext":
        merged = dict(self.functions)
        merged.update(functions)
        return VariableContext.create(self.variables, self.params, merged)

    def check(self, e: Expr) -> None:
        """Raise ContextMismatch if ``e`` uses names this context does not declare."""
        allowed = set(self.variables) | set(self.params)
        stray = e.free_symbols - allowed
        if stray:
            raise ContextMismatch(
                f"{e} references {sorted(s.name for s in stray)} outside the context")
        arities = dict(self.functions)
        for a in e.all_atoms():
            if a.name in BUILTIN_FUNCTIONS:
                continue
            if arities.get(a.name) != a.arity:
                raise ContextMismatch(f"function {a.name}/{a.arity} is not declared")


def equals_zero(e: Expr) -> bool:
    """Exact zero test: true iff the canonical numerator vanishes."""
    return not as_expr(e).num


def differentiate(e: Expr, v: Symbol) -> Expr:
    return as_expr(e).diff(v)


def substitute(e: Expr, bindings: Mapping) -> Expr:
    return as_expr(e).subs(bindings)


def poly_gcd(a: Expr, b: Expr) -> Expr:
    """gcd of two polynomial Exprs (positive leading coefficient)."""
    if not (a.is_polynomial and b.is_polynomial):
        raise ValueError("poly_gcd needs polynomial arguments")
    if a.is_zero:
        return b if not b.num or b.num.LC > 0 else -b
    gens, ring, ((na, _), (nb, _)) = common_ring([a, b])
    g = na.gcd(nb)
    if g.LC < 0:
        g = -g
    return from_polys(gens, g)


def poly_lcm(a: Expr, b: Expr) -> Expr:
    g = poly_gcd(a, b)
    out = a * b / g
    return -out if out.num and out.num.LC < 0 else out
