"""Decision procedures for symmetry, involution and (orbital) reducibility.

All identities are decided exactly over the Expr field.  Expressing a
quantity as a function of given invariants is the only heuristic step: a
bounded-degree rational ansatz whose failure never turns into a negative
verdict.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import (
    ContextMismatch,
    DegenerateDirection,
    NotInInvolution,
    NotOrbitallyReducible,
    PreconditionFailed,
    RankDeficient,
)
from .expr import ONE, ZERO, Expr, Symbol, VariableContext, as_expr, common_ring, from_polys, make_atom
from .field import VectorField, field_matrix, jacobian, lie_bracket, lie_derivative
from .linalg import ExprMatrix, det, kernel_basis, rank_generic, rational_nullspace, solve_linear

DEFAULT_DEGREE_BOUND = 4


def default_degree_bound() -> int:
    raw = os.environ.get("LIEREDUCE_DEGREE_BOUND")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"LIEREDUCE_DEGREE_BOUND must be an integer, got {raw!r}") from None
        if value < 1:
            raise ValueError("LIEREDUCE_DEGREE_BOUND must be at least 1")
        return value
    return DEFAULT_DEGREE_BOUND


# data ---------------------------------------------------------------------

@dataclass
class Verdict:
    """Boolean outcome with human-readable witnesses."""

    ok: bool
    witnesses: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class InvolutionSystem:
    ctx: VariableContext
    generators: tuple
    closure_coeffs: dict  # (i, j) -> tuple of Exprs, i < j
    generic_rank: int

    @property
    def size(self) -> int:
        return len(self.generators)

    def matrix(self) -> ExprMatrix:
        return field_matrix(self.generators)

    def __hash__(self):
        return hash((self.ctx, self.generators))


@dataclass(frozen=True)
class ReductionMap:
    ctx: VariableContext
    invariants: tuple
    generic_rank: int
    names: tuple

    @classmethod
    def create(cls, ctx: VariableContext, invariants: Sequence, names: Sequence[str] | None = None):
        invariants = tuple(as_expr(p) for p in invariants)
        if names is None:
            names = tuple(f"w{i + 1}" for i in range(len(invariants)))
        names = tuple(names)
        if len(names) != len(invariants):
            raise ValueError("one name per invariant is required")
        clash = {n for n in names if ctx.knows(n)}
        if clash:
            raise ContextMismatch(f"invariant names {sorted(clash)} collide with context symbols")
        rank = rank_generic(jacobian(invariants, ctx)) if invariants else 0
        return cls(ctx, invariants, rank, names)

    @property
    def symbols(self) -> tuple[Symbol, ...]:
        return tuple(Symbol(n) for n in self.names)

    def __len__(self):
        return len(self.invariants)

    def reduced_context(self) -> VariableContext:
        return VariableContext.create(self.symbols, self.ctx.params, dict(self.ctx.functions))

    def pullback(self, e) -> Expr:
        """Substitute the invariants for the reduced symbols in ``e``."""
        return as_expr(e).subs(dict(zip(self.symbols, self.invariants)))


@dataclass
class Decomposition:
    f_coefficient: Expr | None
    module_coefficients: tuple
    residual_zero: bool


@dataclass
class ReduceReport:
    reducible: bool
    h: list | None
    witnesses: list[str] = field(default_factory=list)
    residuals: list = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    trivial: bool = False

    def __bool__(self):
        return self.reducible


@dataclass
class OrbitalReduction:
    orbit_equations: list  # first entry is 1
    mu: Expr | None
    reduced: list | None  # mu * D(Psi) f expressed in the invariants
    d: list  # X_f(psi_j) in original coordinates


@dataclass(frozen=True)
class GroupData:
    ctx: VariableContext
    generators: tuple
    invariant_polys: tuple
    gradients: tuple
    theta: Expr

    @classmethod
    def build(cls, ctx: VariableContext, generators: Sequence[VectorField], invariant_polys: Sequence,
              gradients: Sequence[VectorField] | None = None) -> "GroupData":
        generators = tuple(generators)
        sigmas = tuple(as_expr(s) for s in invariant_polys)
        if gradients is None:
            gradients = tuple(VectorField(ctx, tuple(s.diff(v) for v in ctx.variables)) for s in sigmas)
        gradients = tuple(gradients)
        for i, g in enumerate(generators):
            if not _is_linear(g):
                raise PreconditionFailed(f"generator {i + 1} is not a linear field", i)
            for j, s in enumerate(sigmas):
                if not lie_derivative(g, s).is_zero:
                    raise PreconditionFailed(f"invariant {j + 1} is not annihilated by generator {i + 1}", i)
        if len(generators) + len(gradients) != ctx.dim:
            raise PreconditionFailed(
                f"need {ctx.dim} columns, got {len(generators)} generators and {len(gradients)} gradients")
        theta = det(field_matrix(generators + gradients))
        if theta.is_zero:
            raise PreconditionFailed("theta vanishes identically")
        return cls(ctx, generators, sigmas, gradients, theta)


def _is_linear(g: VectorField) -> bool:
    for c in g.components:
        if not c.is_polynomial or c.atoms:
            return False
        euler = sum((v * c.diff(v) for v in g.ctx.variables), ZERO)
        if euler != c:
            return False
    return True


# basic criteria -----------------------------------------------------------

def check_symmetry(f: VectorField, g: VectorField) -> bool:
    return lie_bracket(g, f).is_zero


def check_orbital_symmetry(f: VectorField, g: VectorField) -> Expr | None:
    """alpha with [g, f] = alpha f, or None."""
    br = lie_bracket(g, f)
    if br.is_zero:
        return ZERO
    sol = solve_linear(field_matrix([f]), br.components)
    return None if sol is None else sol[0]


def build_involution(G: Sequence[VectorField], ctx: VariableContext | None = None) -> InvolutionSystem:
    G = tuple(G)
    if ctx is None:
        if not G:
            raise ValueError("an empty system needs an explicit context")
        ctx = G[0].ctx
    for g in G:
        if g.ctx.variables != ctx.variables:
            raise ContextMismatch("generators live on different coordinates")
    coeffs = {}
    if G:
        M = field_matrix(G)
        for i, j in itertools.combinations(range(len(G)), 2):
            br = lie_bracket(G[i], G[j])
            if br.is_zero:
                coeffs[(i, j)] = (ZERO,) * len(G)
                continue
            sol = solve_linear(M, br.components)
            if sol is None:
                raise NotInInvolution((i, j), br)
            coeffs[(i, j)] = sol
        rank = rank_generic(M)
    else:
        rank = 0
    return InvolutionSystem(ctx, G, coeffs, rank)


def check_common_invariants(S: InvolutionSystem, Psi: ReductionMap) -> Verdict:
    witnesses = []
    for i, g in enumerate(S.generators):
        for j, psi in enumerate(Psi.invariants):
            r = lie_derivative(g, psi)
            if not r.is_zero:
                witnesses.append(f"X_g{i + 1}({Psi.names[j]}) = {r}")
    expected = S.ctx.dim - S.generic_rank
    if Psi.generic_rank != expected:
        witnesses.append(f"invariant rank {Psi.generic_rank}, expected {expected}")
    return Verdict(not witnesses, witnesses)


def module_decompose(v: VectorField, S: InvolutionSystem,
                     adjoin_f: VectorField | None = None) -> Decomposition | None:
    """Coefficients of ``v`` in the columns (f?, g_1, ..., g_s)."""
    cols = ([adjoin_f] if adjoin_f is not None else []) + list(S.generators)
    if not cols:
        return Decomposition(None, (), True) if v.is_zero else None
    sol = solve_linear(field_matrix(cols), v.components)
    if sol is None:
        return None
    recombined = VectorField.zero(v.ctx)
    for c, col in zip(sol, cols):
        recombined = recombined + col.scale(c)
    alpha = sol[0] if adjoin_f is not None else None
    rest = tuple(sol[1:]) if adjoin_f is not None else tuple(sol)
    return Decomposition(alpha, rest, (recombined - v).is_zero)


# expressing quantities in invariants --------------------------------------

def _monomials(k: int, d: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(d + 1):
        for combo in itertools.combinations_with_replacement(range(k), total):
            m = [0] * k
            for i in combo:
                m[i] += 1
            out.append(tuple(m))
    return out


class _Ansatz:
    """Linear ansatz e * B(sources) = A(sources) with cached basis products."""

    def __init__(self, e: Expr, sources: list[Expr]):
        gens, ring, pairs = common_ring([e] + sources)
        self.ring = ring
        self.n, self.m = pairs[0]
        self.P = [p for p, _ in pairs[1:]]
        self.Q = [q for _, q in pairs[1:]]
        self.k = len(sources)
        self._pow: dict = {}
        self._basis: dict = {}
        self._qprod: dict = {}

    def _power(self, which: str, i: int, e: int):
        key = (which, i, e)
        got = self._pow.get(key)
        if got is None:
            base = self.P[i] if which == "p" else self.Q[i]
            got = self._pow[key] = base ** e
        return got

    def basis(self, alpha: tuple[int, ...], d: int):
        """prod p_i^alpha_i q_i^(d - alpha_i)."""
        key = (alpha, d)
        got = self._basis.get(key)
        if got is None:
            got = self.ring.one
            for i, a in enumerate(alpha):
                if a:
                    got = got * self._power("p", i, a)
                if d - a:
                    got = got * self._power("q", i, d - a)
            self._basis[key] = got
        return got

    def qprod(self, d: int):
        got = self._qprod.get(d)
        if got is None:
            got = self.ring.one
            for i in range(self.k):
                got = got * self._power("q", i, d)
            self._qprod[d] = got
        return got

    def solve(self, dn: int, dd: int):
        """Nullspace vectors (a, b) for numerator degree dn and denominator degree dd."""
        mons_a = _monomials(self.k, dn)
        mons_b = _monomials(self.k, dd)
        left = self.m * self.qprod(dd)
        right = self.n * self.qprod(dn)
        rows: dict = {}
        col = 0
        for alpha in mons_a:
            for monom, c in (left * self.basis(alpha, dn)).items():
                rows.setdefault(monom, {})[col] = -int(c)
            col += 1
        for beta in mons_b:
            for monom, c in (right * self.basis(beta, dd)).items():
                row = rows.setdefault(monom, {})
                row[col] = row.get(col, 0) + int(c)
            col += 1
        null = rational_nullspace(list(rows.values()), col)
        return mons_a, mons_b, null


def _poly_in(images: Sequence[Expr], mons, coeffs) -> Expr:
    out = ZERO
    for alpha, c in zip(mons, coeffs):
        if c == 0:
            continue
        term = Expr.const(c)
        for img, a in zip(images, alpha):
            if a:
                term = term * img ** a
        out = out + term
    return out


def express_in_invariants(e, Psi: ReductionMap, degree_bound: int | None = None) -> Expr | None:
    """Rational R in the reduced symbols with R(psi) = e, searched up to a degree bound.

    Atoms of ``e`` whose arguments are expressible become extra ansatz
    variables, so gamma(x2) with psi2 = x2 maps to gamma(w2).  None means
    nothing was found within the bound.
    """
    e = as_expr(e)
    bound = default_degree_bound() if degree_bound is None else degree_bound
    if bound < 1:
        raise ValueError("degree_bound must be at least 1")
    wexpr = [Expr.from_generator(s) for s in Psi.symbols]
    if e.is_constant:
        return e
    for psi, w in zip(Psi.invariants, wexpr):
        if e == psi:
            return w
    covered = set()
    psi_atoms = set()
    for psi in Psi.invariants:
        covered |= psi.free_symbols
        psi_atoms |= set(psi.atoms)
    for g in e.gens:
        if isinstance(g, Symbol) and g not in covered:
            return None
    sources = list(Psi.invariants)
    images = list(wexpr)
    for a in e.atoms:
        if a in psi_atoms:
            continue
        args = []
        for arg in a.args:
            img = express_in_invariants(arg, Psi, bound)
            if img is None:
                return None
            args.append(img)
        sources.append(Expr.from_generator(a))
        images.append(make_atom(a.name, a.orders, args))

    ansatz = _Ansatz(e, sources)
    for total in range(2 * bound + 1):
        for dd in range(total + 1):
            dn = total - dd
            if dn > bound or dd > bound:
                continue
            mons_a, mons_b, null = ansatz.solve(dn, dd)
            for vec in null:
                a, b = vec[:len(mons_a)], vec[len(mons_a):]
                if not any(b):
                    continue
                scale = _lcm_den(vec)
                a = [x * scale for x in a]
                b = [x * scale for x in b]
                B = _poly_in(sources, mons_b, b)
                if B.is_zero:
                    continue
                if _poly_in(sources, mons_a, a) / B != e:
                    continue
                return _poly_in(images, mons_a, a) / _poly_in(images, mons_b, b)
    return None


def _lcm_den(vec: Sequence[Fraction]) -> int:
    out = 1
    for x in vec:
        d = Fraction(x).denominator
        out = out * d // _gcd(out, d)
    return out


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


# reducibility --------------------------------------------------------------

def _is_in_module(f: VectorField, S: InvolutionSystem) -> bool:
    return f.is_zero or (S.size > 0 and module_decompose(f, S) is not None)


def check_reducible(f: VectorField, Psi: ReductionMap, S: InvolutionSystem, h: Sequence | None = None,
                    degree_bound: int | None = None) -> ReduceReport:
    pre = check_common_invariants(S, Psi)
    if not pre:
        raise PreconditionFailed("invariants are not independent common invariants: " + "; ".join(pre.witnesses))
    notes = ["completeness of the invariant set is assumed, not checked"]
    trivial = _is_in_module(f, S)
    if trivial:
        notes.append("f lies in the generator module; the reduction is trivial")
    d = [lie_derivative(f, psi) for psi in Psi.invariants]
    if h is not None:
        h = [as_expr(x) for x in h]
        if len(h) != len(d):
            raise ValueError(f"expected {len(d)} reduced components, got {len(h)}")
        residuals = [dj - Psi.pullback(hj) for dj, hj in zip(d, h)]
        witnesses = [f"component {j + 1}: residual {r}" for j, r in enumerate(residuals) if not r.is_zero]
        return ReduceReport(not witnesses, h, witnesses, residuals, notes, trivial)
    witnesses = []
    residuals = []
    for i, g in enumerate(S.generators):
        for j, dj in enumerate(d):
            r = lie_derivative(g, dj)
            residuals.append(r)
            if not r.is_zero:
                witnesses.append(f"X_g{i + 1}(X_f({Psi.names[j]})) = {r}")
    if witnesses:
        return ReduceReport(False, None, witnesses, residuals, notes, trivial)
    hs = [express_in_invariants(dj, Psi, degree_bound) for dj in d]
    if any(x is None for x in hs):
        notes.append("reducible, h implicit: no rational presentation within the degree bound")
        return ReduceReport(True, None, [], residuals, notes, trivial)
    return ReduceReport(True, hs, [], residuals, notes, trivial)


def _mu_candidates(d1: Expr, ctx: VariableContext) -> list[Expr]:
    """Time rescalings to try: 1, factors of X_f(psi_1) and coordinates, then pairwise products."""
    gens, _, ((num_p, den_p),) = common_ring([d1])
    singles: list[Expr] = [d1.denominator()]
    for poly, sign in ((den_p, 1), (num_p, -1)):
        if poly.is_ground:
            continue
        _, factors = poly.factor_list()
        for fac, mult in factors:
            fe = from_polys(gens, fac)
            for k in sorted({1, mult}):
                singles.append(fe ** (sign * k))
    singles.extend(Expr.from_generator(v) for v in ctx.variables)
    out: list[Expr] = []
    for c in singles + [a * b for a, b in itertools.combinations(singles, 2)]:
        if c != ONE and c not in out:
            out.append(c)
    out.sort(key=lambda c: (c.nterms(), len(str(c))))
    return [ONE] + out


def _scaled_reduction(mu: Expr, d: list[Expr], S: InvolutionSystem, Psi: ReductionMap,
                      bound: int | None) -> list[Expr] | None:
    scaled = [mu * dj for dj in d]
    for g in S.generators:
        if any(not lie_derivative(g, s).is_zero for s in scaled):
            return None
    out = []
    for s in scaled:
        r = express_in_invariants(s, Psi, bound)
        if r is None:
            return None
        out.append(r)
    return out


def orbital_reduce(f: VectorField, Psi: ReductionMap, S: InvolutionSystem, mu=None,
                   degree_bound: int | None = None, search_mu: bool = True) -> OrbitalReduction | None:
    """Orbit equations d psi_j / d psi_1 in the invariants, plus a full reduced system when mu is known.

    ``mu`` may be supplied; otherwise a short list of candidates built from
    the factors of X_f(psi_1) and the coordinates is tried.
    """
    d = [lie_derivative(f, psi) for psi in Psi.invariants]
    if not d:
        return OrbitalReduction([], None, None, [])
    if d[0].is_zero:
        raise DegenerateDirection(f"X_f({Psi.names[0]}) vanishes identically; reorder the invariants")
    orbit = [ONE]
    for j in range(1, len(d)):
        ratio = d[j] / d[0]
        for g in S.generators:
            w = lie_derivative(g, ratio)
            if not w.is_zero:
                raise NotOrbitallyReducible(j, ratio, w)
        r = express_in_invariants(ratio, Psi, degree_bound)
        if r is None:
            return None
        orbit.append(r)
    if mu is not None:
        mu = as_expr(mu)
        return OrbitalReduction(orbit, mu, _scaled_reduction(mu, d, S, Psi, degree_bound), d)
    if search_mu:
        for cand in _mu_candidates(d[0], f.ctx):
            red = _scaled_reduction(cand, d, S, Psi, degree_bound)
            if red is not None:
                return OrbitalReduction(orbit, cand, red, d)
    return OrbitalReduction(orbit, None, None, d)


# construction ----------------------------------------------------------------

def construct_reducible(f: VectorField, S: InvolutionSystem, coeffs: Sequence, orbital: bool = False,
                        invariants: ReductionMap | None = None) -> VectorField:
    """f* = f + sum coeffs_i g_i, post-verified against the generator module."""
    coeffs = [as_expr(c) for c in coeffs]
    if len(coeffs) != S.size:
        raise ValueError(f"expected {S.size} coefficients, got {len(coeffs)}")
    for i, g in enumerate(S.generators):
        if orbital:
            if check_orbital_symmetry(f, g) is None:
                raise PreconditionFailed(f"generator {i + 1} is not an orbital symmetry of f", i)
        elif not check_symmetry(f, g):
            raise PreconditionFailed(f"generator {i + 1} is not a symmetry of f", i)
    f_star = f
    for c, g in zip(coeffs, S.generators):
        if not c.is_zero:
            f_star = f_star + g.scale(c)
    for i, g in enumerate(S.generators):
        dec = module_decompose(lie_bracket(g, f_star), S, f_star if orbital else None)
        if dec is None or not dec.residual_zero:
            raise AssertionError(f"constructed field fails the bracket relation for generator {i + 1}")
    if invariants is not None:
        if orbital:
            if orbital_reduce(f_star, invariants, S, search_mu=False) is None:
                raise AssertionError("constructed field could not be orbitally reduced")
        elif not check_reducible(f_star, invariants, S):
            raise AssertionError("constructed field is not reducible")
    return f_star


def verify_split(f_star: VectorField, g: VectorField, rho, orbital: bool = False) -> Verdict:
    """Is f_star - rho g a symmetric (or orbitally symmetric) field for g?"""
    f = f_star - g.scale(as_expr(rho))
    br = lie_bracket(g, f)
    if not orbital:
        if br.is_zero:
            return Verdict(True)
        return Verdict(False, [f"[g, f] = {br}"])
    alpha = check_orbital_symmetry(f, g)
    if alpha is None:
        return Verdict(False, [f"[g, f] = {br} is not a multiple of f = {f}"])
    return Verdict(True, notes=[f"alpha = {alpha}"])


def kernel_involution_from_map(Psi: ReductionMap) -> InvolutionSystem:
    if Psi.generic_rank == 0:
        raise RankDeficient("the map has generic rank 0")
    ctx = Psi.ctx
    basis = kernel_basis(jacobian(Psi.invariants, ctx))
    return build_involution([VectorField(ctx, v) for v in basis], ctx)


# compact group data -----------------------------------------------------------

def group_decompose(f: VectorField, G: GroupData) -> tuple[tuple, tuple] | None:
    cols = list(G.generators) + list(G.gradients)
    sol = solve_linear(field_matrix(cols), f.components)
    if sol is None:
        return None
    s = len(G.generators)
    return tuple(sol[:s]), tuple(sol[s:])


def check_group_reducible(f: VectorField, G: GroupData, orbital: bool = False) -> Verdict:
    dec = group_decompose(f, G)
    if dec is None:
        raise PreconditionFailed("field cannot be decomposed over the group data")
    _, betas = dec
    witnesses = []
    if not orbital:
        for j, b in enumerate(betas):
            for i, B in enumerate(G.generators):
                r = lie_derivative(B, b)
                if not r.is_zero:
                    witnesses.append(f"X_B{i + 1}(beta{j + 1}) = {r}")
        return Verdict(not witnesses, witnesses)
    k = next((j for j, b in enumerate(betas) if not b.is_zero), None)
    if k is None:
        return Verdict(True, notes=["all beta vanish"])
    for j, b in enumerate(betas):
        if j == k:
            continue
        ratio = b / betas[k]
        for i, B in enumerate(G.generators):
            r = lie_derivative(B, ratio)
            if not r.is_zero:
                witnesses.append(f"X_B{i + 1}(beta{j + 1}/beta{k + 1}) = {r}")
    return Verdict(not witnesses, witnesses)
