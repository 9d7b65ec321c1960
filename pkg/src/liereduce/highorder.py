"""Higher-order scalar equations as autonomous first-order systems.

Coordinates: ``x0`` is time and ``x_{k+1}`` stands for the k-th derivative.
Raising the order of a system uses new coordinates ``y0 = x0`` and
``y_k = X_Q^(k-1)(phi)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import (
    AnsatzExhausted,
    ContextMismatch,
    DependenceViolation,
    DependentDerivatives,
    InversionUnsupported,
    PreconditionFailed,
    ZeroPivot,
    ZeroTimeComponent,
)
from .expr import ONE, ZERO, Expr, Symbol, VariableContext, as_expr
from .field import VectorField, jacobian, lie_bracket, lie_derivative
from .linalg import rank_generic
from .reduce import (
    InvolutionSystem,
    OrbitalReduction,
    ReductionMap,
    build_involution,
    check_orbital_symmetry,
    construct_reducible,
    express_in_invariants,
    module_decompose,
    orbital_reduce,
)


@dataclass(frozen=True)
class HigherOrderEq:
    """x_m' = rhs(x_0, ..., x_m) with x_0 = t, written in ``ctx``'s variables."""

    order: int
    rhs: Expr
    ctx: VariableContext

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be at least 1")
        if self.ctx.dim != self.order + 1:
            raise ContextMismatch(f"an order-{self.order} equation needs {self.order + 1} variables")
        object.__setattr__(self, "rhs", as_expr(self.rhs))
        self.ctx.check(self.rhs)

    @classmethod
    def create(cls, order: int, rhs, prefix: str = "x", params=(), functions=None) -> "HigherOrderEq":
        ctx = VariableContext.create([f"{prefix}{k}" for k in range(order + 1)], params, functions)
        if isinstance(rhs, str):
            rhs = ctx.parse(rhs)
        return cls(order, rhs, ctx)


@dataclass(frozen=True)
class CoordinateChange:
    forward: tuple  # y_k as Exprs in the source coordinates
    inverse: tuple | None  # x_k as Exprs in the target coordinates
    source: VariableContext
    target: VariableContext

    def to_target(self, e) -> Expr:
        """Rewrite an Expr in source coordinates through the inverse."""
        if self.inverse is None:
            raise InversionUnsupported("no inverse coordinate change available")
        return as_expr(e).subs(dict(zip(self.source.variables, self.inverse)))

    def to_source(self, e) -> Expr:
        return as_expr(e).subs(dict(zip(self.target.variables, self.forward)))

    def push_field(self, g: VectorField) -> VectorField:
        """The field g written in target coordinates (components X_g(y_k))."""
        return VectorField(self.target, tuple(self.to_target(lie_derivative(g, y)) for y in self.forward))


@dataclass
class PipelineResult:
    f_hat: VectorField
    H: VectorField
    equation: HigherOrderEq
    change: CoordinateChange
    generators: tuple  # in target coordinates
    invariants: tuple  # in target coordinates
    reduction: OrbitalReduction | None
    reduction_target: OrbitalReduction | None


# conversions ------------------------------------------------------------------

def to_first_order(eq: HigherOrderEq) -> VectorField:
    v = eq.ctx.variables
    comps = [ONE] + [Expr.from_generator(v[k + 1]) for k in range(1, eq.order)] + [eq.rhs]
    return VectorField(eq.ctx, tuple(comps))


def autonomize(q: Sequence, time_var, ctx: VariableContext) -> VectorField:
    """Prepend ``time_var`` with derivative 1 to the states of ``ctx``."""
    t = time_var if isinstance(time_var, Symbol) else Symbol(str(time_var))
    if t in ctx.variables:
        raise ContextMismatch(f"{t} is already a state variable")
    q = [as_expr(c) for c in q]
    full = VariableContext.create((t,) + ctx.variables, ctx.params, dict(ctx.functions))
    return VectorField(full, tuple([ONE] + q))


def orbit_equations(f: VectorField, pivot: int = 0) -> list[Expr]:
    p = f.components[pivot]
    if p.is_zero:
        raise ZeroPivot(f"component {pivot} vanishes identically")
    return [c / p for k, c in enumerate(f.components) if k != pivot]


# raising the order -------------------------------------------------------------

def _ladder(ctx: VariableContext) -> list[Expr]:
    xs = [Expr.from_generator(v) for v in ctx.variables[1:]]
    out = list(xs)
    weights = ((1, 2, 3, 5, 7, 11), (3, -1, 4, -1, 5, -9), (2, 7, -1, 8, -2, 8))
    for w in weights:
        out.append(sum((c * x for c, x in zip(w * (len(xs) // len(w) + 1), xs)), ZERO))
    return out


def _iterates(Q: VectorField, phi: Expr, count: int) -> list[Expr]:
    out = [phi]
    for _ in range(count - 1):
        out.append(lie_derivative(Q, out[-1]))
    return out


def _independent_prefix(iterates: list[Expr], ctx: VariableContext) -> int:
    """Largest l such that the first l iterates are independent in the non-time variables."""
    space = ctx.variables[1:]
    ell = 0
    for k in range(1, len(iterates) + 1):
        if rank_generic(jacobian(iterates[:k], space)) < k:
            break
        ell = k
    return ell


def _target_context(ctx: VariableContext, m: int, prefix: str) -> VariableContext:
    names = [f"{prefix}{k}" for k in range(m + 1)]
    clash = [n for n in names if ctx.knows(n) and Symbol(n) not in ctx.variables]
    if clash:
        raise ContextMismatch(f"target names {clash} collide with parameters")
    return VariableContext.create(names, ctx.params, dict(ctx.functions))


def _isolate(eq: Expr, v: Symbol) -> Expr | None:
    """Solve eq = 0 for v when v occurs with degree at most one and outside atom arguments."""
    num = eq.numerator()
    if v not in num.gens or num.degree(v) != 1:
        return None
    if any(v in a.free_symbols for a in num.atoms):
        return None
    c1 = num.diff(v)
    if c1.is_zero:
        return None
    c0 = num.subs({v: ZERO})
    return -c0 / c1


def _invert(forward: list[Expr], src: VariableContext, tgt: VariableContext) -> tuple[Expr, ...]:
    """Triangular elimination of x_1..x_m from y_k = forward_k; x_0 = y_0."""
    x = src.variables
    y = [Expr.from_generator(s) for s in tgt.variables]
    time = {x[0]: y[0]}
    pending = [forward[k].subs(time) - y[k] for k in range(1, len(forward))]
    solved: dict[Symbol, Expr] = {}
    unknown = list(x[1:])
    while unknown:
        progress = False
        for i, eq in enumerate(pending):
            for v in unknown:
                sol = _isolate(eq, v)
                if sol is None:
                    continue
                sub = {v: sol}
                solved = {k: e.subs(sub) for k, e in solved.items()}
                solved[v] = sol
                pending = [p.subs(sub) for j, p in enumerate(pending) if j != i]
                unknown.remove(v)
                progress = True
                break
            if progress:
                break
        if not progress:
            implicit = [str(p) + " = 0" for p in pending]
            raise InversionUnsupported(
                f"cannot isolate {', '.join(v.name for v in unknown)}", implicit)
    return (y[0],) + tuple(solved[v] for v in x[1:])


def raise_order(Q: VectorField, phi=None, prefix: str = "y") -> tuple[HigherOrderEq, CoordinateChange]:
    """Order-m equation for y = phi along the autonomized field Q of dimension m+1."""
    if Q.components[0] != ONE:
        raise PreconditionFailed("the field must be autonomized (first component 1)")
    m = Q.ctx.dim - 1
    if m < 1:
        raise PreconditionFailed("need at least one state variable")
    candidates = [as_expr(phi) if not isinstance(phi, str) else Q.ctx.parse(phi)] if phi is not None \
        else _ladder(Q.ctx)
    first_ell = None
    for cand in candidates:
        its = _iterates(Q, cand, m + 1)
        ell = _independent_prefix(its[:m], Q.ctx)
        if ell == m:
            break
        if first_ell is None:
            first_ell = ell
    else:
        raise DependentDerivatives(first_ell)
    tgt = _target_context(Q.ctx, m, prefix)
    forward = [Expr.from_generator(Q.ctx.variables[0])] + its[:m]
    inverse = _invert(forward, Q.ctx, tgt)
    change = CoordinateChange(tuple(forward), inverse, Q.ctx, tgt)
    for k, yk in enumerate(tgt.variables):
        if change.to_target(forward[k]) != Expr.from_generator(yk):
            raise AssertionError(f"coordinate change does not round-trip in component {k}")
    rhs = change.to_target(its[m])
    return HigherOrderEq(m, rhs, tgt), change


def exceptional_reduce(Q: VectorField, phi, ell: int | None = None, prefix: str = "y",
                       degree_bound: int | None = None) -> HigherOrderEq:
    """Order-ell equation when X_Q^ell(phi) depends on time and the first ell iterates."""
    phi = Q.ctx.parse(phi) if isinstance(phi, str) else as_expr(phi)
    m = Q.ctx.dim - 1
    if ell is None:
        ell = _independent_prefix(_iterates(Q, phi, m), Q.ctx)
        if ell == m:
            raise PreconditionFailed("the iterated derivatives are independent; use raise_order")
    if ell < 1:
        raise PreconditionFailed("phi must be non-constant")
    its = _iterates(Q, phi, ell + 1)
    names = [f"{prefix}{k}" for k in range(ell + 1)]
    Psi = ReductionMap.create(Q.ctx, [Expr.from_generator(Q.ctx.variables[0])] + its[:ell], names)
    rhs = express_in_invariants(its[ell], Psi, degree_bound)
    if rhs is None:
        raise AnsatzExhausted(f"X^{ell}(phi) = {its[ell]} has no rational form within the degree bound")
    return HigherOrderEq(ell, rhs, _target_context(Q.ctx, ell, prefix))


# prolongation -------------------------------------------------------------------

def _jet_context(m: int, ctx: VariableContext | None) -> VariableContext:
    if ctx is not None:
        if ctx.dim != m + 1:
            raise ContextMismatch(f"prolongation to order {m} needs {m + 1} variables")
        return ctx
    return VariableContext.create([f"x{k}" for k in range(m + 1)])


def _check_depends(e: Expr, allowed: int, ctx: VariableContext, what: str):
    bad = [v.name for v in ctx.variables[allowed + 1:] if e.depends_on(v)]
    if bad:
        raise DependenceViolation(f"{what} must not depend on {', '.join(bad)}")


def _total(e: Expr, k: int, ctx: VariableContext) -> Expr:
    """Truncated total derivative D_k = d0 + sum_{j<=k} x_{j+1} d_j."""
    x = ctx.variables
    out = e.diff(x[0])
    for j in range(1, k + 1):
        d = e.diff(x[j])
        if not d.is_zero:
            out = out + Expr.from_generator(x[j + 1]) * d
    return out


def lambda_prolong(g0, g1, lam, m: int, ctx: VariableContext | None = None) -> tuple[VectorField, Expr]:
    """Prolong (g0, g1) to order m along the lambda ladder; returns the field and mu."""
    if m < 1:
        raise ValueError("m must be at least 1")
    ctx = _jet_context(m, ctx)
    parse = ctx.parse
    g0, g1, lam = (parse(e) if isinstance(e, str) else as_expr(e) for e in (g0, g1, lam))
    _check_depends(g0, 1, ctx, "g0")
    _check_depends(g1, 1, ctx, "g1")
    _check_depends(lam, min(2, m), ctx, "lambda")
    x = ctx.variables
    if m == 1:
        mu = -(g0.diff(x[0])) - lam * g0
        return VectorField(ctx, (g0, g1)), mu
    mu = -_total(g0, 1, ctx) - lam * g0
    comps = [g0, g1]
    for k in range(1, m):
        gk = comps[-1]
        comps.append(_total(gk, k, ctx) + mu * Expr.from_generator(x[k + 1]) + lam * gk)
    return VectorField(ctx, tuple(comps)), mu


def point_prolong(g0, g1, m: int, ctx: VariableContext | None = None) -> tuple[VectorField, Expr]:
    return lambda_prolong(g0, g1, ZERO, m, ctx)


# construction pipeline -------------------------------------------------------------

def construct_higher_order(f: VectorField, S: InvolutionSystem | Sequence[VectorField], coeffs: Sequence,
                           phi=None, invariants: ReductionMap | None = None, prefix: str = "y",
                           degree_bound: int | None = None) -> PipelineResult:
    """Orbitally reducible higher-order equation built from an orbitally symmetric seed f."""
    if not isinstance(S, InvolutionSystem):
        S = build_involution(S, f.ctx)
    f_hat = construct_reducible(f, S, coeffs, orbital=True)
    t = f_hat.components[0]
    if t.is_zero:
        raise ZeroTimeComponent("the time component of the constructed field vanishes")
    H = f_hat / t
    eq, change = raise_order(H, phi, prefix)
    gens_y = tuple(change.push_field(g) for g in S.generators)
    reduction = reduction_y = None
    invs_y: tuple = ()
    if invariants is not None:
        invs_y = tuple(change.to_target(p) for p in invariants.invariants)
        reduction = orbital_reduce(H, invariants, S, degree_bound=degree_bound)
        Hy = to_first_order(eq)
        Sy = build_involution(gens_y, eq.ctx)
        Psi_y = ReductionMap.create(eq.ctx, invs_y, invariants.names)
        reduction_y = orbital_reduce(Hy, Psi_y, Sy, degree_bound=degree_bound, search_mu=False)
        if reduction is not None and reduction_y is not None:
            if reduction.orbit_equations != reduction_y.orbit_equations:
                raise AssertionError("orbit equations differ between the two coordinate systems")
    return PipelineResult(f_hat, H, eq, change, gens_y, invs_y, reduction, reduction_y)


def lambda_by_decomposition(H: VectorField, g: VectorField) -> Expr | None:
    """Coefficient of g when [g, H] is decomposed in the module (H, g)."""
    S = InvolutionSystem(g.ctx, (g,), {}, 1)
    dec = module_decompose(lie_bracket(g, H), S, adjoin_f=H)
    return None if dec is None else dec.module_coefficients[0]


def compute_lambda(f: VectorField, g: VectorField, nu, change: CoordinateChange,
                   cross_check: bool = True) -> Expr:
    """lambda = (X_g(nu) - alpha nu) / (1 + nu g_0), rewritten in target coordinates."""
    nu = f.ctx.parse(nu) if isinstance(nu, str) else as_expr(nu)
    alpha = check_orbital_symmetry(f, g)
    if alpha is None:
        raise PreconditionFailed("g is not an orbital symmetry of f")
    if change.inverse is None:
        raise InversionUnsupported("compute_lambda needs the inverse coordinate change")
    lam_x = (lie_derivative(g, nu) - alpha * nu) / (ONE + nu * g.components[0])
    lam = change.to_target(lam_x)
    if cross_check:
        f_hat = f + g.scale(nu)
        H = f_hat / f_hat.components[0]
        brute = lambda_by_decomposition(change.push_field(H), change.push_field(g))
        if brute is None or brute != lam:
            raise AssertionError(f"lambda formula {lam} disagrees with the bracket decomposition {brute}")
    return lam
