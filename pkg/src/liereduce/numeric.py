"""Floating-point cross-checks of symbolic claims.

Sampling is seeded and reproducible.  Points where some denominator is
close to zero, or where an evaluation leaves its domain, are rejected and
redrawn.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import EvalDomainError, SamplingExhausted
from .expr import Expr, Symbol, as_expr, compile_expr, generic_impls
from .field import VectorField, integrate_rk4, jacobian
from .reduce import ReductionMap

DENOMINATOR_GUARD = 1e-6
MAX_REJECTIONS = 1000


@dataclass(frozen=True)
class CheckConfig:
    num_points: int = 20
    box: tuple[float, float] = (1.0, 2.0)
    tol_pointwise: float = 1e-8
    tol_drift: float = 1e-6
    rng_seed: int = 42
    step: float = 1e-3
    t_end: float = 1.0

    def __post_init__(self):
        if self.tol_pointwise <= 0 or self.tol_drift <= 0:
            raise ValueError("tolerances must be positive")
        if self.num_points < 1:
            raise ValueError("num_points must be positive")
        lo, hi = self.box
        if not lo < hi:
            raise ValueError("box must be a non-empty interval")


def _bindings(param_values: Mapping | None) -> tuple[list[Symbol], list[float]]:
    syms, vals = [], []
    for k, v in (param_values or {}).items():
        syms.append(k if isinstance(k, Symbol) else Symbol(str(k)))
        vals.append(float(v))
    return syms, vals


def _sample(free: Sequence[Symbol], compiled: Sequence, cfg: CheckConfig, fixed: Sequence[float]) -> Iterator:
    """Yield (point, values) pairs of accepted sample points; values are the compiled results."""
    rng = np.random.default_rng(cfg.rng_seed)
    lo, hi = cfg.box
    accepted = rejected = 0
    while accepted < cfg.num_points:
        point = tuple(rng.uniform(lo, hi, size=len(free))) + tuple(fixed)
        try:
            parts = [c.parts(point) for c in compiled]
        except (EvalDomainError, ValueError, OverflowError, ZeroDivisionError):
            parts = None
        if parts is None or any(abs(d) < DENOMINATOR_GUARD or not np.isfinite(n) for n, d in parts):
            rejected += 1
            if rejected > MAX_REJECTIONS:
                raise SamplingExhausted(f"rejected {rejected} sample points")
            continue
        accepted += 1
        yield point, [n / d for n, d in parts]


def _free_symbols(exprs: Sequence[Expr], exclude: Sequence[Symbol]) -> list[Symbol]:
    out = set()
    for e in exprs:
        out |= e.free_symbols
    return sorted(out - set(exclude), key=lambda s: s.sort_key)


def probabilistic_zero(e, cfg: CheckConfig = CheckConfig(), atom_impls: Mapping | None = None,
                       param_values: Mapping | None = None) -> bool:
    """True iff |e| < tol at every sampled point (unbound functions get generic stand-ins)."""
    e = as_expr(e)
    if e.is_constant:
        return abs(float(e.as_fraction())) < cfg.tol_pointwise
    impls = generic_impls(e, atom_impls)
    fixed_syms, fixed_vals = _bindings(param_values)
    free = _free_symbols([e], fixed_syms)
    compiled = [compile_expr(e, free + fixed_syms, impls)]
    return all(abs(vals[0]) < cfg.tol_pointwise for _, vals in _sample(free, compiled, cfg, fixed_vals))


def probabilistic_equal(lhs, rhs, cfg: CheckConfig = CheckConfig(), atom_impls: Mapping | None = None,
                        param_values: Mapping | None = None) -> bool:
    """Pointwise comparison of two Exprs evaluated separately (no symbolic subtraction)."""
    lhs, rhs = as_expr(lhs), as_expr(rhs)
    impls = generic_impls([lhs, rhs], atom_impls)
    fixed_syms, fixed_vals = _bindings(param_values)
    free = _free_symbols([lhs, rhs], fixed_syms)
    syms = free + fixed_syms
    compiled = [compile_expr(lhs, syms, impls), compile_expr(rhs, syms, impls)]
    for _, (a, b) in _sample(free, compiled, cfg, fixed_vals):
        if abs(a - b) >= cfg.tol_pointwise * max(1.0, abs(a), abs(b)):
            return False
    return True


def residual_reduction(f: VectorField, Psi: ReductionMap, h: Sequence, cfg: CheckConfig = CheckConfig(),
                       mu=None, atom_impls: Mapping | None = None,
                       param_values: Mapping | None = None) -> float:
    """max over samples of |mu(x) DPsi(x) f(x) - h(Psi(x))|_inf, each piece evaluated numerically."""
    h = [as_expr(x) for x in h]
    if len(h) != len(Psi):
        raise ValueError(f"expected {len(Psi)} reduced components, got {len(h)}")
    mu = None if mu is None else as_expr(mu)
    J = jacobian(Psi.invariants, f.ctx)
    pieces = list(J.entries) + list(f.components) + list(Psi.invariants) + ([mu] if mu is not None else [])
    impls = generic_impls(pieces + h, atom_impls)
    fixed_syms, fixed_vals = _bindings(param_values)
    free = [v for v in f.ctx.variables if v not in fixed_syms]
    extra = [p for p in _free_symbols(pieces, list(f.ctx.variables) + fixed_syms)]
    free = free + extra
    syms = free + fixed_syms
    compiled = [compile_expr(e, syms, impls) for e in pieces]
    wsyms = list(Psi.symbols) + extra + fixed_syms
    h_compiled = [compile_expr(x, wsyms, impls) for x in h]
    r, n = len(Psi), f.ctx.dim
    worst = 0.0
    for point, vals in _sample(free, compiled, cfg, fixed_vals):
        jac = np.array(vals[:r * n]).reshape(r, n)
        fx = np.array(vals[r * n:r * n + n])
        psi = vals[r * n + n:r * n + n + r]
        scale = vals[-1] if mu is not None else 1.0
        lhs = scale * (jac @ fx)
        wpoint = tuple(psi) + tuple(point[n:])
        try:
            rhs = np.array([c(wpoint) for c in h_compiled])
        except EvalDomainError:
            continue
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def drift_first_integral(f: VectorField, rho, x0: Sequence[float], cfg: CheckConfig = CheckConfig(),
                         atom_impls: Mapping | None = None, param_values: Mapping | None = None) -> float:
    """max |rho(x(t)) - rho(x(0))| along the RK4 trajectory from x0."""
    rho = as_expr(rho)
    traj = integrate_rk4(f, x0, cfg.t_end, cfg.step, atom_impls, param_values)
    syms, vals = _bindings(param_values)
    impls = generic_impls([rho] + list(f.components), atom_impls)
    c = compile_expr(rho, list(f.ctx.variables) + syms, impls)
    extra = tuple(vals)
    start = c(tuple(traj.states[0]) + extra)
    worst = 0.0
    for t, state in zip(traj.times, traj.states):
        try:
            value = c(tuple(state) + extra)
        except EvalDomainError as exc:
            raise EvalDomainError(str(exc), time=float(t)) from exc
        worst = max(worst, abs(value - start))
    return worst
