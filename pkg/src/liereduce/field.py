"""Vector fields, Lie derivatives and brackets, Jacobians and a fixed-step RK4 integrator.

Bracket convention, used everywhere in the package::

    [g, f] = Df . g - Dg . f,   so that   X_[g,f] = X_g X_f - X_f X_g.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ContextMismatch, EvalDomainError
from .expr import ZERO, Expr, Symbol, VariableContext, as_expr, compile_expr
from .linalg import ExprMatrix


@dataclass(frozen=True)
class VectorField:
    ctx: VariableContext
    components: tuple

    def __post_init__(self):
        comps = tuple(as_expr(c) for c in self.components)
        if len(comps) != self.ctx.dim:
            raise ContextMismatch(
                f"field has {len(comps)} components but the context has {self.ctx.dim} variables")
        object.__setattr__(self, "components", comps)

    @classmethod
    def parse(cls, ctx: VariableContext, texts: Sequence[str] | str) -> "VectorField":
        if isinstance(texts, str):
            texts = split_top_level(texts)
        return cls(ctx, tuple(ctx.parse(t) for t in texts))

    @classmethod
    def zero(cls, ctx: VariableContext) -> "VectorField":
        return cls(ctx, (ZERO,) * ctx.dim)

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    def _check(self, other: "VectorField"):
        if self.ctx.variables != other.ctx.variables:
            raise ContextMismatch("vector fields live on different coordinates")

    def __add__(self, other: "VectorField") -> "VectorField":
        self._check(other)
        return VectorField(self.ctx, tuple(a + b for a, b in zip(self, other)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        self._check(other)
        return VectorField(self.ctx, tuple(a - b for a, b in zip(self, other)))

    def __neg__(self) -> "VectorField":
        return VectorField(self.ctx, tuple(-a for a in self))

    def scale(self, s) -> "VectorField":
        s = as_expr(s)
        return VectorField(self.ctx, tuple(s * a for a in self))

    def __rmul__(self, s):
        return self.scale(s)

    def __truediv__(self, s):
        s = as_expr(s)
        return VectorField(self.ctx, tuple(a / s for a in self))

    def subs(self, bindings: Mapping) -> "VectorField":
        return VectorField(self.ctx, tuple(c.subs(bindings) for c in self))

    def lie(self, e) -> Expr:
        return lie_derivative(self, e)

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.components) + ")"

    def __repr__(self):
        return f"VectorField{self}"


def split_top_level(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def lie_derivative(f: VectorField, e) -> Expr:
    """X_f(e) = sum_i f_i de/dx_i."""
    e = as_expr(e)
    out = ZERO
    for v, fi in zip(f.ctx.variables, f.components):
        if fi.is_zero:
            continue
        d = e.diff(v)
        if not d.is_zero:
            out = out + fi * d
    return out


def lie_bracket(g: VectorField, f: VectorField) -> VectorField:
    """[g, f] = Df.g - Dg.f, componentwise X_g(f_i) - X_f(g_i)."""
    g._check(f)
    return VectorField(
        f.ctx, tuple(lie_derivative(g, fi) - lie_derivative(f, gi) for fi, gi in zip(f, g)))


def iterated_derivative(f: VectorField, e, k: int) -> Expr:
    if k < 0:
        raise ValueError("k must be non-negative")
    e = as_expr(e)
    for _ in range(k):
        e = lie_derivative(f, e)
    return e


def jacobian(psi: Sequence, variables: Sequence[Symbol] | VariableContext) -> ExprMatrix:
    """r x n matrix of partial derivatives of ``psi`` with respect to ``variables``."""
    if isinstance(variables, VariableContext):
        variables = variables.variables
    psi = [as_expr(p) for p in psi]
    return ExprMatrix(len(psi), len(variables), [p.diff(v) for p in psi for v in variables])


def field_matrix(fields: Sequence[VectorField]) -> ExprMatrix:
    """n x s matrix whose columns are the given fields."""
    return ExprMatrix.from_columns([f.components for f in fields])


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def compile_field(f: VectorField, atom_impls=None, param_values: Mapping | None = None):
    """Callable mapping a state array to the field value (params bound to constants)."""
    comps = f.components
    symbols = list(f.ctx.variables)
    values = []
    for k, v in (param_values or {}).items():
        symbols.append(k if isinstance(k, Symbol) else Symbol(str(k)))
        values.append(float(v))
    compiled = [compile_expr(c, symbols, atom_impls) for c in comps]
    extra = tuple(values)

    def rhs(x):
        point = tuple(x) + extra
        return np.array([c(point) for c in compiled])

    return rhs


def integrate_rk4(f: VectorField, x0, t_end: float, step: float, atom_impls=None,
                  param_values: Mapping | None = None) -> Trajectory:
    """Classical fixed-step RK4 from t=0 to ``t_end``.

    The step is shrunk to ``t_end / n`` for the smallest integer n with
    ``t_end / n <= step``; state updates use compensated summation.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    n = max(1, int(np.ceil(t_end / step - 1e-9)))
    h = t_end / n
    rhs = compile_field(f, atom_impls, param_values)
    x = np.asarray(x0, dtype=float).copy()
    comp = np.zeros_like(x)
    times = np.empty(n + 1)
    states = np.empty((n + 1, x.size))
    times[0] = 0.0
    states[0] = x
    for i in range(n):
        t = i * h
        try:
            k1 = rhs(x)
            k2 = rhs(x + 0.5 * h * k1)
            k3 = rhs(x + 0.5 * h * k2)
            k4 = rhs(x + h * k3)
        except EvalDomainError as exc:
            raise EvalDomainError(str(exc), time=t) from exc
        # Kahan-compensated x += h/6 (k1 + 2k2 + 2k3 + k4)
        y = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4) - comp
        s = x + y
        comp = (s - x) - y
        x = s
        times[i + 1] = (i + 1) * h
        states[i + 1] = x
    return Trajectory(times, states)
