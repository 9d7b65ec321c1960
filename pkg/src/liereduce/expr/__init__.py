"""Exact symbolic expression kernel."""

from .core import (
    BUILTIN_FUNCTIONS,
    ONE,
    ZERO,
    Atom,
    Expr,
    Symbol,
    VariableContext,
    as_expr,
    common_ring,
    compose,
    differentiate,
    equals_zero,
    from_polys,
    instantiate,
    make_atom,
    poly_gcd,
    poly_lcm,
    substitute,
    symbols,
)
from .evaluate import (
    CompiledExpr,
    ExprImpl,
    GenericImpl,
    compile_expr,
    evaluate,
    generic_impls,
    lookup_impl,
)
from .parse import parse

__all__ = [
    "BUILTIN_FUNCTIONS", "ONE", "ZERO", "Atom", "Expr", "Symbol", "VariableContext",
    "as_expr", "common_ring", "compose", "differentiate", "equals_zero", "from_polys",
    "instantiate", "make_atom", "poly_gcd", "poly_lcm", "substitute", "symbols",
    "CompiledExpr", "ExprImpl", "GenericImpl", "compile_expr", "evaluate",
    "generic_impls", "lookup_impl", "parse",
]
