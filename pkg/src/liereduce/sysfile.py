"""Line-oriented system definition files.

    # comment
    vars: x0 x1 x2
    params: nu
    function gamma 1
    field f: 1, x2, gamma(x2)/x1
    invariant s1: x1/x0
    scalar nu1: x1
    reduced h: w2 - w1, gamma(w2)/w1
    bind gamma(s): s^2
    value nu: 1

Reduced systems are written in w1, w2, ... (one per invariant, in
declaration order); invariant names are accepted as aliases.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContextMismatch, LieReduceError, ParseError, UnknownSymbol
from .expr import Expr, ExprImpl, Symbol, VariableContext, instantiate
from .field import VectorField, split_top_level

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_BIND = re.compile(r"bind\s+([A-Za-z_][A-Za-z0-9_]*)\s*\(([^)]*)\)\s*:\s*(.+)$")


class SystemFileError(LieReduceError, ValueError):
    def __init__(self, msg: str, line: int, path: str = "<string>"):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


@dataclass
class SystemFile:
    ctx: VariableContext
    fields: dict[str, VectorField] = field(default_factory=dict)
    invariants: dict[str, Expr] = field(default_factory=dict)
    scalars: dict[str, Expr] = field(default_factory=dict)
    reduced: dict[str, list] = field(default_factory=dict)
    reduced_text: dict[str, list[str]] = field(default_factory=dict)
    bindings: dict[str, tuple] = field(default_factory=dict)  # name -> (params, body)
    values: dict[str, float] = field(default_factory=dict)
    path: str = "<string>"

    @property
    def names(self) -> set[str]:
        return set(self.fields) | set(self.invariants) | set(self.scalars) | set(self.reduced)

    def atom_impls(self) -> dict:
        return {name: ExprImpl(params, body) for name, (params, body) in self.bindings.items()}

    def param_values(self) -> dict:
        return {Symbol(k): v for k, v in self.values.items()}

    def instantiate(self, e: Expr) -> Expr:
        for name, (params, body) in self.bindings.items():
            e = instantiate(e, name, params, body)
        return e

    def instantiate_field(self, f: VectorField) -> VectorField:
        return VectorField(f.ctx, tuple(self.instantiate(c) for c in f.components))


def _check_name(name: str, taken: set, lineno: int, path: str):
    if not _IDENT.match(name):
        raise SystemFileError(f"invalid name {name!r}", lineno, path)
    if name in taken:
        raise SystemFileError(f"duplicate name {name!r}", lineno, path)


def parse_system(text: str, path: str = "<string>") -> SystemFile:
    variables: list[str] = []
    params: list[str] = []
    functions: dict[str, int] = {}
    body: list[tuple[int, str, str, str]] = []  # (line, kind, name, rest)
    binds: list[tuple[int, str, list[str], str]] = []
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split(None, 1)[0].rstrip(":")
        if line.startswith("vars:"):
            variables += line[5:].replace(",", " ").split()
        elif line.startswith("params:"):
            params += line[7:].replace(",", " ").split()
        elif head == "function":
            parts = line.split()
            if len(parts) != 3 or not parts[2].isdigit() or int(parts[2]) < 1:
                raise SystemFileError("expected 'function NAME ARITY'", lineno, path)
            functions[parts[1]] = int(parts[2])
        elif head == "bind":
            m = _BIND.match(line)
            if not m:
                raise SystemFileError("expected 'bind NAME(ARGS): EXPR'", lineno, path)
            args = [a.strip() for a in m.group(2).split(",") if a.strip()]
            binds.append((lineno, m.group(1), args, m.group(3)))
        elif head in ("field", "invariant", "scalar", "reduced", "value"):
            rest = line[len(head):].strip()
            if ":" not in rest:
                raise SystemFileError(f"expected '{head} NAME: ...'", lineno, path)
            name, expr = rest.split(":", 1)
            name = name.strip()
            if head == "value":
                try:
                    values[name] = float(expr)
                except ValueError:
                    raise SystemFileError(f"value must be numeric: {expr.strip()!r}", lineno, path) from None
            else:
                body.append((lineno, head, name, expr.strip()))
        else:
            raise SystemFileError(f"unknown directive {head!r}", lineno, path)
    if not variables:
        raise SystemFileError("no 'vars:' line", 1, path)
    try:
        ctx = VariableContext.create(variables, params, functions)
    except ValueError as exc:
        raise SystemFileError(str(exc), 1, path) from None
    for name in values:
        if Symbol(name) not in ctx.params:
            raise SystemFileError(f"value given for undeclared parameter {name!r}", 1, path)
    sf = SystemFile(ctx, path=path, values=values)
    taken = {s.name for s in ctx.variables + ctx.params} | set(functions)
    pending_reduced = []
    for lineno, kind, name, expr in body:
        _check_name(name, taken, lineno, path)
        taken.add(name)
        try:
            if kind == "field":
                sf.fields[name] = VectorField.parse(ctx, expr)
            elif kind == "invariant":
                sf.invariants[name] = ctx.parse(expr)
            elif kind == "scalar":
                sf.scalars[name] = ctx.parse(expr)
            else:
                pending_reduced.append((lineno, name, expr))
        except ContextMismatch as exc:
            raise SystemFileError(str(exc), lineno, path) from None
        except (ParseError, UnknownSymbol) as exc:
            raise SystemFileError(str(exc), lineno, path) from None
    rctx, aliases = reduced_context(ctx, list(sf.invariants))
    for lineno, name, expr in pending_reduced:
        texts = split_top_level(expr)
        try:
            sf.reduced[name] = [parse_reduced(t, rctx, aliases) for t in texts]
        except (ParseError, UnknownSymbol) as exc:
            raise SystemFileError(str(exc), lineno, path) from None
        sf.reduced_text[name] = texts
    for lineno, name, args, expr in binds:
        if functions.get(name) != len(args):
            raise SystemFileError(f"binding for undeclared function {name}/{len(args)}", lineno, path)
        bctx = VariableContext.create(args, [p for p in params if p not in args])
        try:
            sf.bindings[name] = (tuple(Symbol(a) for a in args), bctx.parse(expr))
        except (ParseError, UnknownSymbol) as exc:
            raise SystemFileError(str(exc), lineno, path) from None
    return sf


def load_system(path: str | Path) -> SystemFile:
    p = Path(path)
    return parse_system(p.read_text(encoding="utf-8"), str(p))


def reduced_context(ctx: VariableContext, invariant_names: list[str], count: int | None = None):
    """Context for reduced expressions: w1..wr plus invariant-name aliases."""
    r = len(invariant_names) if count is None else count
    ws = [f"w{i + 1}" for i in range(r)]
    aliases = {n: Symbol(w) for n, w in zip(invariant_names, ws) if n not in ws}
    rctx = VariableContext.create(ws + list(aliases), ctx.params, dict(ctx.functions))
    return rctx, aliases


def parse_reduced(text: str, rctx: VariableContext, aliases: dict) -> Expr:
    e = rctx.parse(text)
    return e.subs(aliases) if aliases else e
