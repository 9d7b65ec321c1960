"""Command-line front end.

Usage: ``liereduce COMMAND SYSTEM_FILE [options]`` or ``liereduce corpus run [NAME]``.
A JSON report goes to stdout and diagnostics to stderr.  Exit codes:
0 property holds, 1 property fails, 2 usage or parse error, 3 engine limitation.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import (
    ContextMismatch,
    DegenerateDirection,
    DependentDerivatives,
    EngineLimitation,
    InversionUnsupported,
    LieReduceError,
    NotInInvolution,
    NotOrbitallyReducible,
    ParseError,
    PreconditionFailed,
    UnknownSymbol,
)
from .expr import Expr
from .field import VectorField, field_matrix, lie_bracket, split_top_level
from .highorder import (
    compute_lambda,
    construct_higher_order,
    exceptional_reduce,
    lambda_prolong,
    raise_order,
)
from .linalg import rank_generic
from .numeric import CheckConfig, residual_reduction
from .reduce import (
    GroupData,
    InvolutionSystem,
    ReductionMap,
    build_involution,
    check_common_invariants,
    check_group_reducible,
    check_orbital_symmetry,
    check_reducible,
    construct_reducible,
    group_decompose,
    kernel_involution_from_map,
    module_decompose,
    orbital_reduce,
)
from .sysfile import SystemFile, SystemFileError, load_system, parse_reduced, reduced_context

STATUS_EXIT = {"ok": 0, "fail": 1, "unsupported": 3}
CONVENTION = "bracket convention [g,f] = Df*g - Dg*f, so that X_[g,f] = X_g X_f - X_f X_g"


class UsageError(LieReduceError):
    pass


def make_report(command: str, status: str = "ok", *, witnesses=(), residual_max=None, mu=None,
                alpha=(), lam=(), reduced=(), notes=(), data=None) -> dict:
    report = {
        "command": command,
        "status": status,
        "witnesses": [str(w) for w in witnesses],
        "residual_max": residual_max,
        "mu": None if mu is None else str(mu),
        "alpha": [str(a) for a in alpha],
        "lambda": [[str(x) for x in row] for row in lam],
        "reduced": [str(r) for r in reduced],
        "notes": list(notes),
    }
    if data is not None:
        report["data"] = data
    if status == "fail" and not report["witnesses"]:
        report["witnesses"] = ["property does not hold"]
    return report


def _strs(xs) -> list[str]:
    return [str(x) for x in xs]


class Session:
    """Resolves command-line references (names or raw expressions) against a system file."""

    def __init__(self, sf: SystemFile, instantiate: bool = False):
        self.sf = sf
        self.ctx = sf.ctx
        self.inst = instantiate

    def _expr(self, e: Expr) -> Expr:
        return self.sf.instantiate(e) if self.inst else e

    def _field(self, f: VectorField) -> VectorField:
        return self.sf.instantiate_field(f) if self.inst else f

    def field(self, text: str | None, default: str) -> VectorField:
        text = text or default
        if text in self.sf.fields:
            return self._field(self.sf.fields[text])
        if "," not in text and text not in self.sf.names:
            raise UsageError(f"unknown field {text!r}")
        return self._field(VectorField.parse(self.ctx, text))

    def fields(self, text: str | None, default: str = "g") -> list[VectorField]:
        text = text or default
        names = [t.strip() for t in text.split(",")]
        if all(n in self.sf.fields for n in names):
            return [self._field(self.sf.fields[n]) for n in names]
        return [self._field(VectorField.parse(self.ctx, part)) for part in text.split(";")]

    def expr(self, text: str) -> Expr:
        text = text.strip()
        for table in (self.sf.scalars, self.sf.invariants):
            if text in table:
                return self._expr(table[text])
        return self._expr(self.ctx.parse(text))

    def exprs(self, text: str) -> list[Expr]:
        return [self.expr(t) for t in split_top_level(text)]

    def invariants(self, text: str | None) -> tuple[list[str], ReductionMap]:
        if text is None:
            names = list(self.sf.invariants)
            if not names:
                raise UsageError("no invariants declared; pass --invariants")
        else:
            names = [t.strip() for t in split_top_level(text)]
        exprs, labels = [], []
        for i, n in enumerate(names):
            if n in self.sf.invariants:
                exprs.append(self._expr(self.sf.invariants[n]))
                labels.append(n)
            else:
                exprs.append(self.expr(n))
                labels.append(f"w{i + 1}")
        return labels, ReductionMap.create(self.ctx, exprs)

    def reduced(self, text: str, labels: list[str]) -> list[Expr]:
        if text in self.sf.reduced:
            return [self._expr(e) for e in self.sf.reduced[text]]
        rctx, aliases = reduced_context(self.ctx, labels)
        return [self._expr(parse_reduced(t, rctx, aliases)) for t in split_top_level(text)]

    def system(self, gens: list[VectorField]) -> InvolutionSystem:
        return build_involution(gens, self.ctx)


def _module(ctx, gens: list[VectorField]) -> InvolutionSystem:
    rank = rank_generic(field_matrix(gens)) if gens else 0
    return InvolutionSystem(ctx, tuple(gens), {}, rank)


# commands ------------------------------------------------------------------------

def cmd_check_symmetry(s: Session, a) -> dict:
    f, g = s.field(a.field, "f"), s.field(a.candidate, "g")
    br = lie_bracket(g, f)
    if br.is_zero:
        return make_report(a.command, notes=[CONVENTION])
    return make_report(a.command, "fail", witnesses=[f"[g, f] = {br}"], notes=[CONVENTION])


def cmd_check_orbital_symmetry(s: Session, a) -> dict:
    f, g = s.field(a.field, "f"), s.field(a.candidate, "g")
    alpha = check_orbital_symmetry(f, g)
    if alpha is None:
        return make_report(a.command, "fail", witnesses=[f"[g, f] = {lie_bracket(g, f)} is not a multiple of f"],
                           notes=[CONVENTION])
    return make_report(a.command, alpha=[alpha], notes=[CONVENTION])


def cmd_check_involution(s: Session, a) -> dict:
    gens = s.fields(a.generators)
    try:
        S = s.system(gens)
    except NotInInvolution as exc:
        return make_report(a.command, "fail",
                           witnesses=[f"[g{exc.pair[0] + 1}, g{exc.pair[1] + 1}] = {exc.residual}"])
    closure = {f"{i + 1},{j + 1}": _strs(c) for (i, j), c in sorted(S.closure_coeffs.items())}
    return make_report(a.command, data={"rank": S.generic_rank, "closure": closure}, notes=[CONVENTION])


def cmd_decompose(s: Session, a) -> dict:
    f = s.field(a.field, "f")
    gens = s.fields(a.generators)
    S = _module(s.ctx, gens)
    alphas, lams, witnesses = [], [], []
    for i, g in enumerate(gens):
        v = lie_bracket(g, f)
        dec = module_decompose(v, S, f if a.allow_f else None)
        if dec is None:
            span = "f and the generators" if a.allow_f else "the generators"
            witnesses.append(f"[g{i + 1}, f] = {v} is not in the span of {span}")
            continue
        if a.allow_f:
            alphas.append(dec.f_coefficient)
        lams.append(dec.module_coefficients)
    if witnesses:
        return make_report(a.command, "fail", witnesses=witnesses, notes=[CONVENTION])
    return make_report(a.command, alpha=alphas, lam=lams, notes=[CONVENTION])


def cmd_check_reduce(s: Session, a) -> dict:
    f = s.field(a.field, "f")
    S = s.system(s.fields(a.generators))
    labels, Psi = s.invariants(a.invariants)
    h = s.reduced(a.reduced, labels) if a.reduced else None
    try:
        rep = check_reducible(f, Psi, S, h)
    except PreconditionFailed as exc:
        return make_report(a.command, "fail", witnesses=[str(exc)])
    data = {"trivial": rep.trivial}
    if not rep.reducible:
        return make_report(a.command, "fail", witnesses=rep.witnesses, notes=rep.notes, data=data)
    return make_report(a.command, reduced=rep.h or [], notes=rep.notes, data=data)


def cmd_orbital_reduce(s: Session, a) -> dict:
    f = s.field(a.field, "f")
    S = s.system(s.fields(a.generators))
    labels, Psi = s.invariants(a.invariants)
    pre = check_common_invariants(S, Psi)
    if not pre:
        return make_report(a.command, "fail", witnesses=pre.witnesses)
    mu = s.expr(a.mu) if a.mu else None
    try:
        red = orbital_reduce(f, Psi, S, mu=mu)
    except NotOrbitallyReducible as exc:
        return make_report(a.command, "fail", witnesses=[f"X_g(d{exc.index + 1}/d1) = {exc.witness}"],
                           data={"ratio": str(exc.ratio)})
    except DegenerateDirection as exc:
        return make_report(a.command, "fail", witnesses=[str(exc)])
    if red is None:
        return make_report(a.command, "unsupported",
                           notes=["orbit equations have no rational form within the degree bound"])
    notes = ["completeness of the invariant set is assumed, not checked"]
    data = {"orbit_equations": _strs(red.orbit_equations), "d": _strs(red.d)}
    if red.reduced is None:
        if mu is not None:
            return make_report(a.command, "fail", witnesses=[f"mu = {mu} does not make the reduced system expressible"],
                               data=data)
        notes.append("no time rescaling found; reporting orbit equations")
        return make_report(a.command, reduced=red.orbit_equations, notes=notes, data=data)
    data["reduced_tuple"] = "(" + ", ".join(_strs(red.reduced)) + ")"
    return make_report(a.command, mu=red.mu, reduced=red.reduced, notes=notes, data=data)


def cmd_kernel_involution(s: Session, a) -> dict:
    _, Psi = s.invariants(a.invariants)
    S = kernel_involution_from_map(Psi)
    return make_report(a.command, data={"generators": _strs(S.generators), "rank": S.generic_rank})


def _group(s: Session, a) -> GroupData:
    gens = s.fields(a.generators)
    _, Psi = s.invariants(a.invariants)
    grads = s.fields(a.gradients) if a.gradients else None
    return GroupData.build(s.ctx, gens, Psi.invariants, grads)


def cmd_group_decompose(s: Session, a) -> dict:
    f = s.field(a.field, "f")
    G = _group(s, a)
    dec = group_decompose(f, G)
    if dec is None:
        return make_report(a.command, "fail", witnesses=["column matrix is singular"])
    alphas, betas = dec
    return make_report(a.command, alpha=alphas, data={"betas": _strs(betas), "theta": str(G.theta)})


def cmd_check_group_reduce(s: Session, a) -> dict:
    f = s.field(a.field, "f")
    G = _group(s, a)
    v = check_group_reducible(f, G, a.orbital)
    alphas, betas = group_decompose(f, G)
    data = {"betas": _strs(betas), "theta": str(G.theta)}
    return make_report(a.command, "ok" if v else "fail", witnesses=v.witnesses, notes=v.notes, data=data)


def cmd_construct(s: Session, a) -> dict:
    f = s.field(a.field, "f")
    S = s.system(s.fields(a.generators))
    coeffs = s.exprs(a.coeffs) if a.coeffs else []
    Psi = s.invariants(a.invariants)[1] if a.invariants else None
    try:
        f_star = construct_reducible(f, S, coeffs, a.orbital, Psi)
    except PreconditionFailed as exc:
        return make_report(a.command, "fail", witnesses=[str(exc)])
    return make_report(a.command, data={"field": str(f_star)})


def cmd_prolong(s: Session, a) -> dict:
    if not (a.g0 and a.g1):
        raise UsageError("prolong needs --g0 and --g1")
    m = a.order
    ctx = s.ctx if s.ctx.dim == m + 1 else None
    parse = s.ctx.parse if ctx is not None else None
    if ctx is None:
        from .expr import VariableContext

        ctx = VariableContext.create([f"x{k}" for k in range(m + 1)], s.ctx.params, dict(s.ctx.functions))
        parse = ctx.parse
    lam = parse(a.lambda_) if a.lambda_ else parse("0")
    g, mu = lambda_prolong(parse(a.g0), parse(a.g1), lam, m, ctx)
    return make_report(a.command, mu=mu, data={"field": str(g)})


def _equation_data(eq, change) -> dict:
    out = {"order": eq.order, "rhs": str(eq.rhs), "variables": [v.name for v in eq.ctx.variables],
           "forward": _strs(change.forward)}
    out["inverse"] = _strs(change.inverse) if change.inverse is not None else None
    return out


def cmd_raise_order(s: Session, a) -> dict:
    Q = s.field(a.field, "f")
    phi = s.expr(a.phi) if a.phi else None
    try:
        eq, change = raise_order(Q, phi)
    except DependentDerivatives as exc:
        if phi is None:
            raise
        eq = exceptional_reduce(Q, phi, exc.ell)
        return make_report(a.command, notes=[f"iterated derivatives dependent; order lowered to {eq.order}"],
                           data={"order": eq.order, "rhs": str(eq.rhs),
                                 "variables": [v.name for v in eq.ctx.variables]})
    except InversionUnsupported as exc:
        return make_report(a.command, "unsupported", notes=[str(exc)], data={"implicit": exc.implicit or []})
    return make_report(a.command, data=_equation_data(eq, change))


def cmd_build_higher(s: Session, a) -> dict:
    f = s.field(a.field, "f")
    gens = s.fields(a.generators)
    coeffs = s.exprs(a.coeffs) if a.coeffs else []
    phi = s.expr(a.phi) if a.phi else None
    Psi = s.invariants(a.invariants)[1] if (a.invariants or s.sf.invariants) else None
    res = construct_higher_order(f, gens, coeffs, phi, Psi)
    data = _equation_data(res.equation, res.change)
    data.update({"f_hat": str(res.f_hat), "H": str(res.H), "generators": _strs(res.generators),
                 "invariants": _strs(res.invariants)})
    lam = []
    if len(gens) == 1:
        lam = [[compute_lambda(f, gens[0], coeffs[0], res.change)]]
    mu, reduced = None, []
    if res.reduction is not None:
        data["orbit_equations"] = _strs(res.reduction.orbit_equations)
        mu, reduced = res.reduction.mu, res.reduction.reduced or res.reduction.orbit_equations
    return make_report(a.command, mu=mu, reduced=reduced, lam=lam, data=data, notes=[CONVENTION])


def cmd_compute_lambda(s: Session, a) -> dict:
    f, g = s.field(a.field, "f"), s.field(a.candidate, "g")
    if not a.coeffs:
        raise UsageError("compute-lambda needs --coeffs NU")
    nu = s.exprs(a.coeffs)[0]
    phi = s.expr(a.phi) if a.phi else None
    if check_orbital_symmetry(f, g) is None:
        return make_report(a.command, "fail", witnesses=[f"[g, f] = {lie_bracket(g, f)} is not a multiple of f"])
    res = construct_higher_order(f, [g], [nu], phi)
    lam = compute_lambda(f, g, nu, res.change)
    return make_report(a.command, lam=[[lam]], notes=[CONVENTION],
                       data={"variables": [v.name for v in res.change.target.variables]})


def cmd_verify_numeric(s: Session, a) -> dict:
    f = s.field(a.field, "f")
    labels, Psi = s.invariants(a.invariants)
    if not a.reduced:
        raise UsageError("verify-numeric needs --reduced")
    h = s.reduced(a.reduced, labels)
    mu = s.expr(a.mu) if a.mu else None
    cfg = CheckConfig(num_points=a.points, tol_pointwise=a.tol, rng_seed=a.seed)
    r = residual_reduction(f, Psi, h, cfg, mu, s.sf.atom_impls(), s.sf.param_values())
    status = "ok" if r < cfg.tol_pointwise else "fail"
    witnesses = [] if status == "ok" else [f"max residual {r:.3e} exceeds {cfg.tol_pointwise:.1e}"]
    return make_report(a.command, status, witnesses=witnesses, residual_max=r, mu=mu, reduced=h,
                       data={"points": cfg.num_points, "seed": cfg.rng_seed})


COMMANDS = {
    "check-symmetry": cmd_check_symmetry,
    "check-orbital-symmetry": cmd_check_orbital_symmetry,
    "check-involution": cmd_check_involution,
    "decompose": cmd_decompose,
    "check-reduce": cmd_check_reduce,
    "orbital-reduce": cmd_orbital_reduce,
    "kernel-involution": cmd_kernel_involution,
    "group-decompose": cmd_group_decompose,
    "check-group-reduce": cmd_check_group_reduce,
    "construct": cmd_construct,
    "prolong": cmd_prolong,
    "raise-order": cmd_raise_order,
    "build-higher": cmd_build_higher,
    "compute-lambda": cmd_compute_lambda,
    "verify-numeric": cmd_verify_numeric,
}


# corpus ---------------------------------------------------------------------------

def corpus_dir() -> Path:
    return Path(str(resources.files("liereduce") / "corpus"))


def corpus_names() -> list[str]:
    return sorted(p.stem for p in corpus_dir().glob("*.json"))


def _matches(actual, expected) -> bool:
    if isinstance(expected, dict):
        return isinstance(actual, dict) and all(k in actual and _matches(actual[k], v) for k, v in expected.items())
    return actual == expected


def run_corpus_entry(name: str) -> dict:
    folder = corpus_dir()
    entry_path = folder / f"{name}.json"
    if not entry_path.exists():
        raise UsageError(f"unknown corpus entry {name!r}; available: {', '.join(corpus_names())}")
    entry = json.loads(entry_path.read_text(encoding="utf-8"))
    system = str(folder / entry["system"])
    steps, witnesses = {}, []
    primary = None
    for step in entry["steps"]:
        argv = [step["argv"][0], system] + list(step["argv"][1:])
        report, _ = execute(argv)
        ok = _matches(report, step["expect"])
        steps[step["name"]] = {"status": report["status"], "match": ok}
        if not ok:
            mismatched = {k: report.get(k) for k in step["expect"]}
            witnesses.append(f"{step['name']}: expected {json.dumps(step['expect'], sort_keys=True)}, "
                             f"got {json.dumps(mismatched, sort_keys=True)}")
        if step.get("primary"):
            primary = report
    primary = primary or {}
    return make_report(
        f"corpus run {name}", "ok" if not witnesses else "fail", witnesses=witnesses,
        residual_max=primary.get("residual_max"), mu=primary.get("mu"), alpha=primary.get("alpha", []),
        lam=primary.get("lambda", []), reduced=primary.get("reduced", []),
        notes=list(entry.get("notes", [])),
        data={"entry": name, "primary": primary.get("data", {}), "steps": steps})


def run_corpus(name: str | None) -> dict:
    if name:
        return run_corpus_entry(name)
    results = {n: run_corpus_entry(n) for n in corpus_names()}
    witnesses = [w for n, r in results.items() for w in (f"{n}: {x}" for x in r["witnesses"])]
    status = "ok" if all(r["status"] == "ok" for r in results.values()) else "fail"
    return make_report("corpus run", status, witnesses=witnesses,
                       data={"entries": {n: r["status"] for n, r in results.items()}})


# argument handling ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liereduce", description="Verify and construct reducible ODE systems.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("system", help="system definition file")
    common.add_argument("--field", help="field name or comma-separated components (default f)")
    common.add_argument("--candidate", help="candidate generator (default g)")
    common.add_argument("--generators", help="generator names, comma-separated (default g)")
    common.add_argument("--invariants", help="invariant names or expressions, comma-separated")
    common.add_argument("--gradients", help="gradient fields for group data")
    common.add_argument("--mu", help="time rescaling factor")
    common.add_argument("--coeffs", help="coefficients, comma-separated")
    common.add_argument("--instantiate", action="store_true", help="apply 'bind' lines symbolically")
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "decompose":
            sp.add_argument("--allow-f", action="store_true", help="adjoin f as a first column")
        if name in ("check-reduce", "verify-numeric"):
            sp.add_argument("--reduced", help="reduced system (name or expressions in w1..wr)")
        if name in ("check-group-reduce", "construct"):
            sp.add_argument("--orbital", action="store_true")
        if name in ("raise-order", "build-higher", "compute-lambda"):
            sp.add_argument("--phi", help="new dependent variable (default x1)")
        if name == "prolong":
            sp.add_argument("--g0", help="time component")
            sp.add_argument("--g1", help="state component")
            sp.add_argument("--lambda", dest="lambda_", help="lambda coefficient")
            sp.add_argument("--order", type=int, default=2)
        if name == "verify-numeric":
            sp.add_argument("--points", type=int, default=20)
            sp.add_argument("--tol", type=float, default=1e-8)
            sp.add_argument("--seed", type=int, default=42)
    cp = sub.add_parser("corpus", help="bundled example corpus")
    cp.add_argument("action", choices=["run", "list"])
    cp.add_argument("name", nargs="?")
    return p


def execute(argv: Sequence[str]) -> tuple[dict | None, int]:
    """Run one command; returns (report, exit code).  Usage errors give (None, 2)."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return None, int(exc.code or 0)
    try:
        if args.command == "corpus":
            if args.action == "list":
                report = make_report("corpus list", data={"entries": corpus_names()})
            else:
                report = run_corpus(args.name)
        else:
            sf = load_system(args.system)
            report = COMMANDS[args.command](Session(sf, args.instantiate), args)
    except (ParseError, UnknownSymbol, SystemFileError, ContextMismatch, UsageError, OSError) as exc:
        print(f"liereduce: error: {exc}", file=sys.stderr)
        return None, 2
    except EngineLimitation as exc:
        report = make_report(args.command, "unsupported", notes=[f"{type(exc).__name__}: {exc}"])
    except LieReduceError as exc:
        report = make_report(args.command, "fail", witnesses=[f"{type(exc).__name__}: {exc}"])
    return report, STATUS_EXIT[report["status"]]


def main(argv: Sequence[str] | None = None) -> int:
    report, code = execute(sys.argv[1:] if argv is None else argv)
    if report is not None:
        print(json.dumps(report, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
