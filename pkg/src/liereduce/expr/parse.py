"""Pratt parser for the expression grammar.

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := base ("^" integer)?
    base   := number | ident | call | "(" expr ")" | "-" factor
    call   := ident deriv? "(" expr ("," expr)* ")"
    deriv  := "'"+ | "^(" integer ")" | "_{" integer ("," integer)* "}"

The derivative forms are what the printer emits for derivative atoms, so
``parse(str(e)) == e`` holds for every canonical Expr.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError, UnknownSymbol
from .core import BUILTIN_FUNCTIONS, Expr, Symbol, VariableContext, make_atom

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),'{}]))"
)

_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_BP = 25


@dataclass
class _Tok:
    kind: str  # num | ident | op | end
    text: str
    pos: int  # character offset


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(text)
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", _byte(text, pos), text)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


def _byte(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, ctx: VariableContext):
        self.text = text
        self.ctx = ctx
        self.toks = _tokenize(text)
        self.i = 0
        self.arities = dict(ctx.functions)
        for name in BUILTIN_FUNCTIONS:
            self.arities.setdefault(name, 1)

    # token helpers
    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i = min(self.i + 1, len(self.toks) - 1)
        return t

    def error(self, msg: str, tok: _Tok):
        raise ParseError(msg, _byte(self.text, tok.pos), self.text)

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.kind != "op" or t.text != text:
            self.error(f"expected {text!r}, found {t.text or 'end of input'!r}", t)
        return t

    def lbp(self, t: _Tok) -> int:
        if t.kind == "op":
            return _LBP.get(t.text, 0)
        return 0

    # Pratt core
    def expression(self, rbp: int = 0) -> Expr:
        left = self.nud(self.next())
        while rbp < self.lbp(self.peek()):
            left = self.led(self.next(), left)
        return left

    def nud(self, t: _Tok) -> Expr:
        if t.kind == "num":
            return Expr.const(int(t.text))
        if t.kind == "ident":
            return self.identifier(t)
        if t.kind == "op" and t.text == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        if t.kind == "op" and t.text == "-":
            return -self.expression(_UNARY_BP)
        if t.kind == "op" and t.text == "+":
            return self.expression(_UNARY_BP)
        self.error(f"unexpected {t.text or 'end of input'!r}", t)

    def led(self, t: _Tok, left: Expr) -> Expr:
        op = t.text
        if op == "^":
            sign = 1
            if self.peek().kind == "op" and self.peek().text == "-":
                self.next()
                sign = -1
            k = self.next()
            if k.kind != "num":
                self.error("exponent must be an integer", k)
            return left ** (sign * int(k.text))
        right = self.expression(_LBP[op])
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if right.is_zero:
            self.error("division by zero", t)
        return left / right

    def identifier(self, t: _Tok) -> Expr:
        name = t.text
        nxt = self.peek()
        # name_{...}(...) lexes as ident "name_" followed by "{"
        if name.endswith("_") and nxt.kind == "op" and nxt.text == "{" and name[:-1] in self.arities:
            return self.call(name[:-1], t)
        if name in self.arities and nxt.kind == "op" and nxt.text in ("(", "'"):
            return self.call(name, t)
        if (name in self.arities and nxt.kind == "op" and nxt.text == "^"
                and self.peek(1).kind == "op" and self.peek(1).text == "("):
            return self.call(name, t)
        if self.ctx.knows(name):
            return Expr.from_generator(Symbol(name))
        if name in self.arities:
            self.error(f"function {name!r} needs arguments", t)
        raise UnknownSymbol(name, _byte(self.text, t.pos))

    def call(self, name: str, t: _Tok) -> Expr:
        arity = self.arities[name]
        orders = [0] * arity
        nxt = self.peek()
        if nxt.text == "'":
            k = 0
            while self.peek().kind == "op" and self.peek().text == "'":
                self.next()
                k += 1
            orders = self._unary_orders(name, k, t)
        elif nxt.text == "^":
            self.next()
            self.expect("(")
            k = self.next()
            if k.kind != "num":
                self.error("derivative order must be an integer", k)
            self.expect(")")
            orders = self._unary_orders(name, int(k.text), t)
        elif nxt.text == "{":
            self.next()
            orders = []
            while True:
                k = self.next()
                if k.kind != "num":
                    self.error("derivative order must be an integer", k)
                orders.append(int(k.text))
                sep = self.next()
                if sep.text == "}":
                    break
                if sep.text != ",":
                    self.error("expected ',' or '}'", sep)
            if len(orders) != arity:
                self.error(f"{name} takes {arity} derivative orders", t)
        self.expect("(")
        args = [self.expression()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.next()
            args.append(self.expression())
        self.expect(")")
        if len(args) != arity:
            self.error(f"{name} expects {arity} argument(s), got {len(args)}", t)
        return make_atom(name, orders, args)

    def _unary_orders(self, name: str, k: int, t: _Tok) -> list[int]:
        if self.arities[name] != 1:
            self.error(f"{name} has arity {self.arities[name]}; use {name}_{{...}}", t)
        if name in BUILTIN_FUNCTIONS:
            self.error(f"builtin {name} does not take derivative notation", t)
        return [k]

    def parse(self) -> Expr:
        if self.peek().kind == "end":
            self.error("empty expression", self.peek())
        e = self.expression()
        end = self.peek()
        if end.kind != "end":
            self.error(f"unexpected {end.text!r}", end)
        return e


def parse(text: str, ctx: VariableContext) -> Expr:
    """Parse ``text`` in ``ctx`` into a canonical Expr."""
    return _Parser(text, ctx).parse()
