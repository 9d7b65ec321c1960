"""Exception hierarchy shared by all liereduce modules."""

from __future__ import annotations


class LieReduceError(Exception):
    """Base class for all errors raised by liereduce."""


class EngineLimitation(LieReduceError):
    """The question may have an answer the engine cannot reach (CLI exit code 3)."""


# expression kernel

class ParseError(LieReduceError, SyntaxError):
    def __init__(self, msg: str, offset: int, text: str = ""):
        SyntaxError.__init__(self, f"{msg} at byte {offset}")
        self.msg = msg
        self.offset = offset
        self.text = text


class UnknownSymbol(LieReduceError, LookupError):
    def __init__(self, name: str, offset: int | None = None):
        where = "" if offset is None else f" at byte {offset}"
        super().__init__(f"unknown identifier {name!r}{where}")
        self.name = name
        self.offset = offset


class DivisionByZero(LieReduceError, ZeroDivisionError):
    pass


class EvalDomainError(LieReduceError, ArithmeticError):
    def __init__(self, msg: str, time: float | None = None):
        if time is not None:
            msg = f"{msg} (t={time:.6g})"
        super().__init__(msg)
        self.time = time


class MissingAtomImpl(LieReduceError, LookupError):
    pass


class ContextMismatch(LieReduceError, ValueError):
    pass


# linear algebra

class NotSquare(LieReduceError, ValueError):
    pass


# reduction

class NotInInvolution(LieReduceError):
    def __init__(self, pair: tuple[int, int], residual):
        super().__init__(f"bracket of generators {pair} is not in their span: {residual}")
        self.pair = pair
        self.residual = residual


class NotOrbitallyReducible(LieReduceError):
    def __init__(self, index: int, ratio, witness):
        super().__init__(f"ratio d_{index + 1}/d_1 = {ratio} is not invariant; witness {witness}")
        self.index = index
        self.ratio = ratio
        self.witness = witness


class DegenerateDirection(LieReduceError):
    pass


class RankDeficient(LieReduceError):
    pass


class PreconditionFailed(LieReduceError):
    def __init__(self, msg: str, generator: int | None = None):
        super().__init__(msg)
        self.generator = generator


# higher order equations

class DependentDerivatives(LieReduceError):
    def __init__(self, ell: int):
        super().__init__(f"iterated derivatives become dependent after {ell} independent ones")
        self.ell = ell


class InversionUnsupported(EngineLimitation):
    def __init__(self, msg: str, implicit=None):
        super().__init__(msg)
        self.implicit = implicit


class AnsatzExhausted(EngineLimitation):
    pass


class ZeroPivot(LieReduceError, ValueError):
    pass


class ZeroTimeComponent(LieReduceError):
    pass


class DependenceViolation(LieReduceError, ValueError):
    pass


# numerics

class SamplingExhausted(LieReduceError):
    pass
