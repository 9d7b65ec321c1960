import random

import pytest

from liereduce.expr import VariableContext
from liereduce.field import VectorField


@pytest.fixture
def c3():
    return VariableContext.create("x0 x1 x2")


@pytest.fixture
def c4():
    return VariableContext.create("x0 x1 x2 x3")


@pytest.fixture
def ex1ctx():
    return VariableContext.create("x0 x1 x2", params="nu", functions={"gamma": 1})


def field(ctx, text):
    return VectorField.parse(ctx, text)


def random_poly(rng: random.Random, names, degree: int, terms: int = 3, lo: int = -3, hi: int = 3) -> str:
    """Random polynomial text with integer coefficients."""
    out = []
    for _ in range(terms):
        c = rng.randint(lo, hi) or 1
        mono = [f"{rng.choice(names)}^{rng.randint(1, degree)}" for _ in range(rng.randint(0, degree))]
        out.append("*".join([f"({c})"] + mono))
    return " + ".join(out)
