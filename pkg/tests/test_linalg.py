import random
from fractions import Fraction

import numpy as np
import pytest

from liereduce.errors import NotSquare
from liereduce.expr import ONE, ZERO, VariableContext, evaluate
from liereduce.field import VectorField, field_matrix, jacobian, lie_derivative
from liereduce.linalg import ExprMatrix, det, kernel_basis, rank_generic, rational_nullspace, solve_linear

from conftest import random_poly


@pytest.fixture
def r3():
    return VariableContext.create("x1 x2 x3")


def test_det_so3_theta(r3):
    B1 = VectorField.parse(r3, "-x2, x1, 0")
    B2 = VectorField.parse(r3, "-x3, 0, x1")
    q = VectorField.parse(r3, "2*x1, 2*x2, 2*x3")
    assert det(field_matrix([B1, B2, q])) == r3.parse("2*x1*(x1^2 + x2^2 + x3^2)")


def test_det_small_cases(r3):
    assert det(ExprMatrix.identity(3)) == ONE
    M = ExprMatrix.from_rows([[r3.parse("x1"), r3.parse("x2")], [r3.parse("x2"), r3.parse("x1")]])
    assert det(M) == r3.parse("x1^2 - x2^2")
    with pytest.raises(NotSquare):
        det(ExprMatrix.zeros(2, 3))


def test_det_with_fractions_matches_numeric(r3):
    rng = random.Random(5)
    names = ["x1", "x2", "x3"]
    rows = [[r3.parse(f"({random_poly(rng, names, 2)})/(x1 + {k + 2})") for k in range(3)] for _ in range(3)]
    d = det(ExprMatrix.from_rows(rows))
    for _ in range(5):
        p = {r3.symbol(n): rng.uniform(1, 2) for n in names}
        num = np.array([[evaluate(e, p) for e in row] for row in rows])
        assert evaluate(d, p) == pytest.approx(np.linalg.det(num), rel=1e-9, abs=1e-9)


def test_rank_generic(c3, c4):
    J = jacobian([c3.parse("x1/x0"), c3.parse("x2")], c3)
    assert rank_generic(J) == 2
    assert rank_generic(ExprMatrix.zeros(3, 3)) == 0
    g1 = VectorField.parse(c4, "x0, x1, 0, -x3")
    g2 = VectorField.parse(c4, "0, x1, x2, x3")
    assert rank_generic(field_matrix([g1, g2])) == 2
    assert rank_generic(field_matrix([g1, g1.scale(c4.parse("x2"))])) == 1


def test_solve_linear(c4):
    f = VectorField.parse(c4, "1, x2, x3, 0")
    g1 = VectorField.parse(c4, "x0, x1, 0, -x3")
    M = field_matrix([f, g1])
    assert solve_linear(M, [ZERO] * 4) == (ZERO, ZERO)
    assert solve_linear(field_matrix([f]), [-c for c in f.components]) == (-ONE,)
    b = [c4.parse("x1"), c4.parse("x2/x3"), c4.parse("7"), c4.parse("x0")]
    assert solve_linear(ExprMatrix.identity(4), b) == tuple(b)
    assert solve_linear(field_matrix([f]), g1.components) is None


def test_kernel_basis(r3):
    J = jacobian([r3.parse("x1^2 + x2^2"), r3.parse("x3")], r3)
    (k,) = kernel_basis(J)
    assert k in ((r3.parse("-x2"), r3.parse("x1"), ZERO), (r3.parse("x2"), r3.parse("-x1"), ZERO))
    assert kernel_basis(ExprMatrix.identity(3)) == []
    sigma = r3.parse("x1^2 + x2^2 + x3^2")
    ks = kernel_basis(jacobian([sigma], r3))
    assert len(ks) == 2
    for v in ks:
        assert lie_derivative(VectorField(r3, v), sigma).is_zero


def test_jacobian_entries(c4):
    J = jacobian([c4.parse("x0*x2/x1"), c4.parse("x0^2*x3/x1")], c4)
    assert (J.rows, J.cols) == (2, 4)
    assert J[0, 1] == c4.parse("-x0*x2/x1^2")
    one = VariableContext.create("x1")
    assert jacobian([one.parse("x1")], one).entries == (ONE,)


def test_rational_nullspace():
    basis = rational_nullspace([[1, 2, 3], {0: 2, 1: 4, 2: 6}], 3)
    assert len(basis) == 2
    for v in basis:
        assert sum(Fraction(c) * x for c, x in zip([1, 2, 3], v)) == 0
    assert rational_nullspace([], 2) == [[1, 0], [0, 1]]
