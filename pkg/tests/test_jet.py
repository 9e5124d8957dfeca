import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kkconformal import jet as J
from kkconformal.jet import Jet3, JetDomainError, JetError, SingularMatrixError

import oracles as O


def derivs_1d(j):
    return [j.partial(*([0] * k)) for k in range(4)]


def test_product_example():
    x = J.seed_variable(0, 0.0, 1)
    assert derivs_1d(J.arith(1.0 + x, 1.0 - x, "mul")) == pytest.approx([1.0, 0.0, -2.0, 0.0], abs=1e-15)


def test_reciprocal_example():
    x = J.seed_variable(0, 0.0, 1)
    assert derivs_1d(J.arith(Jet3.constant(1.0, 1), 1.0 + x, "div"))[1:] == pytest.approx([-1.0, 2.0, -6.0])


def test_sqrt_example():
    x = J.seed_variable(0, 4.0, 1)
    assert derivs_1d(J.elementary(x, "sqrt")) == pytest.approx([2.0, 0.25, -1 / 32, 3 / 256], rel=1e-14)


def test_sin_example():
    x = J.seed_variable(0, 0.0, 1)
    assert derivs_1d(J.elementary(x, "sin"))[1:] == pytest.approx([1.0, 0.0, -1.0], abs=1e-15)


def test_domain_errors():
    x = J.seed_variable(0, 0.0, 1)
    with pytest.raises(JetDomainError):
        J.sqrt(x)
    with pytest.raises(JetDomainError):
        J.log(x - 1.0)
    with pytest.raises(JetError):
        J.elementary(x, "tanh")
    with pytest.raises(JetError):
        J.arith(x, J.seed_variable(0, 0.0, 2), "add")
    with pytest.raises(JetError):
        x.partial(0, 0, 0, 0)


def test_singular_inverse_rejected():
    m = Jet3.constant(np.array([[1.0, 2.0], [2.0, 4.0]]), 2)
    with pytest.raises(SingularMatrixError):
        J.inv(m)


def test_mixed_partials_of_polynomial():
    x, y = J.seed_point([0.3, -0.7])
    f = x * x * y + J.pow_int(y, 3) * 2.0
    assert f.partial(0, 1) == pytest.approx(2 * 0.3)
    assert f.partial(1, 0) == pytest.approx(2 * 0.3)
    assert f.partial(0, 0, 1) == pytest.approx(2.0)
    assert f.partial(1, 1, 1) == pytest.approx(12.0)
    assert f.partial(0, 0, 0) == pytest.approx(0.0)


def test_matrix_inverse_derivatives_match_closed_form():
    # d(M^-1) = -M^-1 dM M^-1 for M(x) = A + x B
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    b = rng.normal(size=(4, 4))
    x = J.seed_variable(0, 0.0, 1)
    m = Jet3.constant(a, 1) + J.einsum(",ij->ij", x, b)
    inv = J.inv(m)
    ai = np.linalg.inv(a)
    assert np.allclose(inv.value, ai, atol=1e-13)
    assert np.allclose(inv.partial(0), -ai @ b @ ai, atol=1e-12)
    assert np.allclose(inv.partial(0, 0), 2 * ai @ b @ ai @ b @ ai, atol=1e-12)
    assert np.allclose(inv.partial(0, 0, 0), -6 * ai @ b @ ai @ b @ ai @ b @ ai, atol=1e-11)


@pytest.mark.parametrize("seed", range(12))
def test_random_expressions_against_finite_differences(seed):
    assert O.expression_derivative_errors(seed) <= 1e-9


finite = st.floats(-0.9, 0.9)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3), st.integers(0, 10_000))
def test_ring_axioms(point, seed):
    rng = np.random.default_rng(seed)
    xs = J.seed_point(point)
    a = O.jet_of(O.random_expression(rng, 3, 2), point)
    b = O.jet_of(O.random_expression(rng, 3, 2), point)
    c = O.jet_of(O.random_expression(rng, 3, 2), point)
    if not all(isinstance(t, Jet3) for t in (a, b, c)):
        return
    tol = 1e-10 * (1 + max(abs(t.coeffs).max() for t in (a, b, c))) ** 3
    assert O.close((a * b).coeffs, (b * a).coeffs, tol)
    assert O.close(((a * b) * c).coeffs, (a * (b * c)).coeffs, tol)
    assert O.close((a * (b + c)).coeffs, (a * b + a * c).coeffs, tol)
    assert O.close((a - a).coeffs, 0.0, 0.0)
    assert xs[0].dim == 3


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=2, max_size=2), st.floats(0.5, 3.0))
def test_multiplicative_inverse(point, shift):
    x, y = J.seed_point(point)
    a = J.exp(x * y) + shift * J.cos(y)
    if abs(a.value) < 0.05:
        return
    one = a * J.reciprocal(a)
    assert one.value == pytest.approx(1.0, abs=1e-13)
    assert np.abs(one.coeffs[1:]).max() < 1e-9 * max(1.0, abs(a.coeffs).max() ** 3 / abs(a.value) ** 3)


def test_einsum_product_rule():
    x, y = J.seed_point([0.2, 0.4])
    u = J.stack([x * y, J.sin(x), y * y])
    v = J.stack([J.exp(y), x, 1.0 + x * x])
    dot = J.einsum("i,i->", u, v)
    ref = x * y * J.exp(y) + J.sin(x) * x + y * y * (1.0 + x * x)
    assert O.close(dot.coeffs, ref.coeffs, 1e-14)


def test_grad_layout():
    x, y, z = J.seed_point([0.1, 0.2, 0.3])
    f = J.stack([x * y, y * z])
    g = f.grad()
    assert g.shape == (3, 2)
    assert g.value == pytest.approx(np.array([[0.2, 0.0], [0.1, 0.3], [0.0, 0.2]]))
    assert f.derivatives(2).shape == (2, 3, 3)
    assert math.isclose(f.derivatives(2)[0, 0, 1], 1.0)
