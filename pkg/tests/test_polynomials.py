import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgfem import polynomials as poly


def test_lower_degree_coefficients_are_a_prefix():
    for d in range(1, 7):
        assert np.array_equal(poly.exponents(d)[: poly.n_monomials(d - 1)], poly.exponents(d - 1))
        for i, (a, b) in enumerate(poly.exponents(d)):
            assert poly.monomial_index(a, b) == i


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_multiply_matches_pointwise_product(seed):
    rng = np.random.default_rng(seed)
    p, q = rng.standard_normal(poly.n_monomials(3)), rng.standard_normal(poly.n_monomials(2))
    s, r = rng.uniform(-1, 1, (2, 7))
    prod = poly.multiply(p, q, 3, 2)
    mp = poly.evaluate_monomials(s, r, 3)[:, 0]
    mq = poly.evaluate_monomials(s, r, 2)[:, 0]
    mpq = poly.evaluate_monomials(s, r, 5)[:, 0]
    assert np.allclose(mpq @ prod, (mp @ p) * (mq @ q), atol=1e-12)


def test_derivatives_against_finite_differences(rng):
    d = 5
    c = rng.standard_normal(poly.n_monomials(d))
    s, r, eps = 0.3, -0.2, 1e-6
    jet = poly.evaluate_monomials(s, r, d) @ c

    def val(a, b):
        return poly.evaluate_monomials(a, b, d)[0] @ c

    assert jet[1] == pytest.approx((val(s + eps, r) - val(s - eps, r)) / (2 * eps), rel=1e-7)
    assert jet[2] == pytest.approx((val(s, r + eps) - val(s, r - eps)) / (2 * eps), rel=1e-7)
    e2 = 1e-4
    assert jet[3] == pytest.approx((val(s + e2, r) - 2 * val(s, r) + val(s - e2, r)) / e2**2, rel=1e-5)
    mixed = (val(s + e2, r + e2) - val(s + e2, r - e2) - val(s - e2, r + e2) + val(s - e2, r - e2)) / (4 * e2**2)
    assert jet[4] == pytest.approx(mixed, rel=1e-5)


def test_derivative_matrices_match_evaluation(rng):
    d = 6
    c = rng.standard_normal(poly.n_monomials(d))
    Ds, Dr = poly.derivative_matrices(d)
    s, r = rng.uniform(-1, 1, (2, 9))
    jet = poly.evaluate_monomials(s, r, d) @ c
    low = poly.evaluate_monomials(s, r, d - 1)[:, 0]
    assert np.allclose(low @ (Ds @ c), jet[:, 1])
    assert np.allclose(low @ (Dr @ c), jet[:, 2])


def test_embed_pads_with_zeros():
    p = np.arange(poly.n_monomials(2), dtype=float)
    e = poly.embed(p, 4)
    assert e.shape == (poly.n_monomials(4),)
    assert np.array_equal(e[: len(p)], p) and not e[len(p):].any()
