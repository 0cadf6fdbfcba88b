"""Bivariate monomial arithmetic on coefficient arrays.

Monomials s**a * r**b with a + b <= d are ordered by total degree and then by
the power of r, so the coefficients of a degree-d polynomial are a prefix of
the coefficients of the same polynomial viewed at any higher degree.
"""

from functools import lru_cache

import numpy as np


def n_monomials(degree):
    return (degree + 1) * (degree + 2) // 2


@lru_cache(maxsize=None)
def exponents(degree):
    """Return an (n, 2) integer array of (a, b) exponent pairs."""
    out = [(k - b, b) for k in range(degree + 1) for b in range(k + 1)]
    return np.array(out, dtype=int)


def monomial_index(a, b):
    k = a + b
    return k * (k + 1) // 2 + b


@lru_cache(maxsize=None)
def multiplication_tensor(d1, d2):
    """Tensor T with (p*q)[k] = sum_ij T[i, j, k] p[i] q[j]."""
    e1, e2 = exponents(d1), exponents(d2)
    T = np.zeros((len(e1), len(e2), n_monomials(d1 + d2)))
    for i, (a1, b1) in enumerate(e1):
        for j, (a2, b2) in enumerate(e2):
            T[i, j, monomial_index(a1 + a2, b1 + b2)] = 1.0
    return T


def multiply(p, q, d1, d2):
    """Product of batched polynomials p (..., n(d1)) and q (..., n(d2))."""
    return np.einsum("...i,...j,ijk->...k", p, q, multiplication_tensor(d1, d2))


def embed(p, degree_to):
    """Zero-pad coefficients along the last axis up to ``degree_to``."""
    n = n_monomials(degree_to)
    pad = [(0, 0)] * (p.ndim - 1) + [(0, n - p.shape[-1])]
    return np.pad(p, pad)


def evaluate_monomials(s, r, degree):
    """Monomials and their derivatives up to order two.

    Parameters
    ----------
    s, r : array_like
        Coordinates of equal shape ``S``.
    degree : int

    Returns
    -------
    ndarray of shape ``S + (6, n_monomials(degree))`` holding, in order,
    the value and the derivatives d/ds, d/dr, d2/ds2, d2/dsdr, d2/dr2.
    """
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    e = exponents(degree)
    a, b = e[:, 0], e[:, 1]
    sp = s[..., None] ** np.arange(degree + 1)
    rp = r[..., None] ** np.arange(degree + 1)

    def power(table, k):
        return table[..., np.maximum(k, 0)]

    out = np.empty(s.shape + (6, len(e)))
    out[..., 0, :] = power(sp, a) * power(rp, b)
    out[..., 1, :] = a * power(sp, a - 1) * power(rp, b)
    out[..., 2, :] = b * power(sp, a) * power(rp, b - 1)
    out[..., 3, :] = a * (a - 1) * power(sp, a - 2) * power(rp, b)
    out[..., 4, :] = a * b * power(sp, a - 1) * power(rp, b - 1)
    out[..., 5, :] = b * (b - 1) * power(sp, a) * power(rp, b - 2)
    return out


def derivative_matrices(degree):
    """Maps (d/ds, d/dr) from P_degree coefficients to P_(degree-1) ones."""
    e = exponents(degree)
    Ds = np.zeros((n_monomials(degree - 1), len(e)))
    Dr = np.zeros_like(Ds)
    for i, (a, b) in enumerate(e):
        if a > 0:
            Ds[monomial_index(a - 1, b), i] = a
        if b > 0:
            Dr[monomial_index(a, b - 1), i] = b
    return Ds, Dr
