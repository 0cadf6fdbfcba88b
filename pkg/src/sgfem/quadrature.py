"""Quadrature rules on triangles and edges."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 20


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on a triangle in barycentric coordinates.

    Weights sum to one, so ``area * sum(w * f)`` approximates the integral
    of ``f`` over any triangle.
    """

    degree: int
    points: np.ndarray  # (nq, 3) barycentric triples
    weights: np.ndarray  # (nq,)

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def quadrature(degree):
    """Collapsed Gauss-Jacobi rule exact for polynomials of total ``degree``.

    Built from the Duffy map (u, v) -> (u (1 - v), v) of the unit square onto
    the reference triangle; the Jacobian factor (1 - v) is absorbed into a
    Gauss-Jacobi rule in v, so all weights are positive.
    """
    if not isinstance(degree, (int, np.integer)) or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree!r}; need 1..{MAX_DEGREE}")
    k = (degree + 2) // 2
    t_leg, w_leg = np.polynomial.legendre.leggauss(k)
    t_jac, w_jac = roots_jacobi(k, 1.0, 0.0)
    u = (t_leg + 1) / 2
    v = (t_jac + 1) / 2
    U, V = np.meshgrid(u, v, indexing="ij")
    x = (U * (1 - V)).ravel()
    y = V.ravel()
    w = np.outer(w_leg / 2, w_jac / 4).ravel()
    points = np.column_stack([1 - x - y, x, y])
    return QuadratureRule(int(degree), points, w / w.sum())


@lru_cache(maxsize=None)
def gauss_edge(n=5):
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(n)
