"""Material law, manufactured solution and body force on the unit square.

The benchmark displacement is

    u1 = (exp(cos 2 pi x) - e) (exp(cos 2 pi y) - e)
    u2 = (cos 2 pi x - 1) (cos 4 pi y - 1)

and the load is f = (iota^2 Lap - I)(mu Lap u + (lambda + mu) grad div u).
Both components are products of one-dimensional factors, so every partial
derivative is a product of closed-form factor derivatives.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class MaterialParams:
    lam: float
    mu: float
    iota: float

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lambda must satisfy lambda>=0 (got {self.lam})")
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must satisfy mu>0 (got {self.mu})")
        if not (0 < self.iota <= 1):
            raise ValueError(f"iota must satisfy 0<iota<=1 (got {self.iota})")


@dataclass(frozen=True)
class SolutionJet:
    """Value, gradient and Hessian of a vector field at a batch of points.

    ``grad[..., i, j]`` is du_i/dx_j, ``hess[..., k, i, j]`` is d2u_k/dx_i dx_j.
    """

    u: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    def __sub__(self, other):
        return SolutionJet(self.u - other.u, self.grad - other.grad, self.hess - other.hess)


def strain_features(grad, hess):
    """Strain, divergence, strain gradient and divergence gradient."""
    eps = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    div = grad[..., 0, 0] + grad[..., 1, 1]
    # d_i eps_jk = (u_j,ki + u_k,ji) / 2, stored as [..., i, j, k]
    du = np.moveaxis(hess, -3, -1)  # [..., i, j, c] = d_i d_j u_c
    grad_eps = 0.5 * (du + np.swapaxes(du, -1, -2))
    grad_div = hess[..., 0, 0, :] + hess[..., 1, 1, :]
    return eps, div, grad_eps, grad_div


def energy_density_pair(jet_a, jet_b, params):
    """Polarized energy integrand of the strain gradient model.

    2 mu eps(A):eps(B) + lambda div A div B
        + iota^2 (2 mu grad eps(A) : grad eps(B) + lambda grad div A . grad div B)
    """
    ea, da, gea, gda = strain_features(jet_a.grad, jet_a.hess)
    eb, db, geb, gdb = strain_features(jet_b.grad, jet_b.hess)
    lam, mu, i2 = params.lam, params.mu, params.iota**2
    first = 2 * mu * np.sum(ea * eb, axis=(-1, -2)) + lam * da * db
    second = 2 * mu * np.sum(gea * geb, axis=(-1, -2, -3)) + lam * np.sum(gda * gdb, axis=-1)
    return first + i2 * second


def _g(s):
    """exp(cos 2 pi s) - e and its first four derivatives."""
    k = TWO_PI
    c, sn = np.cos(k * s), np.sin(k * s)
    E = np.exp(c)
    return np.stack(
        [
            E - np.e,
            -k * sn * E,
            k**2 * E * (sn**2 - c),
            k**3 * E * sn * (c**2 + 3 * c),
            k**4 * E * (c**4 + 6 * c**3 + 5 * c**2 - 5 * c - 3),
        ]
    )


def _cos_factor(s, k):
    """cos(k s) - 1 and its first four derivatives."""
    c, sn = np.cos(k * s), np.sin(k * s)
    return np.stack([c - 1, -k * sn, -(k**2) * c, k**3 * sn, k**4 * c])


def _factor_tables(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (_g(x), _g(y)), (_cos_factor(x, TWO_PI), _cos_factor(y, 2 * TWO_PI))


def _partial(tables, comp, a, b):
    fx, fy = tables[comp]
    return fx[a] * fy[b]


def exact_solution(x, y):
    """Jet of the benchmark displacement at points (x, y)."""
    t = _factor_tables(x, y)
    d = lambda c, a, b: _partial(t, c, a, b)  # noqa: E731
    u = np.stack([d(0, 0, 0), d(1, 0, 0)], axis=-1)
    grad = np.stack(
        [np.stack([d(c, 1, 0), d(c, 0, 1)], axis=-1) for c in (0, 1)], axis=-2
    )
    hess = np.stack(
        [
            np.stack(
                [
                    np.stack([d(c, 2, 0), d(c, 1, 1)], axis=-1),
                    np.stack([d(c, 1, 1), d(c, 0, 2)], axis=-1),
                ],
                axis=-2,
            )
            for c in (0, 1)
        ],
        axis=-3,
    )
    return SolutionJet(u, grad, hess)


def body_force_parts(x, y, lam, mu):
    """Return (L u, Lap L u) with L u = mu Lap u + (lambda + mu) grad div u."""
    t = _factor_tables(x, y)
    d = lambda c, a, b: _partial(t, c, a, b)  # noqa: E731
    lm = lam + mu
    L1 = mu * (d(0, 2, 0) + d(0, 0, 2)) + lm * (d(0, 2, 0) + d(1, 1, 1))
    L2 = mu * (d(1, 2, 0) + d(1, 0, 2)) + lm * (d(0, 1, 1) + d(1, 0, 2))
    LL1 = mu * (d(0, 4, 0) + 2 * d(0, 2, 2) + d(0, 0, 4)) + lm * (
        d(0, 4, 0) + d(0, 2, 2) + d(1, 3, 1) + d(1, 1, 3)
    )
    LL2 = mu * (d(1, 4, 0) + 2 * d(1, 2, 2) + d(1, 0, 4)) + lm * (
        d(0, 3, 1) + d(0, 1, 3) + d(1, 2, 2) + d(1, 0, 4)
    )
    return np.stack([L1, L2], axis=-1), np.stack([LL1, LL2], axis=-1)


def body_force(x, y, params):
    """f = iota^2 Lap(L u) - L u for the benchmark displacement."""
    L, LL = body_force_parts(x, y, params.lam, params.mu)
    return params.iota**2 * LL - L


def zero_solution(x, y):
    shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
    return SolutionJet(np.zeros(shape + (2,)), np.zeros(shape + (2, 2)), np.zeros(shape + (2, 2, 2)))


def zero_force(x, y, params):
    shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
    return np.zeros(shape + (2,))


@dataclass(frozen=True)
class Problem:
    name: str
    solution: Callable
    force: Callable


BENCHMARK = Problem("benchmark", exact_solution, body_force)
ZERO = Problem("zero", zero_solution, zero_force)
