"""Local spaces W(T) = [P2]^2 + b*P*(T) and their 21 degrees of freedom.

Bases are built numerically on each physical triangle.  Polynomials live in
an affine frame (s, r) = G (x - c), c the centroid, in which the triangle is
the equilateral one with unit sides.  Monomial coefficients then stay small
even on thin triangles, where an isotropic frame would need cancelling
coefficients of size 1e6 and lose P2 reproduction to roundoff.

Local DOF order (21 functionals)::

    0..5    values at vertices 0, 1, 2      (x, y per vertex)
    6..11   values at midpoints of edges 0, 1, 2
    12..20  per edge j: 12+3j   (1/|e|) int d_n(w.n)
                        13+3j   (1/|e|) int d_n(w.n) tau
                        14+3j   (1/|e|) int d_n(w.t)

Edge j is opposite vertex j.  The normal n and tangent t of every edge are
the global ones (see :class:`sgfem.mesh.EdgeTopology`) and tau in [-1, 1]
runs along t, so both triangles sharing an edge evaluate identical moment
functionals.
"""

import enum
from dataclasses import dataclass

import numpy as np

from sgfem import polynomials as poly
from sgfem.quadrature import gauss_edge

N_DOFS = 21
N_BUBBLES = 9
NULLSPACE_RTOL = 1e-9
MAX_CONDITION = 1e12
EDGE_POINTS = 5


class ElementError(RuntimeError):
    """Raised when a local space cannot be built on some triangle."""

    def __init__(self, message, triangle=None):
        super().__init__(message if triangle is None else f"triangle {triangle}: {message}")
        self.triangle = triangle


class ElementVariant(enum.Enum):
    ONE = 1
    TWO = 2

    @property
    def bubble_degree(self):
        """Degree of the enrichment polynomials multiplied by the bubble."""
        return 2 if self is ElementVariant.ONE else 3

    @property
    def degree(self):
        return self.bubble_degree + 3

    @property
    def stiffness_degree(self):
        """Polynomial degree of the energy integrand on one triangle."""
        return 2 * (self.degree - 1)

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(int(value))
        except (ValueError, TypeError):
            raise ValueError(f"element variant must be 1 or 2, got {value!r}") from None


# Equilateral reference triangle with unit sides, centroid at the origin.
REFERENCE = np.array([[0.0, 1 / np.sqrt(3)], [-0.5, -0.5 / np.sqrt(3)], [0.5, -0.5 / np.sqrt(3)]])


@dataclass(frozen=True)
class PolyVec:
    """Vector polynomial in the affine frame of one triangle."""

    coeffs: np.ndarray  # (2, n_monomials(degree))
    degree: int
    centroid: np.ndarray
    frame: np.ndarray  # (2, 2), frame coordinates = frame @ (x - centroid)

    def __call__(self, x, y):
        d = np.stack([np.asarray(x, dtype=float) - self.centroid[0], np.asarray(y, dtype=float) - self.centroid[1]], -1)
        sr = d @ self.frame.T
        m = poly.evaluate_monomials(sr[..., 0], sr[..., 1], self.degree)[..., 0, :]
        return m @ self.coeffs.T


def _physical_jets(out, frame):
    """Frame jets (..., 6) to physical (value, gradient (..., 2), Hessian (..., 2, 2)).

    ``frame`` must broadcast against ``out[..., 0]`` with two trailing axes.
    """
    grad = np.einsum("...d,...dj->...j", out[..., 1:3], frame)
    H = np.stack([out[..., 3:5], out[..., 4:6]], axis=-1)
    hess = np.einsum("...de,...di,...ej->...ij", H, frame, frame, optimize=True)
    return out[..., 0], grad, hess


@dataclass(frozen=True)
class BasisJets:
    """Basis values, gradients and Hessians at points of each triangle.

    ``grads[..., c, j]`` is d(chi_c)/dx_j and ``hessians[..., c, i, j]`` is
    d2(chi_c)/dx_i dx_j; the leading axes are (triangle, point, basis).
    """

    points: np.ndarray  # (nT, nq, 2)
    values: np.ndarray  # (nT, nq, 21, 2)
    grads: np.ndarray  # (nT, nq, 21, 2, 2)
    hessians: np.ndarray  # (nT, nq, 21, 2, 2, 2)
    weights: np.ndarray | None = None  # (nT, nq), area already folded in


@dataclass(frozen=True)
class LocalBasis:
    """Dual bases of W(T) for a batch of triangles (leading axis)."""

    variant: ElementVariant
    vertices: np.ndarray  # (nT, 3, 2)
    centroid: np.ndarray  # (nT, 2)
    frame: np.ndarray  # (nT, 2, 2)
    normals: np.ndarray  # (nT, 3, 2) global normal of local edge j
    tangents: np.ndarray  # (nT, 3, 2)
    lengths: np.ndarray  # (nT, 3)
    coeffs: np.ndarray  # (nT, 21, 2, n_monomials(degree))
    condition: np.ndarray  # (nT,) condition of the scaled DOF matrix

    def __len__(self):
        return len(self.vertices)

    @property
    def areas(self):
        d1 = self.vertices[:, 1] - self.vertices[:, 0]
        d2 = self.vertices[:, 2] - self.vertices[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def functions(self, t=0):
        """The 21 basis functions of triangle ``t`` as PolyVec objects."""
        return [
            PolyVec(self.coeffs[t, i], self.variant.degree, self.centroid[t], self.frame[t])
            for i in range(N_DOFS)
        ]

    def physical_points(self, bary):
        """Map barycentric points (nq, 3) to (nT, nq, 2)."""
        return np.einsum("qi,tid->tqd", np.asarray(bary, dtype=float), self.vertices)

    def monomials_at(self, points):
        """Frame monomials and their frame derivatives at (nT, nq, 2) points."""
        sr = _to_frame(points, self.centroid, self.frame)
        return poly.evaluate_monomials(sr[..., 0], sr[..., 1], self.variant.degree)  # (nT, nq, 6, nm)

    def field_jets_at(self, dofs, points):
        """Values (nT, nq, 2), gradients and Hessians of sum_i dofs[:, i] chi_i.

        Contracts the DOFs into one polynomial per triangle before evaluating,
        which is much cheaper than :meth:`jets_at` followed by :meth:`combine`.
        """
        field = np.einsum("ti,ticm->tcm", dofs, self.coeffs)
        out = np.einsum("tqkm,tcm->tqck", self.monomials_at(points), field)
        return _physical_jets(out, self.frame[:, None, None])

    def project(self, values, points, weights):
        """Integrals sum_q weights * values . chi_i for every basis function.

        ``values`` is (nT, nq, 2); returns (nT, 21).
        """
        mono = self.monomials_at(points)[..., 0, :]
        moments = np.einsum("tq,tqc,tqm->tcm", weights, values, mono)
        return np.einsum("ticm,tcm->ti", self.coeffs, moments)

    def jets_at(self, points):
        """Evaluate all basis functions at per-triangle points (nT, nq, 2)."""
        nT, nq = points.shape[:2]
        mono = self.monomials_at(points)
        nm = mono.shape[-1]
        out = self.coeffs.reshape(nT, 2 * N_DOFS, nm) @ mono.reshape(nT, nq * 6, nm).transpose(0, 2, 1)
        out = out.reshape(nT, N_DOFS, 2, nq, 6).transpose(0, 3, 1, 2, 4)  # (nT, nq, 21, 2, 6)
        return BasisJets(points, *_physical_jets(out, self.frame[:, None, None, None]))

    def combine(self, dofs, jets):
        """Field jets of coefficient vectors ``dofs`` (nT, 21) from BasisJets.

        Returns (values, grads, hessians) with shapes (nT, nq, 2), (nT, nq, 2, 2)
        and (nT, nq, 2, 2, 2).
        """
        return (
            np.einsum("ti,tqic->tqc", dofs, jets.values),
            np.einsum("ti,tqicd->tqcd", dofs, jets.grads),
            np.einsum("ti,tqicde->tqcde", dofs, jets.hessians),
        )

    def edge_points(self, tau):
        """Points x(tau) = mid + tau |e|/2 t on every local edge: (nT, 3, len(tau), 2)."""
        mid = 0.5 * (self.vertices[:, [1, 2, 0]] + self.vertices[:, [2, 0, 1]])
        tau = np.asarray(tau, dtype=float)
        return mid[:, :, None, :] + (
            tau[None, None, :, None] * (0.5 * self.lengths)[:, :, None, None] * self.tangents[:, :, None, :]
        )


def eval_basis(basis, rule):
    """Cache basis jets at the points of a triangle quadrature rule."""
    jets = basis.jets_at(basis.physical_points(rule.points))
    weights = basis.areas[:, None] * rule.weights[None, :]
    return BasisJets(jets.points, jets.values, jets.grads, jets.hessians, weights)


def _geometry(vertices, signs):
    vertices = np.asarray(vertices, dtype=float)
    signs = np.asarray(signs, dtype=float)
    a = vertices[:, [1, 2, 0]]
    b = vertices[:, [2, 0, 1]]
    d = b - a
    lengths = np.linalg.norm(d, axis=2)
    outward = np.stack([d[..., 1], -d[..., 0]], axis=-1) / lengths[..., None]
    normals = signs[..., None] * outward
    tangents = np.stack([-normals[..., 1], normals[..., 0]], axis=-1)
    centroid = vertices.mean(axis=1)
    edges = np.stack([vertices[:, 1] - vertices[:, 0], vertices[:, 2] - vertices[:, 0]], axis=-1)
    ref = np.stack([REFERENCE[1] - REFERENCE[0], REFERENCE[2] - REFERENCE[0]], axis=-1)
    frame = ref @ np.linalg.inv(edges)
    return vertices, centroid, frame, normals, tangents, lengths


def _to_frame(points, centroid, frame):
    """Frame coordinates of points (nT, ..., 2)."""
    extra = points.ndim - 2
    c = centroid.reshape((len(centroid),) + (1,) * extra + (2,))
    G = frame.reshape((len(frame),) + (1,) * extra + (2, 2))
    return np.einsum("...ij,...j->...i", G, points - c)


def _barycentric_polys(svert):
    """Coefficients (nT, 3, 3) of lambda_i in the basis (1, s, r)."""
    nT = len(svert)
    M = np.concatenate([np.ones((nT, 3, 1)), svert], axis=2)
    return np.linalg.inv(M).transpose(0, 2, 1)


def _edge_trace_legendre(svert, normals, degree):
    """Rows mapping [P_degree]^2 coefficients to Legendre coefficients of
    degrees 2..degree of the trace of p.n on each edge.

    Returns (nT, 3 * (degree - 1), 2 * n_monomials(degree)).
    """
    tau, w = gauss_edge(EDGE_POINTS)
    a = svert[:, [1, 2, 0]]
    b = svert[:, [2, 0, 1]]
    pts = 0.5 * (a + b)[:, :, None, :] + 0.5 * tau[None, None, :, None] * (b - a)[:, :, None, :]
    mono = poly.evaluate_monomials(pts[..., 0], pts[..., 1], degree)[..., 0, :]  # (nT, 3, g, nm)
    rows = []
    for k in range(2, degree + 1):
        Pk = np.polynomial.legendre.legval(tau, np.eye(degree + 1)[k])
        proj = (2 * k + 1) / 2 * np.einsum("g,tegm->tem", w * Pk, mono)
        rows.append(np.concatenate([normals[..., 0:1] * proj, normals[..., 1:2] * proj], axis=-1))
    nT = len(svert)
    return np.stack(rows, axis=2).reshape(nT, 3 * (degree - 1), -1)


def pre_bubble_basis(vertices, signs, variant):
    """Bases (nT, 9, 2, n_monomials(q)) of P2*(T) or P3*(T) in the scaled frame.

    The constraint matrix is assembled per triangle and its nullspace taken by
    SVD with a relative threshold of 1e-9.
    """
    variant = ElementVariant.parse(variant)
    vertices, centroid, frame, normals, _, _ = _geometry(vertices, signs)
    svert = _to_frame(vertices, centroid, frame)
    q = variant.bubble_degree
    C = _edge_trace_legendre(svert, normals, q)
    if variant is ElementVariant.TWO:
        # physical divergence: d/dx_c = sum_d frame[d, c] d/ds_d
        Ds, Dr = poly.derivative_matrices(q)
        div = np.concatenate(
            [frame[:, 0, c, None, None] * Ds + frame[:, 1, c, None, None] * Dr for c in range(2)], axis=2
        )
        C = np.concatenate([C, div[:, 1:]], axis=1)
    _, sv, vh = np.linalg.svd(C, full_matrices=True)
    rank = np.sum(sv > NULLSPACE_RTOL * sv[:, :1], axis=1)
    n = C.shape[2]
    bad = np.flatnonzero(n - rank != N_BUBBLES)
    if len(bad):
        raise ElementError(
            f"enrichment nullspace has dimension {n - rank[bad[0]]}, expected {N_BUBBLES}",
            triangle=int(bad[0]),
        )
    null = vh[:, n - N_BUBBLES :, :]
    return null.reshape(len(C), N_BUBBLES, 2, -1)


def _bubble(svert):
    """27 * lambda_0 lambda_1 lambda_2 as (nT, 10) cubic coefficients."""
    lam = _barycentric_polys(svert)
    b = poly.multiply(lam[:, 0], lam[:, 1], 1, 1)
    return 27.0 * poly.multiply(b, lam[:, 2], 2, 1)


def _lagrange_p2(svert, degree):
    """Vector [P2]^2 Lagrange functions ordered like DOFs 0..11: (nT, 12, 2, nm)."""
    lam = _barycentric_polys(svert)
    lam2 = poly.embed(lam, 2)
    scalar = []
    for i in range(3):
        scalar.append(2 * poly.multiply(lam[:, i], lam[:, i], 1, 1) - lam2[:, i])
    for j in range(3):
        scalar.append(4 * poly.multiply(lam[:, (j + 1) % 3], lam[:, (j + 2) % 3], 1, 1))
    scalar = poly.embed(np.stack(scalar, axis=1), degree)  # (nT, 6, nm)
    out = np.zeros((len(svert), 12, 2, scalar.shape[-1]))
    out[:, 0::2, 0] = scalar
    out[:, 1::2, 1] = scalar
    return out


def _dof_matrix(span, svert, signs, frame, normals, tangents, scale, degree):
    """DOF functionals applied to spanning functions: (nT, 21, n).

    Moment rows are multiplied by ``scale`` so that all rows are O(1).
    """
    nT, n = span.shape[:2]
    mids = 0.5 * (svert[:, [1, 2, 0]] + svert[:, [2, 0, 1]])
    nodes = np.concatenate([svert, mids], axis=1)  # (nT, 6, 2)
    mono = poly.evaluate_monomials(nodes[..., 0], nodes[..., 1], degree)[..., 0, :]
    vals = np.einsum("tpm,ticm->tpci", mono, span).reshape(nT, 12, n)

    tau, w = gauss_edge(EDGE_POINTS)
    half = 0.5 * signs[:, :, None] * (svert[:, [2, 0, 1]] - svert[:, [1, 2, 0]])
    pts = mids[:, :, None, :] + tau[None, None, :, None] * half[:, :, None, :]
    md = poly.evaluate_monomials(pts[..., 0], pts[..., 1], degree)  # (nT, 3, g, 6, nm)
    fgrad = np.einsum("tegdm,ticm->tegicd", md[..., 1:3, :], span)
    grad = scale[:, None, None, None, None, None] * np.einsum("tegicd,tdj->tegicj", fgrad, frame)
    dnn = np.einsum("tegicd,tec,ted->tegi", grad, normals, normals)
    dnt = np.einsum("tegicd,tec,ted->tegi", grad, tangents, normals)
    m0 = 0.5 * np.einsum("g,tegi->tei", w, dnn)
    m1 = 0.5 * np.einsum("g,tegi->tei", w * tau, dnn)
    mt = 0.5 * np.einsum("g,tegi->tei", w, dnt)
    moments = np.stack([m0, m1, mt], axis=2).reshape(nT, 9, n)
    return np.concatenate([vals, moments], axis=1)


def build_local_bases(vertices, signs, variant, check=True):
    """Dual bases of W(T) on a batch of triangles.

    Parameters
    ----------
    vertices : (nT, 3, 2) array, counterclockwise
    signs : (nT, 3) array of +-1; the global normal of local edge j equals
        ``signs[:, j]`` times the outward normal.
    variant : ElementVariant or 1/2
    check : bool
        Raise ElementError when a scaled DOF matrix has condition > 1e12.
    """
    variant = ElementVariant.parse(variant)
    signs = np.asarray(signs, dtype=float)
    vertices, centroid, frame, normals, tangents, lengths = _geometry(vertices, signs)
    svert = _to_frame(vertices, centroid, frame)
    scale = lengths.max(axis=1)
    D = variant.degree
    q = variant.bubble_degree

    pre = pre_bubble_basis(vertices, signs, variant)
    bubbles = poly.multiply(pre, _bubble(svert)[:, None, None, :], q, 3)
    span = np.concatenate([_lagrange_p2(svert, D), poly.embed(bubbles, D)], axis=1)

    V = _dof_matrix(span, svert, signs, frame, normals, tangents, scale, D)
    cond = np.linalg.cond(V)
    if check:
        bad = np.flatnonzero(~(cond <= MAX_CONDITION))
        if len(bad):
            raise ElementError(f"DOF matrix condition {cond[bad[0]]:.3e} exceeds {MAX_CONDITION:.0e}", int(bad[0]))
    # Bubbles vanish at the nodes and the Lagrange functions are nodal, so V
    # is block lower triangular with an identity corner; inverting only the
    # moment block keeps P2 reproduction exact up to that block's roundoff.
    inv22 = np.linalg.inv(V[:, 12:, 12:])
    C = np.zeros_like(V)  # (nT, span, dof)
    C[:, :12, :12] = np.eye(12)
    C[:, 12:, :12] = -inv22 @ V[:, 12:, :12]
    C[:, 12:, 12:] = inv22
    C[:, :, 12:] *= scale[:, None, None]
    coeffs = np.einsum("tik,ticm->tkcm", C, span)
    return LocalBasis(variant, vertices, centroid, frame, normals, tangents, lengths, coeffs, cond)


def local_basis(triangle, signs=(1, 1, 1), variant=ElementVariant.ONE):
    """Dual basis of W(T) on a single triangle given as a (3, 2) array."""
    return build_local_bases(np.asarray(triangle, dtype=float)[None], np.asarray(signs)[None], variant)


def bubble_space_basis(triangle, variant, signs=(1, 1, 1)):
    """The nine functions b*p, p running over the SVD basis of P2* or P3*."""
    basis_pre = pre_bubble_basis(np.asarray(triangle, dtype=float)[None], np.asarray(signs)[None], variant)
    verts, centroid, frame, *_ = _geometry(np.asarray(triangle, dtype=float)[None], np.asarray(signs)[None])
    svert = _to_frame(verts, centroid, frame)
    variant = ElementVariant.parse(variant)
    q = variant.bubble_degree
    prod = poly.multiply(basis_pre, _bubble(svert)[:, None, None, :], q, 3)[0]
    return [PolyVec(prod[i], q + 3, centroid[0], frame[0]) for i in range(N_BUBBLES)]


def dof_values(basis, field):
    """Apply the 21 DOF functionals of every triangle to a smooth field.

    ``field(x, y)`` must return an object with ``u`` (..., 2) and ``grad``
    (..., 2, 2) attributes (a :class:`sgfem.model.SolutionJet`).
    Returns (nT, 21).
    """
    nT = len(basis)
    mids = 0.5 * (basis.vertices[:, [1, 2, 0]] + basis.vertices[:, [2, 0, 1]])
    nodes = np.concatenate([basis.vertices, mids], axis=1)
    jet = field(nodes[..., 0], nodes[..., 1])
    vals = np.asarray(jet.u).reshape(nT, 12)
    tau, w = gauss_edge(EDGE_POINTS)
    pts = basis.edge_points(tau)
    g = field(pts[..., 0], pts[..., 1]).grad  # (nT, 3, ng, 2, 2)
    dnn = np.einsum("tegcd,tec,ted->teg", g, basis.normals, basis.normals)
    dnt = np.einsum("tegcd,tec,ted->teg", g, basis.tangents, basis.normals)
    m = np.stack(
        [0.5 * dnn @ w, 0.5 * dnn @ (w * tau), 0.5 * dnt @ w], axis=2
    ).reshape(nT, 9)
    return np.concatenate([vals, m], axis=1)


def interpolate_local(triangle, field, variant=ElementVariant.ONE, signs=(1, 1, 1)):
    """Coefficients of Pi_T v on one triangle, plus the basis used."""
    basis = local_basis(triangle, signs, variant)
    return dof_values(basis, field)[0], basis
