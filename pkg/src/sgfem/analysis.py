"""Error norms, interpolation, convergence rates and stability probes."""

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from sgfem.assembly import LOAD_DEGREE, Discretization
from sgfem.element import dof_values
from sgfem.model import SolutionJet, energy_density_pair
from sgfem.quadrature import gauss_edge, quadrature


class ProbeError(RuntimeError):
    pass


def _chunk_jets(disc, coeffs, degree):
    """Yield (basis, quad weights, points, discrete SolutionJet) per chunk."""
    rule = quadrature(degree)
    local = disc.local_coefficients(coeffs)
    for sl, basis in disc.chunks():
        pts = basis.physical_points(rule.points)
        w = basis.areas[:, None] * rule.weights[None, :]
        v, g, H = basis.field_jets_at(local[sl], pts)
        yield basis, w, pts, SolutionJet(v, g, H)


def energy_norm_error(disc, coeffs, solution, params, degree=LOAD_DEGREE):
    """Absolute and relative energy-norm distance between u_h and ``solution``.

    The relative error is the absolute one when the exact solution has zero
    energy (only possible for the zero solution).
    """
    err2 = ref2 = 0.0
    for _, w, pts, uh in _chunk_jets(disc, coeffs, degree):
        u = solution(pts[..., 0], pts[..., 1])
        diff = u - uh
        err2 += float(np.sum(w * energy_density_pair(diff, diff, params)))
        ref2 += float(np.sum(w * energy_density_pair(u, u, params)))
    err, ref = math.sqrt(max(err2, 0.0)), math.sqrt(max(ref2, 0.0))
    return err, (err / ref if ref > 0 else err)


class BrokenNorms(NamedTuple):
    l2: float
    h1_semi: float
    h2_semi: float

    @property
    def h1(self):
        return math.hypot(self.l2, self.h1_semi)

    @property
    def h2(self):
        return math.sqrt(self.l2**2 + self.h1_semi**2 + self.h2_semi**2)


def broken_norms(disc, coeffs, solution=None, degree=LOAD_DEGREE):
    """L2 norm and broken H1/H2 seminorms of u_h (minus ``solution`` if given)."""
    s0 = s1 = s2 = 0.0
    for _, w, pts, uh in _chunk_jets(disc, coeffs, degree):
        v = uh if solution is None else solution(pts[..., 0], pts[..., 1]) - uh
        s0 += float(np.sum(w * np.sum(v.u**2, axis=-1)))
        s1 += float(np.sum(w * np.sum(v.grad**2, axis=(-1, -2))))
        s2 += float(np.sum(w * np.sum(v.hess**2, axis=(-1, -2, -3))))
    return BrokenNorms(math.sqrt(s0), math.sqrt(s1), math.sqrt(s2))


def global_interpolant(disc, solution):
    """Coefficients of I_h u, with edge DOFs computed once per global edge."""
    mesh, top, dm = disc.mesh, disc.topology, disc.dofmap
    out = np.zeros(dm.n_dofs)
    V = mesh.vertices
    vj = solution(V[:, 0], V[:, 1])
    out[: 2 * dm.n_vertices] = np.asarray(vj.u).ravel()

    mid = top.midpoints(V)
    mj = solution(mid[:, 0], mid[:, 1])
    tau, w = gauss_edge()
    pts = mid[:, None, :] + tau[None, :, None] * (0.5 * top.lengths)[:, None, None] * top.tangents[:, None, :]
    g = solution(pts[..., 0], pts[..., 1]).grad  # (nE, ng, 2, 2)
    dnn = np.einsum("egcd,ec,ed->eg", g, top.normals, top.normals)
    dnt = np.einsum("egcd,ec,ed->eg", g, top.tangents, top.normals)
    block = np.column_stack(
        [np.asarray(mj.u), 0.5 * dnn @ w, 0.5 * dnn @ (w * tau), 0.5 * dnt @ w]
    )
    out[2 * dm.n_vertices :] = block.ravel()
    return out


def local_interpolant(disc, solution):
    """Per-triangle DOFs of Pi_T u (nT, 21), computed triangle by triangle."""
    return np.concatenate([dof_values(basis, solution) for _, basis in disc.chunks()])


def weak_residual(disc, problem, params, degree=LOAD_DEGREE):
    """Vector of a_h(u, chi_i) - (f, chi_i) over all global basis functions."""
    rule = quadrature(degree)
    r = np.zeros(disc.n_dofs)
    for sl, basis in disc.chunks():
        pts = basis.physical_points(rule.points)
        jets = basis.jets_at(pts)
        w = basis.areas[:, None] * rule.weights[None, :]
        u = problem.solution(pts[..., 0], pts[..., 1])
        ue = SolutionJet(u.u[:, :, None], u.grad[:, :, None], u.hess[:, :, None])
        chi = SolutionJet(jets.values, jets.grads, jets.hessians)
        a = np.einsum("tq,tqi->ti", w, energy_density_pair(ue, chi, params))
        f = problem.force(pts[..., 0], pts[..., 1], params)
        b = np.einsum("tq,tqc,tqic->ti", w, f, jets.values)
        np.add.at(r, disc.dofmap.tri_dofs[sl].ravel(), (a - b).ravel())
    return r


def consistency_term(disc, problem, params, n_points=12):
    """Edge functional sum_T int_dT n_i n_j tau_ijk d_n chi_k for every chi.

    tau_ijk = iota^2 d_i sigma_jk is the couple stress of the exact solution
    and n the outward normal of T.  For the exact solution, a_h(u, chi) -
    (f, chi) equals this term up to quadrature error.
    """
    tau, w = gauss_edge(n_points)
    i2 = params.iota**2
    out = np.zeros(disc.n_dofs)
    for sl, basis in disc.chunks():
        nT = len(basis)
        pts = basis.edge_points(tau)  # (nT, 3, g, 2)
        jets = basis.jets_at(pts.reshape(nT, -1, 2))
        grads = jets.grads.reshape(nT, 3, len(tau), 21, 2, 2)
        signs = disc.topology.tri_signs[sl]
        n_out = signs[:, :, None] * basis.normals  # (nT, 3, 2)
        H = problem.solution(pts[..., 0], pts[..., 1]).hess  # (nT, 3, g, k, i, j)
        # d_i sigma_jk = 2 mu d_i eps_jk + lambda d_i div delta_jk
        d_eps = 0.5 * (np.einsum("tegjik->tegijk", H) + np.einsum("tegkij->tegijk", H))
        d_div = H[..., 0, 0, :] + H[..., 1, 1, :]  # (nT, 3, g, i)
        d_sigma = 2 * params.mu * d_eps + params.lam * d_div[..., :, None, None] * np.eye(2)
        couple = i2 * np.einsum("tegijk,tei,tej->tegk", d_sigma, n_out, n_out)
        dn_chi = np.einsum("tegakd,ted->tegak", grads, n_out)
        wl = 0.5 * basis.lengths[:, :, None] * w[None, None, :]
        local = np.einsum("teg,tegk,tegak->ta", wl, couple, dn_chi)
        np.add.at(out, disc.dofmap.tri_dofs[sl].ravel(), local.ravel())
    return out


@dataclass(frozen=True)
class EdgeJumps:
    value: np.ndarray  # (nInterior,) max |[v]| over sample points
    normal_moments: np.ndarray  # (nInterior, 2) |int_e [d_n(v.n)] tau^k|
    tangential_moment: np.ndarray  # (nInterior,) |int_e [d_n(v.t)]|


def edge_jumps(disc, coeffs, n_samples=20, n_gauss=5):
    """Jumps of a discrete field across every interior edge."""
    top = disc.topology
    interior = np.flatnonzero(~top.boundary)
    tri = top.edge_triangles[interior]
    side_local = np.zeros_like(tri)
    for s in range(2):
        side_local[:, s] = np.argmax(top.tri_edges[tri[:, s]] == interior[:, None], axis=1)

    samples = np.linspace(-1, 1, n_samples)
    tau, w = gauss_edge(n_gauss)
    allp = np.concatenate([samples, tau])
    local = disc.local_coefficients(coeffs)
    vals = np.empty((disc.mesh.n_triangles, 3, n_samples, 2))
    mom = np.empty((disc.mesh.n_triangles, 3, 3))
    for sl, basis in disc.chunks():
        nT = len(basis)
        pts = basis.edge_points(allp)
        jets = basis.jets_at(pts.reshape(nT, -1, 2))
        v, g, _ = basis.combine(local[sl], jets)
        v = v.reshape(nT, 3, len(allp), 2)
        g = g.reshape(nT, 3, len(allp), 2, 2)[:, :, n_samples:]
        vals[sl] = v[:, :, :n_samples]
        dnn = np.einsum("tegcd,tec,ted->teg", g, basis.normals, basis.normals)
        dnt = np.einsum("tegcd,tec,ted->teg", g, basis.tangents, basis.normals)
        half = 0.5 * basis.lengths[:, :, None]
        mom[sl] = np.stack(
            [(half * dnn) @ w, (half * dnn) @ (w * tau), (half * dnt) @ w], axis=2
        )
    a = (tri[:, 0], side_local[:, 0])
    b = (tri[:, 1], side_local[:, 1])
    dv = np.abs(vals[a] - vals[b]).max(axis=(1, 2))
    dm = np.abs(mom[a] - mom[b])
    return EdgeJumps(dv, dm[:, :2], dm[:, 2])


def smallest_generalized_eigenvalue(A, M, tol=1e-8, maxiter=500, seed=0):
    """Smallest eigenvalue of A x = lam M x.

    Shift-invert Lanczos around zero, i.e. inverse iteration on M^{-1} A
    accelerated by a Krylov space; plain block inverse iteration stalls on
    the clustered low end of these spectra.
    """
    A = sp.csc_matrix(A)
    M = sp.csc_matrix(M)
    n = A.shape[0]
    if n <= 12:
        vals = sla.eigh(A.toarray(), M.toarray(), eigvals_only=True)
        return float(vals[0])
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        vals = spla.eigsh(A, k=1, M=M, sigma=0.0, which="LM", tol=tol, maxiter=maxiter, v0=v0,
                          return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise ProbeError(f"eigen-solve did not converge in {maxiter} iterations: {exc}") from None
    return float(vals[0])


def coercivity_probe(meshes, params, variant, tol=1e-8):
    """lambda_min(A, M) on each mesh, M the matrix of iota^2|.|_H2h^2 + ||.||_H1^2."""
    out = []
    for mesh in meshes:
        disc = mesh if isinstance(mesh, Discretization) else Discretization(mesh, variant)
        A = disc.reduce(disc.matrix(params)).matrix
        M = disc.reduce(disc.norm_matrix(params.iota)).matrix
        out.append(smallest_generalized_eigenvalue(A, M, tol=tol))
    return out


@dataclass(frozen=True)
class ConvergenceRow:
    variant: int
    lam: float
    mu: float
    iota: float
    h: float
    error: float
    rate: float | None = None

    @property
    def key(self):
        return (self.variant, self.lam, self.mu, self.iota)


def convergence_rates(rows):
    """Annotate rows with r = log(e(h_prev) / e(h)) / log(h_prev / h).

    Rows are grouped by (variant, lambda, mu, iota); inside a group the mesh
    sizes must halve from one row to the next.  Order of ``rows`` is kept.
    """
    groups = {}
    for i, row in enumerate(rows):
        if not row.error > 0:
            raise ValueError(f"row {i} has non-positive error {row.error}")
        groups.setdefault(row.key, []).append(i)
    out = list(rows)
    for key, idx in groups.items():
        idx = sorted(idx, key=lambda i: -rows[i].h)
        out[idx[0]] = replace(rows[idx[0]], rate=None)
        for prev, cur in zip(idx, idx[1:]):
            ratio = rows[prev].h / rows[cur].h
            if not math.isclose(ratio, 2.0, rel_tol=1e-6):
                raise ValueError(f"mesh sizes in group {key} do not halve: {rows[prev].h} -> {rows[cur].h}")
            rate = math.log(rows[prev].error / rows[cur].error) / math.log(ratio)
            out[cur] = replace(rows[cur], rate=rate)
    return out
