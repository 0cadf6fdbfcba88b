"""Global DOF numbering, element integrals and sparse system formation.

Element matrices are computed chunk by chunk with vectorized numpy and the
per-chunk triplets are merged serially: every triplet is mapped once to its
CSR entry and the values are summed with one ``bincount`` in triangle order,
so the result is deterministic and independent of the chunk size.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from sgfem.element import N_DOFS, ElementVariant, build_local_bases, eval_basis
from sgfem.mesh import build_topology
from sgfem.model import BENCHMARK
from sgfem.quadrature import quadrature

STIFFNESS_DEGREE = 10
LOAD_DEGREE = 14
CHUNK = 1024
SQRT2 = np.sqrt(2.0)

ENERGY_COMPONENTS = ("strain", "div", "strain_grad", "div_grad")
NORM_COMPONENTS = ("mass", "grad", "hess")
COMPONENTS = ENERGY_COMPONENTS + NORM_COMPONENTS


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class DofMap:
    """Two DOFs per vertex and five per edge.

    Edge block layout: midpoint x, midpoint y, normal moments k=0, k=1,
    tangential moment.
    """

    n_vertices: int
    n_edges: int
    tri_dofs: np.ndarray  # (nT, 21) in local DOF order
    boundary: np.ndarray  # (N,) bool

    @property
    def n_dofs(self):
        return 2 * self.n_vertices + 5 * self.n_edges

    @property
    def free(self):
        return np.flatnonzero(~self.boundary)

    def vertex(self, v, c):
        return 2 * v + c

    def midpoint(self, e, c):
        return 2 * self.n_vertices + 5 * e + c

    def normal_moment(self, e, k):
        return 2 * self.n_vertices + 5 * e + 2 + k

    def tangential_moment(self, e):
        return 2 * self.n_vertices + 5 * e + 4


def build_dof_map(mesh, topology):
    nV, nE = mesh.n_vertices, topology.n_edges
    t, te = mesh.triangles, topology.tri_edges
    vert = (2 * t[:, :, None] + np.arange(2)).reshape(-1, 6)
    base = 2 * nV + 5 * te
    mid = (base[:, :, None] + np.arange(2)).reshape(-1, 6)
    mom = (base[:, :, None] + 2 + np.arange(3)).reshape(-1, 9)
    tri_dofs = np.concatenate([vert, mid, mom], axis=1)

    boundary = np.zeros(2 * nV + 5 * nE, dtype=bool)
    bv = topology.boundary_vertices
    boundary[2 * bv] = True
    boundary[2 * bv + 1] = True
    be = np.flatnonzero(topology.boundary)
    boundary[(2 * nV + 5 * be[:, None] + np.arange(5)).ravel()] = True
    return DofMap(nV, nE, tri_dofs, boundary)


def _features(jets):
    """Per-point feature vectors whose Gram matrices give each component."""
    g, H = jets.grads, jets.hessians
    e11, e22 = g[..., 0, 0], g[..., 1, 1]
    e12 = 0.5 * (g[..., 0, 1] + g[..., 1, 0])
    out = {
        "strain": np.stack([e11, e22, SQRT2 * e12], axis=-1),
        "div": (e11 + e22)[..., None],
    }
    ge = []
    for i in range(2):
        ge += [H[..., 0, 0, i], H[..., 1, 1, i], SQRT2 * 0.5 * (H[..., 0, 1, i] + H[..., 1, 0, i])]
    out["strain_grad"] = np.stack(ge, axis=-1)
    out["div_grad"] = H[..., 0, 0, :] + H[..., 1, 1, :]
    out["mass"] = jets.values
    out["grad"] = g.reshape(g.shape[:3] + (4,))
    out["hess"] = H.reshape(H.shape[:3] + (8,))
    return out


def _gram(F, w):
    """sum_q w[t,q] F[t,q,i,:] . F[t,q,j,:] for every triangle."""
    nT, nq, n, f = F.shape
    Fw = F * np.sqrt(w)[:, :, None, None]
    Fw = Fw.transpose(0, 2, 1, 3).reshape(nT, n, nq * f)
    return Fw @ Fw.transpose(0, 2, 1)


def element_components(basis, rule, names=COMPONENTS):
    """Gram matrices (nT, 21, 21) of each named energy component."""
    if rule.degree < basis.variant.stiffness_degree:
        raise ConfigurationError(
            f"stiffness rule degree {rule.degree} below {basis.variant.stiffness_degree} "
            f"required by element {basis.variant.value}"
        )
    jets = eval_basis(basis, rule)
    feats = _features(jets)
    return {name: _gram(feats[name], jets.weights) for name in names}


def combine_energy(parts, params):
    i2 = params.iota**2
    return 2 * params.mu * (parts["strain"] + i2 * parts["strain_grad"]) + params.lam * (
        parts["div"] + i2 * parts["div_grad"]
    )


def combine_norm(parts, iota):
    """Matrix of |v|_L2^2 + |grad v|^2 + iota^2 |hess v|^2."""
    return parts["mass"] + parts["grad"] + iota**2 * parts["hess"]


def element_matrix(basis, params, rule=None):
    """Stiffness matrices (nT, 21, 21) of the discrete energy form."""
    rule = rule or quadrature(STIFFNESS_DEGREE)
    return combine_energy(element_components(basis, rule, ENERGY_COMPONENTS), params)


def element_load(basis, force, params, rule=None):
    """Load vectors (nT, 21): integral of f . chi_i over each triangle."""
    rule = rule or quadrature(LOAD_DEGREE)
    pts = basis.physical_points(rule.points)
    f = force(pts[..., 0], pts[..., 1], params)  # (nT, nq, 2)
    w = basis.areas[:, None] * rule.weights[None, :]
    return basis.project(f, pts, w)


@dataclass(frozen=True)
class SparseSystem:
    """Reduced system on the free DOFs; boundary values are zero."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    n_full: int

    def expand(self, x):
        full = np.zeros(self.n_full)
        full[self.free] = x
        return full


class Discretization:
    """Mesh, topology, DOF map and local bases for one element variant.

    Global component matrices are assembled lazily and cached, so systems for
    many (lambda, mu, iota) share one integration pass.
    """

    def __init__(self, mesh, variant, stiffness_degree=STIFFNESS_DEGREE, chunk=CHUNK):
        self.mesh = mesh
        self.variant = ElementVariant.parse(variant)
        self.topology = build_topology(mesh)
        self.dofmap = build_dof_map(mesh, self.topology)
        self.stiffness_rule = quadrature(stiffness_degree)
        if self.stiffness_rule.degree < self.variant.stiffness_degree:
            raise ConfigurationError(
                f"stiffness rule degree {stiffness_degree} below {self.variant.stiffness_degree}"
            )
        self.chunk = chunk
        self._bases = []
        verts = mesh.vertices[mesh.triangles]
        for start in range(0, mesh.n_triangles, chunk):
            sl = slice(start, start + chunk)
            try:
                self._bases.append(build_local_bases(verts[sl], self.topology.tri_signs[sl], self.variant))
            except Exception as exc:
                tri = getattr(exc, "triangle", None)
                if tri is not None:
                    exc.args = (f"triangle {start + tri}: {exc.args[0].split(': ', 1)[-1]}",)
                    exc.triangle = start + tri
                raise
        self._global = {}
        self._csr = None

    @property
    def n_dofs(self):
        return self.dofmap.n_dofs

    def chunks(self):
        """Yield (slice of triangles, LocalBasis) pairs."""
        for k, basis in enumerate(self._bases):
            yield slice(k * self.chunk, k * self.chunk + len(basis)), basis

    def basis_of(self, t):
        k, i = divmod(int(t), self.chunk)
        return self._bases[k], i

    def _pattern(self):
        """CSR structure shared by all components and the triplet-to-entry map."""
        if self._csr is None:
            d = self.dofmap.tri_dofs
            N = self.n_dofs
            keys = (np.repeat(d, N_DOFS, axis=1) * N + np.tile(d, (1, N_DOFS))).ravel()
            uniq, where = np.unique(keys, return_inverse=True)
            rows = uniq // N
            indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=N))])
            self._csr = (indptr, (uniq % N).astype(np.int32), where.ravel())
        return self._csr

    def _scatter(self, blocks):
        """Sum per-chunk (nT, 21, 21) blocks into one CSR matrix."""
        indptr, indices, where = self._pattern()
        vals = np.concatenate([K.reshape(len(K), -1) for K in blocks]).ravel()
        data = np.bincount(where, weights=vals, minlength=len(indices))
        N = self.n_dofs
        return sp.csr_matrix((data, indices, indptr), shape=(N, N))

    def components(self, names=COMPONENTS):
        """Global matrices of the named components, assembled on first use."""
        missing = [n for n in names if n not in self._global]
        if missing:
            per = {name: [] for name in missing}
            for _, basis in self.chunks():
                parts = element_components(basis, self.stiffness_rule, missing)
                for name in missing:
                    per[name].append(parts[name])
            for name in missing:
                self._global[name] = self._scatter(per.pop(name))
        return {n: self._global[n] for n in names}

    def matrix(self, params):
        """Full (unreduced) stiffness matrix."""
        return combine_energy(self.components(ENERGY_COMPONENTS), params).tocsr()

    def norm_matrix(self, iota):
        return combine_norm(self.components(NORM_COMPONENTS), iota).tocsr()

    def load(self, params, force=BENCHMARK.force, degree=LOAD_DEGREE):
        rule = quadrature(degree)
        b = np.zeros(self.n_dofs)
        for sl, basis in self.chunks():
            F = element_load(basis, force, params, rule)
            np.add.at(b, self.dofmap.tri_dofs[sl].ravel(), F.ravel())
        return b

    def reduce(self, A, b=None):
        free = self.dofmap.free
        Aff = A[free][:, free].tocsr()
        rhs = np.zeros(len(free)) if b is None else b[free]
        return SparseSystem(Aff, rhs, free, self.n_dofs)

    def system(self, params, problem=BENCHMARK, load_degree=LOAD_DEGREE):
        return self.reduce(self.matrix(params), self.load(params, problem.force, load_degree))

    def local_coefficients(self, full):
        """Gather a global coefficient vector into (nT, 21) per-triangle DOFs."""
        return np.asarray(full)[self.dofmap.tri_dofs]


def assemble(mesh, topology, dofmap, variant, params, problem=BENCHMARK):
    """Reduced stiffness system for ``problem`` on ``mesh``."""
    disc = Discretization(mesh, variant)
    if topology is not None and topology.n_edges != disc.topology.n_edges:
        raise ValueError("topology does not belong to mesh")
    if dofmap is not None and dofmap.n_dofs != disc.n_dofs:
        raise ValueError("dof map does not belong to mesh")
    return disc.system(params, problem)
