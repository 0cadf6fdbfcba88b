"""Triangulations of the unit square with globally oriented edges."""

from dataclasses import dataclass, field

import numpy as np

MESH_MAGIC = "sgfem-mesh 1"


class MeshError(ValueError):
    pass


def signed_areas(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def shape_ratios(vertices, triangles):
    """Circumradius over inradius for every triangle (2 for equilateral)."""
    p = vertices[triangles]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    area = np.abs(signed_areas(vertices, triangles))
    circ = a * b * c / (4 * area)
    inr = 2 * area / (a + b + c)
    return circ / inr


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with counterclockwise triangles.

    ``nominal_h`` is the label used in convergence tables (1/n for generated
    meshes); it falls back to the longest edge for loaded meshes.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    nominal_h: float | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        v.flags.writeable = False
        t.flags.writeable = False

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def h_max(self):
        p = self.vertices[self.triangles]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return float(lengths.max())

    @property
    def h(self):
        return self.nominal_h if self.nominal_h is not None else self.h_max

    def areas(self):
        return signed_areas(self.vertices, self.triangles)

    def shape_ratios(self):
        return shape_ratios(self.vertices, self.triangles)

    def validate(self):
        """Raise MeshError unless the invariants of a usable mesh hold."""
        v, t = self.vertices, self.triangles
        if v.ndim != 2 or v.shape[1] != 2 or t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("vertices must be (n, 2) and triangles (m, 3)")
        if not np.all(np.isfinite(v)):
            raise MeshError("non-finite vertex coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            bad = int(t.max()) if t.max() >= len(v) else int(t.min())
            raise MeshError(f"triangle index {bad} out of range for {len(v)} vertices")
        area = self.areas()
        if np.any(area <= 0):
            k = int(np.argmin(area))
            raise MeshError(f"triangle {k} has non-positive signed area {area[k]:.3e}")
        if len(np.unique(t)) != len(v):
            raise MeshError("some vertices are not referenced by any triangle")
        if len(np.unique(v, axis=0)) != len(v):
            raise MeshError("duplicate vertices")
        return self


def uniform_mesh(n, diagonal="lower-left-to-upper-right"):
    """Split an n x n grid of the unit square along one diagonal direction.

    >>> m = uniform_mesh(1)
    >>> m.n_triangles, m.n_vertices
    (2, 4)
    """
    if diagonal != "lower-left-to-upper-right":
        raise ValueError(f"unsupported diagonal {diagonal!r}")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (j * (n + 1) + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(vertices, triangles, nominal_h=1.0 / n)


def perturbed_mesh(n, seed, factor, max_ratio=10.0):
    """Uniform mesh with interior vertices moved by seeded random offsets.

    Each interior vertex moves by at most ``factor / n`` in a uniformly random
    direction.  Raises MeshError if a triangle inverts or its shape ratio
    exceeds ``max_ratio``.
    """
    if not 0.0 <= factor <= 0.3:
        raise ValueError(f"factor must lie in [0, 0.3], got {factor!r}")
    base = uniform_mesh(n)
    v = base.vertices.copy()
    interior = np.all((v > 0) & (v < 1), axis=1)
    rng = np.random.default_rng(seed)
    k = int(interior.sum())
    angle = rng.uniform(0.0, 2 * np.pi, k)
    radius = factor / n * np.sqrt(rng.uniform(0.0, 1.0, k))
    v[interior] += radius[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
    area = signed_areas(v, base.triangles)
    if np.any(area <= 0):
        raise MeshError(
            f"seed {seed} with factor {factor} inverts triangle {int(np.argmin(area))}; reduce factor"
        )
    ratio = shape_ratios(v, base.triangles)
    if ratio.max() > max_ratio:
        raise MeshError(f"shape ratio {ratio.max():.2f} exceeds {max_ratio}; reduce factor")
    return Mesh(v, base.triangles, nominal_h=1.0 / n)


@dataclass(frozen=True)
class EdgeTopology:
    """Edges oriented from the lower to the higher global vertex index.

    ``tri_edges[t, j]`` is the edge opposite local vertex j, traversed
    counterclockwise from local vertex j+1 to j+2.  ``tri_signs[t, j]`` is +1
    when the triangle's outward normal on that edge equals the global normal.
    """

    edges: np.ndarray  # (nE, 2), v_lo < v_hi
    tangents: np.ndarray  # (nE, 2)
    normals: np.ndarray  # (nE, 2), n = (t_y, -t_x)
    lengths: np.ndarray  # (nE,)
    edge_triangles: np.ndarray  # (nE, 2), -1 marks a missing neighbour
    boundary: np.ndarray  # (nE,) bool
    tri_edges: np.ndarray  # (nT, 3)
    tri_signs: np.ndarray  # (nT, 3) of +-1
    boundary_vertices: np.ndarray = field(repr=False, default=None)

    @property
    def n_edges(self):
        return len(self.edges)

    def midpoints(self, vertices):
        return 0.5 * (vertices[self.edges[:, 0]] + vertices[self.edges[:, 1]])


def build_topology(mesh):
    t = mesh.triangles
    nT = len(t)
    a = t[:, [1, 2, 0]]
    b = t[:, [2, 0, 1]]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    key = lo.ravel() * mesh.n_vertices + hi.ravel()
    uniq, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        e = int(uniq[np.argmax(counts)])
        raise MeshError(
            f"non-manifold edge ({e // mesh.n_vertices}, {e % mesh.n_vertices}) "
            f"shared by {counts.max()} triangles"
        )
    edges = np.column_stack([uniq // mesh.n_vertices, uniq % mesh.n_vertices])
    tri_edges = inverse.reshape(nT, 3)
    tri_signs = np.where(a < b, 1, -1)

    d = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    lengths = np.linalg.norm(d, axis=1)
    tangents = d / lengths[:, None]
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])

    edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
    owner = np.repeat(np.arange(nT), 3)
    flat = tri_edges.ravel()
    order = np.argsort(flat, kind="stable")
    first = np.ones(len(flat), dtype=bool)
    first[1:] = flat[order][1:] != flat[order][:-1]
    edge_triangles[flat[order][first], 0] = owner[order][first]
    edge_triangles[flat[order][~first], 1] = owner[order][~first]
    boundary = counts == 1
    bverts = np.unique(edges[boundary])
    return EdgeTopology(
        edges=edges,
        tangents=tangents,
        normals=normals,
        lengths=lengths,
        edge_triangles=edge_triangles,
        boundary=boundary,
        tri_edges=tri_edges,
        tri_signs=tri_signs,
        boundary_vertices=bverts,
    )


def save_mesh(mesh):
    lines = [MESH_MAGIC, f"{mesh.n_vertices} {mesh.n_triangles}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    return "\n".join(lines) + "\n"


def load_mesh(text):
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or " ".join(rows[0]) != MESH_MAGIC:
        raise MeshError(f"malformed header: expected {MESH_MAGIC!r}")
    try:
        nv, nt = (int(x) for x in rows[1])
    except (IndexError, ValueError):
        raise MeshError("malformed header: second line must be 'NV NT'") from None
    if len(rows) != 2 + nv + nt:
        raise MeshError(f"expected {nv} vertex and {nt} triangle lines, got {len(rows) - 2} lines")
    try:
        vertices = np.array([[float(x) for x in r] for r in rows[2 : 2 + nv]], dtype=float)
        triangles = np.array([[int(x) for x in r] for r in rows[2 + nv :]], dtype=np.int64)
    except ValueError as exc:
        raise MeshError(f"malformed body: {exc}") from None
    if vertices.shape != (nv, 2) or triangles.shape != (nt, 3):
        raise MeshError("vertex lines need 2 fields and triangle lines 3")
    return Mesh(vertices, triangles).validate()
