import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgfem import polynomials as poly
from sgfem.element import (
    N_DOFS,
    ElementError,
    ElementVariant,
    build_local_bases,
    bubble_space_basis,
    dof_values,
    local_basis,
    pre_bubble_basis,
)
from sgfem.verification import quadratic_field, random_triangles

VARIANTS = [ElementVariant.ONE, ElementVariant.TWO]
REFERENCE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
SKEWED = np.array([[0.1, 0.2], [0.9, 0.35], [0.3, 0.8]])


def independent_dofs(basis, t, values_fn, grad_fn):
    """Apply the 21 functionals to a field on triangle ``t`` with a 10-point
    Gauss rule and geometry rebuilt from the vertices alone."""
    v = basis.vertices[t]
    out = []
    nodes = list(v) + [0.5 * (v[(j + 1) % 3] + v[(j + 2) % 3]) for j in range(3)]
    for p in nodes:
        out.extend(values_fn(p[None])[0])
    tau, w = np.polynomial.legendre.leggauss(10)
    for j in range(3):
        a, b = v[(j + 1) % 3], v[(j + 2) % 3]
        d = b - a
        outward = np.array([d[1], -d[0]]) / np.linalg.norm(d)
        n = basis.normals[t, j]
        sign = np.sign(n @ outward)
        tvec = sign * d / np.linalg.norm(d)
        pts = 0.5 * (a + b) + 0.5 * tau[:, None] * sign * d
        g = grad_fn(pts)  # (q, 2, 2), g[q, c, k] = d u_c / d x_k
        dnn = np.einsum("qck,c,k->q", g, n, n)
        dnt = np.einsum("qck,c,k->q", g, tvec, n)
        out += [0.5 * w @ dnn, 0.5 * (w * tau) @ dnn, 0.5 * w @ dnt]
    return np.array(out)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("tri", [REFERENCE, SKEWED])
@pytest.mark.parametrize("signs", [(1, 1, 1), (-1, 1, -1)])
def test_duality_against_independent_functionals(variant, tri, signs):
    basis = local_basis(tri, signs, variant)
    D = np.empty((N_DOFS, N_DOFS))
    for i in range(N_DOFS):
        def values_fn(p, i=i):
            return basis.jets_at(p[None]).values[0, :, i]

        def grad_fn(p, i=i):
            return basis.jets_at(p[None]).grads[0, :, i]

        D[:, i] = independent_dofs(basis, 0, values_fn, grad_fn)
    assert np.abs(D - np.eye(N_DOFS)).max() < 1e-10


@pytest.mark.parametrize("variant", VARIANTS)
def test_enrichment_space_constraints(variant):
    """Every enrichment polynomial has a linear normal trace on each edge,
    and for element 2 a constant divergence."""
    q = variant.bubble_degree
    pre = pre_bubble_basis(SKEWED[None], np.ones((1, 3)), variant)[0]  # (9, 2, nm)
    assert pre.shape == (9, 2, poly.n_monomials(q))
    assert np.linalg.matrix_rank(pre.reshape(9, -1)) == 9
    basis = local_basis(SKEWED, variant=variant)
    centroid, G = basis.centroid[0], basis.frame[0]
    tau = np.linspace(0, 1, 9)
    for j in range(3):
        a, b = SKEWED[(j + 1) % 3], SKEWED[(j + 2) % 3]
        sr = (a + tau[:, None] * (b - a) - centroid) @ G.T
        vals = np.einsum("qm,icm->qic", poly.evaluate_monomials(sr[:, 0], sr[:, 1], q)[:, 0], pre)
        trace = vals @ basis.normals[0, j]  # (q, 9)
        linear = np.outer(1 - tau, trace[0]) + np.outer(tau, trace[-1])
        assert np.abs(trace - linear).max() < 1e-10
    if variant is ElementVariant.TWO:
        sr = np.random.default_rng(0).uniform(-0.3, 0.3, (6, 2))
        m = poly.evaluate_monomials(sr[:, 0], sr[:, 1], q)
        ds = np.einsum("qm,icm->iqc", m[:, 1], pre)
        dr = np.einsum("qm,icm->iqc", m[:, 2], pre)
        div = sum(G[0, c] * ds[..., c] + G[1, c] * dr[..., c] for c in range(2))
        assert np.abs(div - div[:, :1]).max() < 1e-10


@pytest.mark.parametrize("variant", VARIANTS)
def test_bubble_functions_vanish_on_the_boundary(variant):
    bubbles = bubble_space_basis(SKEWED, variant)
    assert len(bubbles) == 9
    tau = np.linspace(0, 1, 11)
    for j in range(3):
        a, b = SKEWED[(j + 1) % 3], SKEWED[(j + 2) % 3]
        pts = a + tau[:, None] * (b - a)
        for f in bubbles:
            assert np.abs(f(pts[:, 0], pts[:, 1])).max() < 1e-12


@pytest.mark.parametrize("variant", VARIANTS)
def test_basis_derivatives_against_finite_differences(variant):
    basis = local_basis(SKEWED, (1, -1, 1), variant)
    p = np.array([[0.4, 0.45]])
    jets = basis.jets_at(p[None])
    funcs = basis.functions()
    h = 1e-5
    for i, f in enumerate(funcs):
        def val(x, y, f=f):
            return f(np.array([x]), np.array([y]))[0]

        x, y = p[0]
        gx = (val(x + h, y) - val(x - h, y)) / (2 * h)
        gy = (val(x, y + h) - val(x, y - h)) / (2 * h)
        assert np.allclose(jets.values[0, 0, i], val(x, y), atol=1e-12)
        scale = 1 + np.abs(jets.grads[0, 0, i]).max()
        assert np.allclose(jets.grads[0, 0, i], np.column_stack([gx, gy]), atol=1e-6 * scale)
        H = jets.hessians[0, 0, i]
        assert np.allclose(H, np.swapaxes(H, -1, -2), atol=1e-9)
        hxx = (val(x + h, y) - 2 * val(x, y) + val(x - h, y)) / h**2
        assert np.allclose(H[:, 0, 0], hxx, atol=2e-3 * (1 + np.abs(H).max()))


@pytest.mark.parametrize("variant", VARIANTS)
def test_p2_fields_are_reproduced(variant, rng):
    tri = random_triangles(50, rng)
    signs = rng.choice([-1, 1], size=(50, 3))
    field = quadratic_field(rng.uniform(-1, 1, (50, 2, 6)))
    basis = build_local_bases(tri, signs, variant)
    pts = np.einsum("tsk,tkd->tsd", rng.dirichlet(np.ones(3), (50, 10)), tri)
    val, grad, hess = basis.field_jets_at(dof_values(basis, field), pts)
    exact = field(pts[..., 0], pts[..., 1])
    assert np.abs(val - exact.u).max() < 1e-11
    assert np.abs(grad - exact.grad).max() < 1e-9
    assert np.abs(hess - exact.hess).max() < 1e-7


@pytest.mark.parametrize("variant", VARIANTS)
def test_dilation_scaling(variant):
    """Nodal functions are dilation invariant, moment functions scale with h."""
    small = local_basis(SKEWED, variant=variant)
    big = local_basis(2 * SKEWED, variant=variant)
    p = np.array([[[0.35, 0.4]]])
    vs = small.jets_at(p).values[0, 0]
    vb = big.jets_at(2 * p).values[0, 0]
    assert np.allclose(vb[:12], vs[:12], atol=1e-11)
    assert np.allclose(vb[12:], 2 * vs[12:], atol=1e-11)


@pytest.mark.parametrize("variant", VARIANTS)
def test_edge_orientation_flip(variant):
    """Reversing edge j negates the first-order normal moment function only."""
    a = local_basis(SKEWED, (1, 1, 1), variant)
    b = local_basis(SKEWED, (1, -1, 1), variant)
    p = np.array([[[0.3, 0.5], [0.6, 0.4]]])
    va, vb = a.jets_at(p).values[0], b.jets_at(p).values[0]
    expected = va.copy()
    expected[:, 13 + 3] *= -1
    assert np.allclose(vb, expected, atol=1e-11)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unisolvent_on_random_triangles(seed):
    rng = np.random.default_rng(seed)
    tri = random_triangles(4, rng) * rng.uniform(1e-3, 10)
    for v in VARIANTS:
        basis = build_local_bases(tri, rng.choice([-1, 1], (4, 3)), v)
        assert np.all(basis.condition < 1e10)


def test_degenerate_triangle_is_reported():
    tris = np.array([REFERENCE, [[0.0, 0.0], [1.0, 0.0], [2.0, 1e-14]]])
    with pytest.raises(ElementError) as info:
        build_local_bases(tris, np.ones((2, 3)), 1)
    assert info.value.triangle == 1


def test_variant_parsing():
    assert ElementVariant.parse("2") is ElementVariant.TWO
    assert ElementVariant.parse(ElementVariant.ONE) is ElementVariant.ONE
    assert ElementVariant.ONE.stiffness_degree == 8
    assert ElementVariant.TWO.stiffness_degree == 10
    with pytest.raises(ValueError, match="1 or 2"):
        ElementVariant.parse(3)
