"""Self-checks bundled by ``sgfem verify``.

Every check returns a :class:`CheckResult` carrying the measured quantity
next to its threshold, so a report is useful even when everything passes.
"""

from dataclasses import dataclass

import numpy as np

from sgfem.analysis import coercivity_probe, consistency_term, edge_jumps, weak_residual
from sgfem.assembly import Discretization
from sgfem.element import ElementVariant, build_local_bases, dof_values
from sgfem.mesh import shape_ratios, uniform_mesh
from sgfem.model import BENCHMARK, MaterialParams, SolutionJet

VARIANTS = (ElementVariant.ONE, ElementVariant.TWO)
PROBE_IOTAS = (1.0, 1e-2, 1e-5)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f" {self.detail}" if self.detail else ""
        return f"{status} {self.name} measured={self.measured:.3e} threshold={self.threshold:.1e}{extra}"


def random_triangles(count, rng, max_ratio=8.0):
    """Counterclockwise triangles in the unit square with bounded shape ratio."""
    out = []
    while len(out) < count:
        cand = rng.random((2 * count, 3, 2))
        ratio = shape_ratios(cand.reshape(-1, 2), np.arange(6 * count).reshape(-1, 3))
        keep = cand[np.isfinite(ratio) & (ratio <= max_ratio)]
        out.extend(keep[: count - len(out)])
    tri = np.array(out)
    e1, e2 = tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
    cw = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    tri[cw] = tri[cw][:, [0, 2, 1]]
    return tri


def quadratic_field(coeffs):
    """Vector field with components c0 + c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2.

    ``coeffs`` has shape (2, 6), or (nT, 2, 6) for one field per triangle,
    in which case inputs carry a leading triangle axis.
    """
    c = np.asarray(coeffs, dtype=float)

    def field(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        cc = c.reshape(c.shape[:-2] + (1,) * (x.ndim - c.ndim + 2) + c.shape[-2:])
        k = [cc[..., i] for i in range(6)]
        X, Y = x[..., None], y[..., None]
        u = k[0] + k[1] * X + k[2] * Y + k[3] * X**2 + k[4] * X * Y + k[5] * Y**2
        gx = k[1] + 2 * k[3] * X + k[4] * Y
        gy = k[2] + k[4] * X + 2 * k[5] * Y
        hxx, hxy, hyy = 2 * k[3], k[4], 2 * k[5]
        shape = u.shape
        hess = np.stack(
            [np.stack([np.broadcast_to(hxx, shape), np.broadcast_to(hxy, shape)], -1),
             np.stack([np.broadcast_to(hxy, shape), np.broadcast_to(hyy, shape)], -1)],
            -1,
        )
        return SolutionJet(u, np.stack([gx, gy], -1), hess)

    return field


def check_unisolvency(triangles=1000, seed=0, threshold=1e10):
    rng = np.random.default_rng(seed)
    tri = random_triangles(triangles, rng)
    signs = rng.choice([-1, 1], size=(triangles, 3))
    worst, fails = 0.0, 0
    for v in VARIANTS:
        cond = build_local_bases(tri, signs, v, check=False).condition
        fails += int(np.sum(~(cond < threshold)))
        worst = max(worst, float(np.max(cond)))
    return CheckResult(
        "unisolvency", fails == 0, worst, threshold,
        f"triangles={triangles} per variant failures={fails}",
    )


def check_p2_reproduction(pairs=200, seed=1, samples=25, threshold=1e-11):
    rng = np.random.default_rng(seed)
    tri = random_triangles(pairs, rng)
    signs = rng.choice([-1, 1], size=(pairs, 3))
    field = quadratic_field(rng.uniform(-1, 1, (pairs, 2, 6)))
    bary = rng.dirichlet(np.ones(3), size=(pairs, samples))
    pts = np.einsum("tsk,tkd->tsd", bary, tri)
    exact = field(pts[..., 0], pts[..., 1])
    worst = np.zeros(3)
    for v in VARIANTS:
        basis = build_local_bases(tri, signs, v)
        val, grad, hess = basis.field_jets_at(dof_values(basis, field), pts)
        errs = [np.max(np.abs(a - b)) for a, b in ((val, exact.u), (grad, exact.grad), (hess, exact.hess))]
        worst = np.maximum(worst, errs)
    return CheckResult(
        "p2_reproduction", worst[0] < threshold, float(worst[0]), threshold,
        f"pairs={pairs} per variant gradient_error={worst[1]:.2e} hessian_error={worst[2]:.2e}",
    )


def check_weak_continuity(vectors=50, n=8, seed=2, threshold=1e-9, value_threshold=1e-10):
    rng = np.random.default_rng(seed)
    mesh = uniform_mesh(n)
    worst_moment = worst_value = 0.0
    for v in VARIANTS:
        disc = Discretization(mesh, v)
        for _ in range(vectors):
            coeffs = np.zeros(disc.n_dofs)
            coeffs[disc.dofmap.free] = rng.standard_normal(len(disc.dofmap.free))
            jumps = edge_jumps(disc, coeffs)
            worst_moment = max(
                worst_moment, float(jumps.normal_moments.max()), float(jumps.tangential_moment.max())
            )
            worst_value = max(worst_value, float(jumps.value.max()))
    passed = worst_moment < threshold and worst_value < value_threshold
    return CheckResult(
        "weak_continuity", passed, worst_moment, threshold,
        f"vectors={vectors} per variant value_jump={worst_value:.3e}",
    )


def check_coercivity(levels=(4, 8, 16), iotas=PROBE_IOTAS, lo=0.5, hi=2.0):
    worst, ok, parts = 1.0, True, []
    for v in VARIANTS:
        discs = [Discretization(uniform_mesh(n), v) for n in levels]
        for iota in iotas:
            lams = coercivity_probe(discs, MaterialParams(1.0, 1.0, iota), v)
            ratios = [b / a for a, b in zip(lams, lams[1:])]
            ok &= all(x > 0 for x in lams) and all(lo <= r <= hi for r in ratios)
            for r in ratios:
                if abs(np.log(r)) > abs(np.log(worst)):
                    worst = r
            parts.append(f"e{v.value}/iota={iota:g}:" + ",".join(f"{x:.4g}" for x in lams))
    return CheckResult("coercivity", bool(ok), worst, hi, "lambda_min " + " ".join(parts))


def check_consistency(n=8, functions=20, seed=3, iotas=PROBE_IOTAS, threshold=1e-6):
    """a_h(u, chi) - (f, chi) against the edge consistency functional.

    For the exact solution the weak residual is not zero on a nonconforming
    space: it equals the boundary functional of the couple stress tested
    with the normal derivative of chi, which is O(iota^2).  The check
    compares both sides on random interior basis functions.
    """
    rng = np.random.default_rng(seed)
    mesh = uniform_mesh(n)
    worst, plain = 0.0, []
    for v in VARIANTS:
        disc = Discretization(mesh, v)
        chosen = rng.choice(disc.dofmap.free, size=functions, replace=False)
        for iota in iotas:
            p = MaterialParams(1.0, 1.0, iota)
            r = weak_residual(disc, BENCHMARK, p, degree=20)[chosen]
            e = consistency_term(disc, BENCHMARK, p)[chosen]
            worst = max(worst, float(np.max(np.abs(r - e))))
            plain.append(f"e{v.value}/iota={iota:g}:{np.max(np.abs(r)):.2e}")
    return CheckResult(
        "consistency", worst < threshold, worst, threshold, "raw_residual " + " ".join(plain)
    )


def run_all(triangles=1000, seed=0):
    return [
        check_unisolvency(triangles, seed),
        check_p2_reproduction(seed=seed + 1),
        check_weak_continuity(seed=seed + 2),
        check_coercivity(),
        check_consistency(seed=seed + 3),
    ]
