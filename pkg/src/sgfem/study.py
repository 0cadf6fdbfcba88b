"""Single runs and convergence studies over mesh levels and parameter sets.

A study groups its cases by (mesh, variant) so the basis construction and
the component matrices are paid once per level; the cases of one group only
differ in the linear combination of cached components and in the load.
Groups run in worker processes when ``jobs > 1``; results are collected and
ordered before anything is returned, so output never depends on scheduling.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from sgfem.analysis import ConvergenceRow, convergence_rates, energy_norm_error
from sgfem.assembly import LOAD_DEGREE, STIFFNESS_DEGREE, Discretization
from sgfem.model import BENCHMARK, ZERO, MaterialParams
from sgfem.solve import solve_spd


def default_jobs():
    raw = os.environ.get("SGFEM_JOBS", "1")
    try:
        jobs = int(raw)
    except ValueError:
        raise ValueError(f"SGFEM_JOBS must be a positive integer (got {raw!r})") from None
    if jobs < 1:
        raise ValueError(f"SGFEM_JOBS must be a positive integer (got {raw!r})")
    return jobs


@dataclass(frozen=True)
class RunResult:
    variant: int
    h: float
    params: MaterialParams
    dofs: int
    abs_energy_error: float
    rel_energy_error: float
    report: object
    coefficients: object = None

    def record(self):
        return {
            "variant": self.variant,
            "h": self.h,
            "lambda": self.params.lam,
            "mu": self.params.mu,
            "iota": self.params.iota,
            "dofs": self.dofs,
            "rel_energy_error": self.rel_energy_error,
            "solve_report": self.report.as_dict(),
        }


def solve_case(disc, params, problem=BENCHMARK, method="auto", tol=1e-10, load_degree=LOAD_DEGREE,
               keep=False, maxiter=None):
    system = disc.system(params, problem, load_degree)
    x, report = solve_spd(system, method, tol, maxiter)
    full = system.expand(x)
    err, rel = energy_norm_error(disc, full, problem.solution, params, load_degree)
    return RunResult(
        disc.variant.value, disc.mesh.h, params, len(system.free), err, rel, report,
        full if keep else None,
    )


def run_case(mesh, variant, params, zero_forcing=False, method="auto", tol=1e-10,
             stiffness_degree=STIFFNESS_DEGREE, load_degree=LOAD_DEGREE, keep=False, maxiter=None):
    disc = Discretization(mesh, variant, stiffness_degree)
    problem = ZERO if zero_forcing else BENCHMARK
    return solve_case(disc, params, problem, method, tol, load_degree, keep, maxiter)


def _run_group(task):
    mesh, variant, params_list, method, tol, load_degree, maxiter = task
    disc = Discretization(mesh, variant)
    return [solve_case(disc, p, BENCHMARK, method, tol, load_degree, maxiter=maxiter) for p in params_list]


def convergence_study(meshes, variants, params_list, method="auto", tol=1e-10, jobs=None,
                      load_degree=LOAD_DEGREE, maxiter=None):
    """Solve every (variant, params) on every mesh and annotate rates.

    ``meshes`` must have halving nominal mesh sizes.  Rows come back ordered
    by variant, then params (in the given order), then decreasing h.
    """
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs < 1:
        raise ValueError(f"jobs must be a positive integer (got {jobs})")
    tasks = [(m, v, list(params_list), method, tol, load_degree, maxiter) for v in variants for m in meshes]
    if jobs == 1 or len(tasks) == 1:
        results = [_run_group(t) for t in tasks]
    else:
        # largest meshes first so the pool is not left waiting on the tail
        order = sorted(range(len(tasks)), key=lambda i: -tasks[i][0].n_triangles)
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            done = dict(zip(order, pool.map(_run_group, [tasks[i] for i in order])))
        results = [done[i] for i in range(len(tasks))]

    by_key = {}
    for task, res in zip(tasks, results):
        for p, r in zip(task[2], res):
            by_key[(task[1], p, task[0].h)] = r
    rows = []
    for v in variants:
        for p in params_list:
            for m in sorted(meshes, key=lambda m: -m.h):
                r = by_key[(v, p, m.h)]
                rows.append(ConvergenceRow(r.variant, p.lam, p.mu, p.iota, r.h, r.rel_energy_error))
    return convergence_rates(rows)
