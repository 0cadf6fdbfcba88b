"""Figures for convergence studies, rendered to files with the Agg backend."""

import math

import matplotlib
import matplotlib.ticker

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_data_rows(rows):
    """(variant, lambda, mu, iota, log h, log error) tuples, natural logs."""
    return [(r.variant, r.lam, r.mu, r.iota, math.log(r.h), math.log(r.error)) for r in rows]


def convergence_figure(rows, path, title=None):
    """Log-log error against h, one line per (variant, lambda, mu, iota).

    Dashed guides of slope 1 and 2 are anchored at the coarsest point of the
    first group.
    """
    groups = {}
    for r in rows:
        groups.setdefault(r.key, []).append(r)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for (variant, lam, mu, iota), grp in groups.items():
        grp = sorted(grp, key=lambda r: -r.h)
        ax.loglog([r.h for r in grp], [r.error for r in grp], "o-",
                  label=f"element {variant}, λ={lam:g}, μ={mu:g}, ι={iota:g}")
    if groups:
        first = sorted(next(iter(groups.values())), key=lambda r: -r.h)
        hs = [r.h for r in first]
        h0, e0 = first[0].h, first[0].error
        for slope in (1, 2):
            ax.loglog(hs, [e0 * (h / h0) ** slope for h in hs], "k--", lw=0.8, alpha=0.6)
            ax.annotate(f"slope {slope}", (hs[-1], e0 * (hs[-1] / h0) ** slope), fontsize=8)
    hs_all = sorted({r.h for r in rows})
    ax.set_xticks(hs_all, [f"1/{round(1 / h)}" for h in hs_all])
    ax.xaxis.set_minor_locator(matplotlib.ticker.NullLocator())
    ax.set_xlabel("h")
    ax.set_ylabel("relative energy error")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def mesh_figure(mesh, path):
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.triplot(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles, lw=0.5, color="k")
    ax.set_aspect("equal")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
