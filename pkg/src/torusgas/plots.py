"""Matplotlib report figures written next to the delimited output files."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_run_report(records, path):
    """Two-panel run summary: invariant functionals and density floor."""
    ts = [r.t for r in records]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4))

    ax1.plot(ts, [r.energy for r in records], label="energy")
    ax1.plot(ts, [r.h0 for r in records], label="H0")
    ax1.plot(ts, [r.h1 for r in records], label="H1", lw=0.8)
    if records[0].h2 is not None:
        ax1.plot(ts, [r.h2 for r in records], label="H2", lw=0.8)
    ax1.set_xlabel("t")
    ax1.set_ylabel("functional")
    ax1.legend(fontsize=8)

    ax2.plot(ts, [r.min_rho for r in records], label="min rho")
    if records[0].rho_lower_bound_est is not None:
        ax2.plot(ts, [r.rho_lower_bound_est for r in records], "--",
                 label="a-priori lower bound")
    ax2.set_xlabel("t")
    ax2.set_ylabel("density floor")
    ax2.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_flocking_report(times, energies, variances, l1_dists, path):
    """Energy decay against the ln(t)/t envelope plus flocking metrics."""
    t = np.asarray(times)
    e = np.asarray(energies)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4))

    sel = t > 1.0
    ax1.loglog(t[sel], np.maximum(e[sel], 1e-300), label="energy")
    ref = np.log(np.maximum(t[sel], np.e)) / t[sel]
    scale = e[sel][0] / ref[0] if ref[0] > 0 else 1.0
    ax1.loglog(t[sel], scale * ref, "--", label="ln t / t reference")
    ax1.set_xlabel("t")
    ax1.set_ylabel("energy")
    ax1.legend(fontsize=8)

    ax2.semilogy(t, np.maximum(np.asarray(variances), 1e-300), label="velocity variance")
    ax2.semilogy(t, np.maximum(np.asarray(l1_dists) ** 2, 1e-300), label="l1 dist^2")
    ax2.set_xlabel("t")
    ax2.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_convergence_report(ns, table, path):
    """Residuals against grid size on log-log axes with an order-2 guide."""
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    for name, values in table.items():
        ax.loglog(ns, values, "o-", label=name)
    guide = np.array(ns, dtype=float)
    ref = table[next(iter(table))][0] * (guide / guide[0]) ** (-2.0)
    ax.loglog(guide, ref, "k--", lw=0.8, label="order 2")
    ax.set_xlabel("n")
    ax.set_ylabel("residual")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
