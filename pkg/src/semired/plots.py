"""Figure rendering for run and study outputs.

Imports matplotlib lazily on a headless backend; PNG metadata drops the
writer version stamp so reruns produce identical bytes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["save_field_figure", "save_diagnostics_figure", "save_convergence_figure"]

_PNG_METADATA = {"Software": None}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_field_figure(path, times, nodes, nodal_states, midpoints, strains) -> None:
    """Space-time heatmaps of the phase field and the equilibrium strain."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.0), constrained_layout=True)
    mesh_u = axes[0].pcolormesh(
        np.asarray(nodes),
        np.asarray(times),
        np.asarray(nodal_states),
        shading="auto",
        cmap="RdBu_r",
    )
    axes[0].set_title("phase field u")
    fig.colorbar(mesh_u, ax=axes[0])
    mesh_e = axes[1].pcolormesh(
        np.asarray(midpoints),
        np.asarray(times),
        np.asarray(strains),
        shading="auto",
        cmap="PuOr",
    )
    axes[1].set_title("strain e")
    fig.colorbar(mesh_e, ax=axes[1])
    for ax in axes:
        ax.set_xlabel("x")
        ax.set_ylabel("t")
    fig.savefig(path, dpi=110, metadata=_PNG_METADATA)
    plt.close(fig)


def save_diagnostics_figure(path, times, mass, potential, step_residuals) -> None:
    plt = _pyplot()
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 7.5), sharex=True, constrained_layout=True)
    axes[0].plot(times, mass)
    axes[0].set_ylabel("mass")
    axes[1].plot(times, potential)
    axes[1].set_ylabel("potential")
    residuals = np.maximum(np.asarray(step_residuals, dtype=float), 1e-300)
    axes[2].semilogy(times[1:], residuals[1:])
    axes[2].set_ylabel("step residual")
    axes[2].set_xlabel("t")
    fig.savefig(path, dpi=110, metadata=_PNG_METADATA)
    plt.close(fig)


def save_convergence_figure(path, report) -> None:
    """Error against step size on log axes, with a first-order guide."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.5), constrained_layout=True)
    dts = np.asarray(report.dts, dtype=float)
    errors = np.asarray(report.errors, dtype=float)
    ax.loglog(dts, errors, "o-", label=f"observed (order {report.order:.3f})")
    guide = errors[-1] * dts / dts[-1]
    ax.loglog(dts, guide, "k--", label="first order")
    ax.set_xlabel("dt")
    ax.set_ylabel("final-state error")
    ax.legend()
    fig.savefig(path, dpi=110, metadata=_PNG_METADATA)
    plt.close(fig)
