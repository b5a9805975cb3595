"""Render sweep datasets and relaxation trajectories to figure files.

Uses the Agg backend so figures can be written headlessly next to the CSV
output.  Marker convention for diagram scatter plots: blue stars for points
with occupancy s <= 0.8, cyan circles for the near-jam tail s > 0.8.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

S_TAIL = 0.8

_AXES = {
    "flux-density": ("rho_total", "q_total", "total density [veh/km]", "total flux [veh/h]"),
    "flux-space": ("s", "q_total", "road occupancy s [-]", "total flux [veh/h]"),
    "speed-density": ("rho_total", "u_total", "total density [veh/km]", "mean speed [km/h]"),
    "speed-space": ("s", "u_total", "road occupancy s [-]", "mean speed [km/h]"),
}

DIAGRAM_KINDS = tuple(_AXES)


def plot_diagram(points, kind: str, path, title: str | None = None) -> None:
    """Scatter one diagram kind from a list of DiagramPoint to a file."""
    if kind not in _AXES:
        raise ValueError(f"unknown diagram kind {kind!r}; expected one of {DIAGRAM_KINDS}")
    x_attr, y_attr, x_label, y_label = _AXES[kind]

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if kind.startswith("speed-"):
        # Per-class speeds tell the story (who slows down first); totals less so.
        for attr, label, color in (("u_c", "fast class", "tab:blue"),
                                   ("u_t", "slow class", "tab:red")):
            xs = [getattr(p, x_attr) for p in points if p.converged]
            ys = [getattr(p, attr) for p in points if p.converged]
            ax.plot(xs, ys, ".", ms=4, color=color, label=label)
        ax.legend(loc="best", fontsize=8)
    else:
        bulk = [p for p in points if p.converged and p.s <= S_TAIL]
        tail = [p for p in points if p.converged and p.s > S_TAIL]
        ax.plot([getattr(p, x_attr) for p in bulk], [getattr(p, y_attr) for p in bulk],
                "*", ms=5, color="tab:blue", label=f"s <= {S_TAIL}")
        ax.plot([getattr(p, x_attr) for p in tail], [getattr(p, y_attr) for p in tail],
                "o", ms=4, mfc="none", color="c", label=f"s > {S_TAIL}")
        if tail:
            ax.legend(loc="best", fontsize=8)
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_relaxation(trajectory, lattices, path, title: str | None = None) -> None:
    """Distribution components and per-class masses against time.

    trajectory: list of (t, MixtureState) as recorded by the integrator.
    """
    times = np.array([t for t, _ in trajectory])
    fig, (ax_f, ax_m) = plt.subplots(1, 2, figsize=(9.0, 3.6))

    n_pops = trajectory[0][1].n_populations
    styles = ("-", "--")
    for p in range(n_pops):
        speeds = lattices[p].speeds
        values = np.array([state.distributions[p] for _, state in trajectory])
        for j in range(values.shape[1]):
            ax_f.plot(times, values[:, j], styles[p % 2], lw=1.2,
                      label=f"class {p}, v={speeds[j]:g}")
        ax_m.plot(times, values.sum(axis=1), styles[p % 2], lw=1.4,
                  label=f"class {p} mass")

    ax_f.set_xlabel("t [h]")
    ax_f.set_ylabel("f_j [veh/km]")
    ax_f.legend(fontsize=7, ncol=2)
    ax_f.grid(True, alpha=0.3)
    ax_m.set_xlabel("t [h]")
    ax_m.set_ylabel("per-class mass [veh/km]")
    ax_m.legend(fontsize=8)
    ax_m.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
