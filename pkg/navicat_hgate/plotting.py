#!/usr/bin/env python

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt

ket_labels = ["00", "01", "10", "11"]


def beautify_ax(ax):
    # Border
    for side in ["top", "bottom", "left", "right"]:
        ax.spines[side].set_color("black")
    ax.get_xaxis().set_tick_params(direction="out")
    ax.get_yaxis().set_tick_params(direction="out")
    ax.xaxis.tick_bottom()
    ax.yaxis.tick_left()
    return ax


def plot_rho_bars(rho, basename, verb=0):
    """Real and imaginary parts of a two-ion density matrix as 3D bar charts."""
    fig = plt.figure(figsize=(10, 4.5))
    x, y = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    x, y = x.ravel() - 0.3, y.ravel() - 0.3
    for k, (part, title) in enumerate(
        [(np.real(rho.entries), "Re"), (np.imag(rho.entries), "Im")]
    ):
        ax = fig.add_subplot(1, 2, k + 1, projection="3d")
        heights = part.ravel()
        colors = ["tab:blue" if h >= 0 else "tab:red" for h in heights]
        ax.bar3d(x, y, np.zeros_like(heights), 0.6, 0.6, heights, color=colors, shade=True)
        ax.set_xticks(range(4))
        ax.set_yticks(range(4))
        ax.set_xticklabels(ket_labels)
        ax.set_yticklabels(ket_labels)
        ax.set_zlim(-0.5, 0.5)
        ax.set_title(f"{title}(rho)")
    filename = f"{basename}_rho.png"
    if verb > 0:
        print(f"Saving density matrix plot as {filename} in working directory.")
    plt.savefig(filename, bbox_inches="tight")
    plt.close()
    return filename


def plot_table1(rows, basename, verb=0):
    """Simulated against quoted fidelities of the seven rows with a target state."""
    rows = [r for r in rows if r["fidelity"] is not None and r["fidelity_measured"] is not None]
    fig, ax = plt.subplots(figsize=(6, 4), dpi=150)
    ax = beautify_ax(ax)
    idx = np.arange(len(rows))
    sim = [r["fidelity"] for r in rows]
    err = [r["fidelity_error"] for r in rows]
    quoted = [r["fidelity_measured"] for r in rows]
    ax.bar(idx - 0.2, sim, 0.4, yerr=err, color="tab:blue", capsize=3, label="simulated")
    ax.bar(idx + 0.2, quoted, 0.4, color="tab:gray", label="measured")
    ax.set_xticks(idx)
    ax.set_xticklabels([str(r["row"]) for r in rows])
    ax.set_xlabel("Row")
    ax.set_ylabel("Fidelity")
    ax.set_ylim(0.5, 1.05)
    ax.legend(loc="lower left", frameon=False)
    filename = f"{basename}_table1.png"
    if verb > 0:
        print(f"Saving table1 comparison plot as {filename} in working directory.")
    plt.savefig(filename, bbox_inches="tight")
    plt.close()
    return filename
