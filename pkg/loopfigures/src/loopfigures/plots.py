"""Figure builders, one per kind; pure functions from parsed data to a Figure.

No smoothing or reinterpretation of the numbers: every curve is the raw
exported data.  Rendering is deterministic given identical inputs.
"""
from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _by_policy(rows: list[dict]) -> dict[str, list[dict]]:
    grouped: dict[str, list[dict]] = defaultdict(list)
    for row in rows:
        grouped[row["policy_label"]].append(row)
    return {label: sorted(group, key=lambda r: r["n0"]) for label, group in grouped.items()}


def plot_mse_vs_n0(rows: list[dict]) -> plt.Figure:
    """MSE per policy vs true photon number, with reference curves."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, group in _by_policy(rows).items():
        n0s = [r["n0"] for r in group]
        ax.errorbar(
            n0s,
            [r["mse"] for r in group],
            yerr=[r["se_mse"] for r in group],
            marker="o",
            capsize=3,
            label=label,
        )
    n0s = sorted({r["n0"] for r in rows})
    ax.plot(n0s, n0s, "k-", label="shot noise")
    if all("optimal_var" in r for r in rows):
        optimal = [
            min(r["optimal_var"] for r in rows if r["n0"] == n0) for n0 in n0s
        ]
        ax.fill_between(n0s, 0.0, optimal, color="gray", alpha=0.3, label="optimal detector")
    ax.set_xlabel("true photon number $N_0$")
    ax.set_ylabel("mean squared error")
    ax.legend()
    fig.tight_layout()
    return fig


def plot_rounds_vs_n0(rows: list[dict]) -> plt.Figure:
    """Mean number of rounds per policy vs true photon number."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, group in _by_policy(rows).items():
        n0s = [r["n0"] for r in group]
        ax.errorbar(
            n0s,
            [r["mean_rounds"] for r in group],
            yerr=[r["se_mean_rounds"] for r in group],
            marker="o",
            capsize=3,
            label=label,
        )
    ax.set_xlabel("true photon number $N_0$")
    ax.set_ylabel("mean rounds")
    ax.legend()
    fig.tight_layout()
    return fig


def plot_mse_vs_rounds(rows: list[dict]) -> plt.Figure:
    """Accuracy/duration trade-off: one point per (policy, n0) cell."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, group in _by_policy(rows).items():
        ax.errorbar(
            [r["mean_rounds"] for r in group],
            [r["mse"] for r in group],
            xerr=[r["se_mean_rounds"] for r in group],
            yerr=[r["se_mse"] for r in group],
            marker="o",
            linestyle="",
            capsize=3,
            label=label,
        )
        for r in group:
            ax.annotate(
                f"$N_0$={r['n0']}",
                (r["mean_rounds"], r["mse"]),
                textcoords="offset points",
                xytext=(4, 4),
                fontsize=8,
            )
    ax.set_xlabel("mean rounds")
    ax.set_ylabel("mean squared error")
    ax.legend()
    fig.tight_layout()
    return fig


def plot_info_trace(rows: list[dict]) -> plt.Figure:
    """Known vs available information per round for the first traced trial."""
    trial_id = rows[0]["trial_id"]
    trial = [r for r in rows if r["trial_id"] == trial_id]
    rounds = [r["round"] for r in trial]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(rounds, [r["info_gained_bits"] for r in trial], color="green", label="information gained")
    ax.plot(
        rounds,
        [r["info_available_bits"] for r in trial],
        color="tab:orange",
        label="information available",
    )
    clicks = [r["round"] for r in trial if r["d"] == 1]
    for i, rnd in enumerate(clicks):
        ax.axvline(rnd, color="gray", alpha=0.3, linewidth=0.8, label="click" if i == 0 else None)
    ax.set_xlabel("round")
    ax.set_ylabel("information [bits]")
    ax.legend()
    fig.tight_layout()
    return fig


def plot_posterior_heatmap(rounds: np.ndarray, joints: np.ndarray) -> plt.Figure:
    """Posterior over the initial photon number, one column per round."""
    marginals = joints.sum(axis=1)  # sum over loop photon number
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.pcolormesh(
        rounds,
        np.arange(marginals.shape[1]),
        marginals.T,
        shading="nearest",
        cmap="viridis",
    )
    fig.colorbar(mesh, ax=ax, label="posterior probability")
    ax.set_xlabel("round")
    ax.set_ylabel("initial photon number $N_0$")
    fig.tight_layout()
    return fig


def plot_estimate_evolution(rounds: np.ndarray, joints: np.ndarray) -> plt.Figure:
    """Posterior mean and one-sigma band of the initial photon number."""
    marginals = joints.sum(axis=1)
    support = np.arange(marginals.shape[1])
    means = marginals @ support
    stds = np.sqrt(marginals @ support**2 - means**2)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(rounds, means, color="tab:blue", label="posterior mean")
    ax.fill_between(rounds, means - stds, means + stds, alpha=0.3, label=r"$\pm 1\sigma$")
    ax.set_xlabel("round")
    ax.set_ylabel("estimated $N_0$")
    ax.legend()
    fig.tight_layout()
    return fig
