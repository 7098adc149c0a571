"""Figure rendering for the CLI report paths.

Figures are a convenience view of the CSV output; the CSV files remain the
machine-readable contract.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .harness import SweepRecord, bits_label


def _cell_label(scheme: str, bits: float) -> str:
    if bits == math.inf:
        return f"{scheme} (B=inf)"
    return f"{scheme} (B={int(bits)})"


def plot_sweep(records: list[SweepRecord], out_dir: str) -> list[str]:
    """Render NMSE-vs-PNR and (when present) SE-vs-DNR curves."""
    paths = []
    for metric, x_label, y_label, fname in (
        ("nmse_db", "PNR (dB)", "NMSE (dB)", "nmse_vs_pnr.png"),
        ("spectral_efficiency_bps_hz", "DNR (dB)", "Spectral efficiency (bits/s/Hz)",
         "se_vs_dnr.png"),
    ):
        subset = [r for r in records if r.metric == metric]
        if not subset:
            continue
        cells = sorted({(r.scheme, r.bits) for r in subset},
                       key=lambda c: (c[0], c[1] if c[1] != math.inf else float("inf")))
        fig, ax = plt.subplots(figsize=(7, 5))
        for scheme, bits in cells:
            points = sorted(
                (r.x_value, r.value) for r in subset
                if r.scheme == scheme and r.bits == bits
            )
            ax.plot([p[0] for p in points], [p[1] for p in points],
                    marker="o", label=_cell_label(scheme, bits))
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        ax.grid(True, alpha=0.4)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(out_dir, fname)
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_histogram(results: dict, out_dir: str) -> str:
    """Overlayed coherence histograms, one step curve per (scheme, bits)."""
    fig, ax = plt.subplots(figsize=(7, 5))
    for (scheme, bits) in sorted(results, key=lambda k: (k[0], float(k[1]))):
        counts, edges = results[(scheme, bits)]
        total = counts.sum()
        weights = counts / total if total else counts
        ax.stairs(weights, edges, label=_cell_label(scheme, bits))
    ax.set_xlabel("off-diagonal coherence magnitude")
    ax.set_ylabel("fraction of entries")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, "coherence_histogram.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_trace(trace: list[float], scheme: str, bits: float, out_dir: str) -> str:
    """Objective value against design iteration for one cell."""
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(range(len(trace)), trace, marker=".")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective value")
    ax.set_title(_cell_label(scheme, bits))
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    path = os.path.join(out_dir, "trace.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
