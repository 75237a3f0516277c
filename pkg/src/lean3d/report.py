"""Figure rendering for the report-producing CLI paths.

Figures are written next to the delimited output files so a report run
leaves a self-contained directory of CSVs plus PNGs.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_simulation_figures(grid, out_csv) -> list:
    """Render latency/throughput-vs-bandwidth and per-frame latency plots.

    ``grid`` is a list of (bandwidth_bytes_per_s, SimResult) pairs.
    Returns the paths written.
    """
    out_csv = Path(out_csv)
    stem = out_csv.with_suffix("")
    written = []
    bws = [b / 1e6 for b, _ in grid]
    mean_lat = [r.mean_latency * 1e3 for _, r in grid]
    thr = [r.throughput for _, r in grid]

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(bws, mean_lat, "o-")
    ax.set_xlabel("bandwidth (MB/s)")
    ax.set_ylabel("mean latency (ms)")
    ax.set_title("Mean end-to-end latency vs bandwidth")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(f"{stem}_latency_vs_bandwidth.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(bws, thr, "s-", color="tab:green")
    ax.set_xlabel("bandwidth (MB/s)")
    ax.set_ylabel("throughput (frames/s)")
    ax.set_title("Output throughput vs bandwidth")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(f"{stem}_throughput_vs_bandwidth.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 3.2))
    for b, r in grid:
        ax.plot(r.latency * 1e3, label=f"{b / 1e6:g} MB/s")
    ax.set_xlabel("frame index")
    ax.set_ylabel("latency (ms)")
    ax.set_title("Per-frame latency (queue buildup)")
    ax.legend(fontsize=7)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(f"{stem}_per_frame_latency.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written


def save_roundtrip_figure(names, shallow_bytes, deep_bytes, out_path) -> Path:
    """Stacked per-frame shallow/deep compressed-size breakdown."""
    out_path = Path(out_path)
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(max(5, len(names) * 0.25), 3.2))
    ax.bar(x, shallow_bytes, label="shallow streams")
    ax.bar(x, deep_bytes, bottom=shallow_bytes, label="deep streams")
    ax.set_xlabel("frame")
    ax.set_ylabel("bytes")
    ax.set_title("Compressed size split per frame")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def save_split_depth_figure(fractions, split_depth, threshold, out_path) -> Path:
    """Unary fraction per level with the selected split depth marked."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(range(len(fractions)), fractions, "o-", label="unary fraction")
    ax.axhline(threshold, color="gray", linestyle="--", label=f"threshold {threshold:g}")
    if split_depth < len(fractions):
        ax.axvline(split_depth, color="tab:red", linestyle=":", label=f"D_s = {split_depth}")
    ax.set_xlabel("level (coarse to fine)")
    ax.set_ylabel("unary fraction")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
