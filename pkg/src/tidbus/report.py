"""Render benchmark results as figures, written next to the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import LatencySample, TransferCurve


def render_latency_timeline(samples: list[LatencySample], path: str | Path) -> Path:
    """Per-message latency over the measurement, one trace per payload length."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for length in sorted({s.payload_length for s in samples}):
        subset = [s for s in samples if s.payload_length == length]
        ax.plot(
            [s.sequence for s in subset],
            [s.latency_micros for s in subset],
            linewidth=0.8,
            label=f"{length} B",
        )
    ax.set_xlabel("message #")
    ax.set_ylabel("latency (µs)")
    ax.set_title("per-message latency")
    if samples:
        ax.legend(title="payload", fontsize="small")
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def render_histogram(bins: list[tuple[float, int]], path: str | Path) -> Path:
    """Latency distribution from fixed-width histogram bins."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if bins:
        width = bins[1][0] - bins[0][0] if len(bins) > 1 else 1.0
        ax.bar(
            [start for start, _ in bins],
            [count for _, count in bins],
            width=width,
            align="edge",
            edgecolor="none",
        )
    ax.set_xlabel("latency (µs)")
    ax.set_ylabel("messages")
    ax.set_title("latency histogram")
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, path)


def render_transfer_curve(curve: TransferCurve, path: str | Path) -> Path:
    """Jitter-averaging attenuation versus frequency."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(curve.frequencies_hz, curve.attenuation)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("attenuation")
    ax.set_title("jitter transfer function (event-aligned averaging)")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
