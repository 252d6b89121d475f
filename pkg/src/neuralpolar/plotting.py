"""Figure emission from result CSVs (error-rate curves and distance histograms)."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import DomainError


def _read_csv(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DomainError(f"CSV not found: {path}")
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise DomainError(f"CSV has no data rows: {path}")
    return rows


def plot_error_curves(csv_path, out_path) -> str:
    """BER (solid) and BLER (dashed) vs SNR, log-scale y, one color per decoder."""
    rows = _read_csv(csv_path)
    required = {"snr_db", "ber", "bler", "decoder_id"}
    if not required.issubset(rows[0]):
        raise DomainError(f"curve CSV needs columns {sorted(required)}")
    by_decoder: dict[str, list[dict]] = {}
    for row in rows:
        by_decoder.setdefault(row["decoder_id"], []).append(row)

    fig, ax = plt.subplots(figsize=(7, 5))
    for idx, (decoder, points) in enumerate(sorted(by_decoder.items())):
        points = sorted(points, key=lambda r: float(r["snr_db"]))
        snr = [float(r["snr_db"]) for r in points]
        ber = [float(r["ber"]) for r in points]
        bler = [float(r["bler"]) for r in points]
        color = f"C{idx}"
        ax.semilogy(snr, ber, "-o", color=color, label=f"{decoder} BER", markersize=4)
        ax.semilogy(snr, bler, "--s", color=color, label=f"{decoder} BLER", markersize=4)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return str(out_path)


def plot_distance_histogram(csv_path, out_path) -> str:
    """Normalized pairwise-distance histograms for code vs Gaussian reference."""
    rows = _read_csv(csv_path)
    required = {"kind", "bin_left", "bin_right", "count"}
    if not required.issubset(rows[0]):
        raise DomainError(f"histogram CSV needs columns {sorted(required)}")
    kinds: dict[str, list[dict]] = {}
    for row in rows:
        kinds.setdefault(row["kind"], []).append(row)

    fig, ax = plt.subplots(figsize=(7, 5))
    for idx, (kind, points) in enumerate(sorted(kinds.items())):
        centers = [(float(r["bin_left"]) + float(r["bin_right"])) / 2 for r in points]
        counts = [float(r["count"]) for r in points]
        total = sum(counts) or 1.0
        widths = [float(r["bin_right"]) - float(r["bin_left"]) for r in points]
        density = [c / (total * w) if w else 0.0 for c, w in zip(counts, widths)]
        ax.step(centers, density, where="mid", color=f"C{idx}", label=kind)
    ax.set_xlabel("pairwise distance / sqrt(n)")
    ax.set_ylabel("density")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return str(out_path)
