"""Figures for sweep summaries (transmit power versus the swept parameter)."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 5,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (3.5, 2.7),
    "savefig.dpi": 200,
    "savefig.bbox": "tight",
}

MARKERS = {"FA": "o", "FPA": "s", "APS": "^", "MCP": "D"}

AXIS_LABELS = {
    "sinr_db": "Minimum required SINR (dB)",
    "num_users": "Number of users K",
    "region_size": r"Normalized region size $A/\lambda$",
}

def plot_summary(rows, axis, path, title=None):
    """Mean transmit power (dBm) per scheme with 95 % CI bars; writes ``path``."""
    schemes = list(dict.fromkeys(r.scheme for r in rows))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for scheme in schemes:
            sel = sorted((r for r in rows if r.scheme == scheme), key=lambda r: r.axis_value)
            x = [r.axis_value for r in sel]
            y = [r.mean_power_dbm for r in sel]
            lo = [max(r.mean_power_dbm - r.ci95_low_dbm, 0.0) if math.isfinite(r.ci95_low_dbm) else 0.0
                  for r in sel]
            hi = [max(r.ci95_high_dbm - r.mean_power_dbm, 0.0) if math.isfinite(r.ci95_high_dbm) else 0.0
                  for r in sel]
            ax.errorbar(x, y, yerr=[lo, hi], marker=MARKERS.get(scheme, "x"), capsize=2,
                        label=scheme)
        ax.set_xlabel(AXIS_LABELS.get(axis, axis))
        ax.set_ylabel("Transmit power (dBm)")
        if title:
            ax.set_title(title)
        ax.legend()
        fig.savefig(path)
        plt.close(fig)
    return path
