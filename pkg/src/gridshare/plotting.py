"""Figure rendering for experiment outputs (headless matplotlib)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_COLORS = {
    "two-layer": "tab:blue",
    "one-layer-all-of-3": "tab:orange",
    "one-layer-two-of-3": "tab:red",
    "repetition": "tab:green",
}


def recovery_figure(curves: dict, path, order=None) -> None:
    """Empirical recovery markers with analytic dashed lines, one per scheme."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for scheme in order or curves:
        curve = curves[scheme]
        ps = [pt.p for pt in curve.points]
        rates = [pt.rate for pt in curve.points]
        halves = [pt.ci_half_width for pt in curve.points]
        analytic = [pt.analytic for pt in curve.points]
        color = _COLORS.get(scheme)
        ax.errorbar(ps, rates, yerr=halves, marker="o", markersize=4,
                    linestyle="-", linewidth=1.0, capsize=2, label=scheme,
                    color=color)
        ax.plot(ps, analytic, linestyle="--", linewidth=1.0, alpha=0.6,
                color=color)
    ax.set_xlabel("DoS attack probability per layer")
    ax.set_ylabel("recovery rate")
    ax.set_ylim(-0.02, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower left", fontsize=8)
    ax.set_title("Recovery under simultaneous row and column failures")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def latency_figure(rows, path) -> None:
    """Mean dispatch-to-recovery latency per scheme as a bar chart."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    schemes = [r.scheme for r in rows]
    means = [r.mean_ms for r in rows]
    colors = [_COLORS.get(s, "tab:gray") for s in schemes]
    bars = ax.bar(schemes, means, color=colors)
    for bar, row in zip(bars, rows):
        ax.annotate(f"{row.mean_ms:.2f}",
                    (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                    ha="center", va="bottom", fontsize=8)
    ax.set_ylabel("mean latency (ms)")
    ax.set_title(f"Message latency ({rows[0].mode})")
    ax.tick_params(axis="x", labelrotation=12)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
