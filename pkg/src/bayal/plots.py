"""Learning-curve figures from a curves CSV."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import read_curves_csv  # noqa: E402


class NoDataError(ValueError):
    pass


def curve_figure(curves: dict, attr: str = "mean_error", ylabel: str = "misclassification error"):
    """One line per method against the stage index, with a legend naming the methods."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for name, curve in curves.items():
        ax.plot([s.stage for s in curve.stages], [getattr(s, attr) for s in curve.stages], marker=".", label=name)
    ax.set_xlabel("n (queries after the warm start)")
    ax.set_ylabel(ylabel)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def emit_plots(curves_csv, out_dir=None) -> list:
    """Write ``error_vs_n.png`` and, when distances exist, ``dist_vs_n.png``.

    One line per method with a legend. Returns the written paths.
    """
    curves_csv = Path(curves_csv)
    if not curves_csv.is_file():
        raise FileNotFoundError(f"curve file {curves_csv} not found")
    curves = read_curves_csv(curves_csv)
    if not curves or not any(c.stages for c in curves.values()):
        raise NoDataError(f"no data in {curves_csv}")
    out_dir = Path(out_dir) if out_dir else curves_csv.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    panels = [("mean_error", "misclassification error", "error_vs_n.png")]
    if all(s.mean_dist is not None for c in curves.values() for s in c.stages):
        panels.append(("mean_dist", "Dist_PM", "dist_vs_n.png"))

    written = []
    for attr, ylabel, fname in panels:
        fig = curve_figure(curves, attr, ylabel)
        path = out_dir / fname
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
        written.append(path)
    return written
