"""Figures for experiment tables, rendered off-screen to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ResultRow  # noqa: E402

_XLABELS = {
    "iteration": "outer iteration",
    "n_total": "total reflecting elements N1 + N2",
    "n1": "elements on the BS-side surface N1",
    "mode": "scheme",
}


def figure_path(table_path: Union[str, Path]) -> Path:
    """Image written next to a results file: same stem, .png suffix."""
    return Path(table_path).with_suffix(".png")


def plot_rows(rows: Sequence[ResultRow], path: Union[str, Path], title: str = "") -> Path:
    """Mean transmit power (dBm) with one-standard-error bars against the sweep variable."""
    import math

    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=120)
    ok = [r for r in rows if r.n_ok > 0 and r.mean > 0]
    if ok:
        mean_dbm = [10 * math.log10(r.mean) + 30 for r in ok]
        lo = [10 * math.log10(r.mean) - 10 * math.log10(max(r.mean - r.stderr, r.mean * 1e-3)) for r in ok]
        hi = [10 * math.log10(r.mean + r.stderr) - 10 * math.log10(r.mean) for r in ok]
        variable = ok[0].sweep_variable
        if variable == "mode":
            xs = list(range(len(ok)))
            ax.bar(xs, mean_dbm, yerr=[lo, hi], color="0.6", capsize=3)
            ax.set_xticks(xs, [str(r.sweep_value) for r in ok])
        else:
            xs = [r.sweep_value for r in ok]
            ax.errorbar(xs, mean_dbm, yerr=[lo, hi], marker="o", ms=3, lw=1.2, capsize=2)
        ax.set_xlabel(_XLABELS.get(variable, variable))
    else:
        ax.text(0.5, 0.5, "no feasible realizations", ha="center", va="center", transform=ax.transAxes)
    ax.set_ylabel("transmit power (dBm)")
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path
