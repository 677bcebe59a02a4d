"""PNG figures for replication and scaling reports (headless Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

if TYPE_CHECKING:
    from .harness import ScalingReport, SummaryRow

_META = {"Software": None}


def _panel_grid(
    table: np.ndarray, summary: Sequence["SummaryRow"], names: Sequence[str], path: Path, bins: int = 50
) -> Path:
    from .harness import REPLICA_COLUMNS

    by = {r.statistic: r for r in summary}
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5))
    for ax, name in zip(axes.ravel(), names):
        x = table[:, REPLICA_COLUMNS.index(name)]
        x = x[np.isfinite(x)]
        r = by[name]
        ax.hist(x, bins=bins, color="0.75")
        for v in (r.mean, r.q_lo, r.q_hi):
            ax.axvline(v, color="k", lw=1)
        for v in (r.target, r.theory_q_lo, r.theory_q_hi):
            if np.isfinite(v):
                ax.axvline(v, color="tab:orange", lw=1.2, ls=":")
        ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def replication_figures(table: np.ndarray, summary: Sequence["SummaryRow"], out: Path) -> list[Path]:
    """Histograms of the type means and of the effects. Solid lines mark the
    empirical mean and quantiles; dotted lines the closed-form targets."""
    from .harness import EFFECT_NAMES, TYPE_NAMES

    out.mkdir(parents=True, exist_ok=True)
    return [
        _panel_grid(table, summary, [f"Y_{w}" for w in TYPE_NAMES], out / "type_means.png"),
        _panel_grid(table, summary, list(EFFECT_NAMES), out / "effects.png"),
    ]


def scaling_figure(rep: "ScalingReport", out: Path) -> Path:
    """Mean Sigma-hat (markers) against the exact variance (lines) per size,
    and the mean width of the variance bounds."""
    out.mkdir(parents=True, exist_ok=True)
    x = np.arange(len(rep.sizes))
    labels = [f"{d.I}x{d.J}" for d in rep.sizes]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    for w, vals in rep.sigma.items():
        (line,) = a1.plot(x, rep.variance[w], lw=1)
        a1.plot(x, vals, "o", color=line.get_color(), label=w)
    a1.set_yscale("log")
    a1.set_ylabel("variance of type mean")
    a1.legend()
    for e, vals in rep.bounds.items():
        a2.plot(x, [hi - lo for lo, hi in vals], "o-", label=e)
    a2.set_ylabel("mean bound width")
    a2.legend()
    for ax in (a1, a2):
        ax.set_xticks(x, labels)
    fig.tight_layout()
    path = out / "scaling.png"
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path
