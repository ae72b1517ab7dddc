"""Optional raster figures (PNG via matplotlib's Agg backend).

These complement the hand-written SVGs for quick visual review. They are not part
of the deterministic golden output because raster bytes depend on the installed
matplotlib and font stack.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .demographics import GROUPS  # noqa: E402
from .poststrat import AdjustedDistribution, GroupCellCounts, per_group_percentages, sad_series  # noqa: E402
from .sentiment import Level  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def plot_sad_series(cells: Sequence[AdjustedDistribution], scope: str, path: str | Path) -> Path | None:
    own = [c for c in cells if c.scope == scope]
    points = sad_series(own)
    raw = {c.period: c.raw_negative for c in own}
    if not any(v is not None for _, v in points):
        return None
    x = np.arange(len(points))
    adj = np.array([np.nan if v is None else v for _, v in points])
    rw = np.array([np.nan if raw.get(p) is None else raw[p] for p, _ in points])
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(x, rw * 100, marker="o", ms=3, label="raw negative")
    ax.plot(x, adj * 100, marker="o", ms=3, label="SAD index")
    ax.set_xticks(x, [p.label for p, _ in points], rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("negative users (%)")
    ax.set_title(f"Negative share, {scope}")
    ax.legend()
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_group_heatmap(cells: Iterable[GroupCellCounts], scope: str, path: str | Path,
                       min_group_users: int = 50) -> Path | None:
    """Negative share per social group and period; groups below the minimum are greyed."""
    own = sorted((c for c in cells if c.scope == scope), key=lambda c: c.period)
    if not own:
        return None
    grid = np.full((len(GROUPS), len(own)), np.nan)
    thin = np.zeros_like(grid, dtype=bool)
    for j, c in enumerate(own):
        for g, gp in per_group_percentages(c, min_group_users).items():
            i = GROUPS.index(g)
            grid[i, j] = gp.shares[Level.Negative] * 100
            thin[i, j] = gp.insufficient
    shown = np.where(thin, np.nan, grid)
    fig, ax = plt.subplots(figsize=(max(5, 0.45 * len(own) + 3), 4))
    ax.imshow(np.where(np.isnan(grid) | ~thin, np.nan, 1.0), cmap="Greys", vmin=0, vmax=3, aspect="auto")
    im = ax.imshow(shown, cmap="Oranges", aspect="auto")
    ax.set_yticks(range(len(GROUPS)), [g.label for g in GROUPS], fontsize=8)
    ax.set_xticks(range(len(own)), [c.period.label for c in own], rotation=45, ha="right", fontsize=8)
    fig.colorbar(im, ax=ax, label="negative (%)")
    ax.set_title(f"Negative share by group, {scope} (grey: fewer than {min_group_users} users)")
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_state_bars(cells: Sequence[AdjustedDistribution], path: str | Path) -> Path | None:
    rows = sorted((c for c in cells if not c.is_empty), key=lambda c: c.sad_index)
    if not rows:
        return None
    y = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(7, max(4, 0.18 * len(rows) + 1)))
    ax.scatter([c.raw_negative * 100 for c in rows], y, s=12, label="raw")
    ax.scatter([c.sad_index * 100 for c in rows], y, s=12, label="SAD index")
    ax.set_yticks(y, [c.scope for c in rows], fontsize=7)
    ax.set_xlabel("negative users (%)")
    ax.legend()
    fig.tight_layout()
    return _save(fig, Path(path))
