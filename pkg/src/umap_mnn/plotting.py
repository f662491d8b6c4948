"""Figures: dependency-free SVG scatter plots and matplotlib report figures."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

# tab20
PALETTE = (
    "#1f77b4", "#aec7e8", "#ff7f0e", "#ffbb78", "#2ca02c", "#98df8a", "#d62728",
    "#ff9896", "#9467bd", "#c5b0d5", "#8c564b", "#c49c94", "#e377c2", "#f7b6d2",
    "#7f7f7f", "#c7c7c7", "#bcbd22", "#dbdb8d", "#17becf", "#9edae5",
)


def svg_scatter(coords, labels, class_names: Optional[Sequence[str]] = None,
                title: str = "", size: int = 600, radius: float = 2.0) -> str:
    """Render a 2-D labelled scatter as SVG text, one ``<circle>`` per point."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError(f"scatter plots need a 2-D embedding, got shape {coords.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != coords.shape[0]:
        raise ValueError("labels and coordinates differ in length")
    n_classes = int(labels.max()) + 1 if labels.size else 0
    if class_names is not None:
        n_classes = max(n_classes, len(class_names))
    names = list(class_names) if class_names is not None else [str(c) for c in range(n_classes)]

    margin = 20
    legend_w = 160
    if coords.shape[0]:
        lo, hi = coords.min(axis=0), coords.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    inner = size - 2 * margin
    px = margin + (coords[:, 0] - lo[0]) / span[0] * inner
    py = margin + (1.0 - (coords[:, 1] - lo[1]) / span[1]) * inner

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + legend_w}" height="{size}" '
        f'viewBox="0 0 {size + legend_w} {size}">',
        f'<rect x="0" y="0" width="{size + legend_w}" height="{size}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{margin}" y="14" font-family="sans-serif" font-size="12">{escape(title)}</text>')
    out.append('<g class="points" stroke="none" fill-opacity="0.8">')
    for x, y, c in zip(px, py, labels):
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{radius:g}" fill="{PALETTE[c % len(PALETTE)]}"/>')
    out.append("</g>")
    out.append('<g class="legend" font-family="sans-serif" font-size="11">')
    for c in range(n_classes):
        y = margin + 16 * c
        out.append(
            f'<g class="legend-entry"><rect x="{size + 5}" y="{y}" width="10" height="10" '
            f'fill="{PALETTE[c % len(PALETTE)]}"/><text x="{size + 20}" y="{y + 9}">{escape(names[c])}</text></g>'
        )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_class_variance(variances: Mapping[str, np.ndarray], path, class_names=None):
    """Grouped bars of mean per-class 2-D variance, one group per class."""
    plt = _pyplot()
    methods = list(variances)
    per_class = {m: np.nanmean(np.asarray(v), axis=1) for m, v in variances.items()}
    n_classes = len(next(iter(per_class.values())))
    names = class_names or [str(c) for c in range(n_classes)]
    width = 0.8 / max(len(methods), 1)
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * n_classes + 2), 3.5))
    x = np.arange(n_classes)
    for i, m in enumerate(methods):
        ax.bar(x + i * width, per_class[m], width, label=m, color=PALETTE[(2 * i) % len(PALETTE)])
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("within-class variance")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_grid_heatmap(cells: Mapping[tuple, float], path, title: str = "mean NMI"):
    """Heatmap of a (k, min_dist) -> score mapping."""
    plt = _pyplot()
    ks = sorted({k for k, _ in cells})
    mds = sorted({m for _, m in cells})
    grid = np.full((len(ks), len(mds)), np.nan)
    for (k, m), v in cells.items():
        grid[ks.index(k), mds.index(m)] = v
    fig, ax = plt.subplots(figsize=(1 + 0.55 * len(mds), 1 + 0.4 * len(ks)))
    im = ax.imshow(grid, cmap="viridis", aspect="auto", origin="lower")
    ax.set_xticks(range(len(mds)))
    ax.set_xticklabels([f"{m:g}" for m in mds])
    ax.set_yticks(range(len(ks)))
    ax.set_yticklabels([str(k) for k in ks])
    ax.set_xlabel("min_dist")
    ax.set_ylabel("k")
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_embedding(coords, labels, path, class_names=None, title=""):
    """Raster companion of :func:`svg_scatter` for reports."""
    plt = _pyplot()
    coords = np.asarray(coords)
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(5, 5))
    colors = [PALETTE[c % len(PALETTE)] for c in labels]
    ax.scatter(coords[:, 0], coords[:, 1], c=colors, s=2, linewidths=0)
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
