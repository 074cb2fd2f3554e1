"""Ground truth vs prediction timelines as colour bands."""

from __future__ import annotations

import numpy as np


def render_timeline(path, gt, preds, num_classes, title=None, labels=None):
    """Write a PNG with one colour band per row: ground truth, then each prediction."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [np.asarray(gt)] + [np.asarray(p) for p in preds]
    names = labels or (["ground truth", "backbone"] + [f"stage {i}" for i in range(1, len(preds))])
    cmap = plt.get_cmap("tab20", max(num_classes, 2))
    fig, axes = plt.subplots(len(rows), 1, figsize=(10, 0.45 * len(rows) + 0.6), sharex=True, squeeze=False)
    for ax, row, name in zip(axes[:, 0], rows, names):
        ax.imshow(row[None, :], aspect="auto", cmap=cmap, vmin=0, vmax=max(num_classes - 1, 1), interpolation="nearest")
        ax.set_yticks([])
        ax.set_ylabel(name, rotation=0, ha="right", va="center", fontsize=8)
    axes[-1, 0].set_xlabel("frame")
    if title:
        axes[0, 0].set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
