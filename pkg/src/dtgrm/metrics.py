"""Frame accuracy, segmental edit score and segmental F1@k."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

F1_THRESHOLDS = (10, 25, 50)


class Segment(NamedTuple):
    label: int
    start: int
    end: int  # exclusive


@dataclass
class MetricReport:
    acc: float
    edit: float
    f1: dict = field(default_factory=dict)

    def as_dict(self, prefix=""):
        out = {f"{prefix}acc": self.acc, f"{prefix}edit": self.edit}
        for k in sorted(self.f1):
            out[f"{prefix}f1@{k}"] = self.f1[k]
        return out


def segments_from_labels(labels):
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty label sequence")
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [labels.size]])
    return [Segment(int(labels[s]), int(s), int(e)) for s, e in zip(starts, ends)]


def frame_accuracy(pred, gt):
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError("prediction and ground truth lengths differ")
    if gt.size == 0:
        raise ValueError("empty label sequence")
    return 100.0 * int(np.count_nonzero(pred == gt)) / gt.size


def levenshtein(a, b):
    """Unit-cost edit distance between two sequences."""
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def _keep(segs, ignore):
    return [s for s in segs if s.label not in ignore]


def edit_score(pred, gt, ignore=()):
    p = [s.label for s in _keep(segments_from_labels(pred), ignore)]
    g = [s.label for s in _keep(segments_from_labels(gt), ignore)]
    n = max(len(p), len(g))
    if n == 0:
        return 100.0
    return max(0.0, 100.0 * (1.0 - levenshtein(p, g) / n))


class F1Result(NamedTuple):
    f1: float
    tp: int
    fp: int
    fn: int


def f1_from_counts(tp, fp, fn):
    """Harmonic mean of precision and recall, as a percentage.

    Written as ``2 tp / (2 tp + fp + fn)`` so the result is a single division
    of integers and does not depend on rounding of the intermediate ratios.
    """
    return 100.0 * (2 * tp) / (2 * tp + fp + fn) if tp else 0.0


def f1_at_k(pred, gt, threshold, ignore=()):
    """Segmental F1 at an IoU ``threshold`` given as a fraction in (0, 1].

    Predicted segments are visited in order; each claims the unmatched
    same-label ground-truth segment with the highest IoU, counting as a true
    positive when that IoU is at least ``threshold``.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    ps = _keep(segments_from_labels(pred), ignore)
    gs = _keep(segments_from_labels(gt), ignore)
    used = [False] * len(gs)
    tp = fp = 0
    for p in ps:
        best, best_iou = -1, -1.0
        for j, g in enumerate(gs):
            if used[j] or g.label != p.label:
                continue
            inter = min(p.end, g.end) - max(p.start, g.start)
            if inter <= 0:
                iou = 0.0
            else:
                iou = inter / (max(p.end, g.end) - min(p.start, g.start))
            if iou > best_iou:
                best, best_iou = j, iou
        if best >= 0 and best_iou >= threshold:
            used[best] = True
            tp += 1
        else:
            fp += 1
    fn = len(gs) - sum(used)
    return F1Result(f1_from_counts(tp, fp, fn), tp, fp, fn)


def evaluate(pred, gt, thresholds=F1_THRESHOLDS, ignore=()):
    return MetricReport(
        acc=frame_accuracy(pred, gt),
        edit=edit_score(pred, gt, ignore),
        f1={k: f1_at_k(pred, gt, k / 100.0, ignore).f1 for k in thresholds},
    )


def evaluate_dataset(preds, gts, thresholds=F1_THRESHOLDS, ignore=()):
    """Dataset-level report.

    Accuracy pools frames across sequences, edit is averaged per sequence and
    F1 pools TP/FP/FN counts, following the usual benchmark protocol.
    """
    correct = total = 0
    edits = []
    counts = {k: [0, 0, 0] for k in thresholds}
    for p, g in zip(preds, gts):
        p, g = np.asarray(p), np.asarray(g)
        if p.shape != g.shape:
            raise ValueError("prediction and ground truth lengths differ")
        correct += int((p == g).sum())
        total += g.size
        edits.append(edit_score(p, g, ignore))
        for k in thresholds:
            r = f1_at_k(p, g, k / 100.0, ignore)
            c = counts[k]
            c[0] += r.tp
            c[1] += r.fp
            c[2] += r.fn
    f1 = {k: f1_from_counts(*c) for k, c in counts.items()}
    return MetricReport(acc=100.0 * correct / total, edit=float(np.mean(edits)), f1=f1)
