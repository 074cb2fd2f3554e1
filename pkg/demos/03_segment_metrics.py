"""
Frame accuracy, edit score and segmental F1
===========================================

Accuracy counts frames; the edit score compares the ordered lists of segment
labels; F1@k counts a predicted segment as correct when it overlaps an
unclaimed ground-truth segment of its class with IoU of at least k%.
"""

from dtgrm.metrics import edit_score, evaluate, f1_at_k, segments_from_labels

A, B, C = 0, 1, 2
gt = [A] * 10 + [B] * 6 + [C] * 8
# a short spurious B inside the A segment: a typical over-segmentation error
pred = [A] * 4 + [B] * 2 + [A] * 4 + [B] * 6 + [C] * 8

print("ground truth segments:", segments_from_labels(gt))
print("predicted segments:   ", segments_from_labels(pred))

report = evaluate(pred, gt)
print(f"accuracy {report.acc:.1f}  edit {report.edit:.1f}  F1@10/25/50 "
      f"{report.f1[10]:.1f}/{report.f1[25]:.1f}/{report.f1[50]:.1f}")

# the fragment barely changes accuracy but costs an insertion in the edit score
print("edit (A,B,A) vs (A,B):", round(edit_score([A, B, A], [A, B]), 3))

# an IoU of exactly one half is a hit at the 50% threshold
r = f1_at_k([A] * 10 + [C] * 10, [A] * 20, 0.5, ignore=(C,))
print("IoU 0.5 at threshold 0.5:", r)
