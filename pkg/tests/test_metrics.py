import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtgrm.metrics import (
    Segment,
    edit_score,
    evaluate,
    evaluate_dataset,
    f1_at_k,
    frame_accuracy,
    levenshtein,
    segments_from_labels,
)

from oracles import random_pair, ref_accuracy, ref_edit, ref_f1

A, B, C = 0, 1, 2


def test_against_brute_force_on_random_pairs():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        p, g = random_pair(rng)
        assert frame_accuracy(p, g) == ref_accuracy(p.tolist(), g.tolist())
        assert edit_score(p, g) == ref_edit(p.tolist(), g.tolist())
        for thr in (0.1, 0.25, 0.5):
            assert f1_at_k(p, g, thr).f1 == ref_f1(p.tolist(), g.tolist(), thr)


# ---------------------------------------------------------------- worked examples


def test_segments_examples():
    assert segments_from_labels([A, A, B]) == [Segment(A, 0, 2), Segment(B, 2, 3)]
    assert segments_from_labels([C] * 5) == [Segment(C, 0, 5)]
    assert len(segments_from_labels([A, B, A, B])) == 4
    with pytest.raises(ValueError):
        segments_from_labels([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=60))
def test_segments_tile_sequence(labels):
    segs = segments_from_labels(labels)
    assert segs[0].start == 0 and segs[-1].end == len(labels)
    for a, b in zip(segs, segs[1:]):
        assert a.end == b.start and a.label != b.label
    assert all(s.start < s.end for s in segs)


def test_accuracy_examples():
    assert frame_accuracy([A, B, C], [A, B, C]) == 100.0
    assert frame_accuracy([A, A], [B, B]) == 0.0
    assert frame_accuracy([A, B, C, C], [A, B, C, A]) == 75.0
    with pytest.raises(ValueError):
        frame_accuracy([A], [A, B])


def test_edit_examples():
    assert edit_score([A, B, C], [A, B, C]) == 100.0
    assert edit_score([A, B, A], [A, B]) == pytest.approx(66.667, abs=1e-3)
    assert edit_score([A, A, B], [C, C, 3]) == 0.0
    assert levenshtein("kitten", "sitting") == 3


def test_f1_examples():
    for thr in (0.1, 0.25, 0.5):
        assert f1_at_k([A, B, A], [A, B, A], thr).f1 == 100.0
    # pred A:[0,10) against gt A:[0,20) has IoU exactly 0.5, which counts as a hit
    r = f1_at_k([A] * 10 + [C] * 10, [A] * 20, 0.5, ignore=(C,))
    assert (r.tp, r.fp, r.fn, r.f1) == (1, 0, 0, 100.0)
    # just below the boundary it is a miss
    r = f1_at_k([A] * 10 + [C] * 11, [A] * 21, 0.5, ignore=(C,))
    assert (r.tp, r.fp, r.fn) == (0, 1, 1)


def test_f1_counting_example():
    # two predicted A segments over one ground-truth A segment; the first claims it
    pred = [A] * 8 + [B] + [A]
    gt = [A] * 10
    r = f1_at_k(pred, gt, 0.5, ignore=(B,))
    assert (r.tp, r.fp, r.fn) == (1, 1, 0)
    assert r.f1 == pytest.approx(66.667, abs=1e-3)


def test_f1_matched_ground_truth_is_not_reused():
    # the second A segment overlaps the same gt segment but may not claim it again
    r = f1_at_k([A] * 4 + [B] + [A] * 5, [A] * 10, 0.1)
    assert (r.tp, r.fp, r.fn) == (1, 2, 0)


def test_f1_threshold_validation():
    with pytest.raises(ValueError):
        f1_at_k([A], [A], 0.0)
    with pytest.raises(ValueError):
        f1_at_k([A], [A], 10)


labels = st.lists(st.integers(0, 3), min_size=1, max_size=40)


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_metric_properties(data):
    g = data.draw(labels)
    p = data.draw(st.lists(st.integers(0, 3), min_size=len(g), max_size=len(g)))
    rep = evaluate(p, g)
    values = [rep.acc, rep.edit, *rep.f1.values()]
    assert all(0 <= v <= 100 for v in values)
    assert f1_at_k(p, g, 0.1).f1 >= f1_at_k(p, g, 0.25).f1 >= f1_at_k(p, g, 0.5).f1
    # bijective relabelling of both sequences
    perm = data.draw(st.permutations(range(4)))
    rp, rg = [perm[x] for x in p], [perm[x] for x in g]
    assert evaluate(rp, rg) == rep
    # uniform stretching
    k = data.draw(st.integers(2, 4))
    sp, sg = np.repeat(p, k), np.repeat(g, k)
    assert edit_score(sp, sg) == rep.edit
    for thr in (0.1, 0.25, 0.5):
        assert f1_at_k(sp, sg, thr).f1 == pytest.approx(f1_at_k(p, g, thr).f1, abs=1e-12)


def test_ignore_drops_background_segments():
    bg = 9
    assert edit_score([bg, A, bg, B], [A, A, B, bg], ignore=(bg,)) == 100.0
    assert edit_score([bg, A, bg, B], [A, A, B, bg]) < 100.0
    assert f1_at_k([bg, A, bg, B], [A, A, B, B], 0.1, ignore=(bg,))[1:] == (2, 0, 0)


def test_dataset_level_pooling():
    preds = [[A, A, B], [A] * 5]
    gts = [[A, B, B], [A] * 5]
    rep = evaluate_dataset(preds, gts)
    assert rep.acc == pytest.approx(100 * 7 / 8)
    assert rep.edit == pytest.approx((100 + 100) / 2)
    r1, r2 = f1_at_k(preds[0], gts[0], 0.5), f1_at_k(preds[1], gts[1], 0.5)
    tp, fp, fn = r1.tp + r2.tp, r1.fp + r2.fp, r1.fn + r2.fn
    assert rep.f1[50] == pytest.approx(100 * 2 * tp / (2 * tp + fp + fn))


def test_report_keys():
    d = evaluate([A, B], [A, B]).as_dict()
    assert sorted(d) == ["acc", "edit", "f1@10", "f1@25", "f1@50"]
