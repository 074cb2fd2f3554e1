import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtgrm import autodiff as ad
from dtgrm.losses import LossWeights, cls_loss, tmse_loss, total_loss
from dtgrm.selfsup import ExchangeSpec


def probs(rng, T, C):
    return rng.dirichlet(np.ones(C), size=T)


def tmse_oracle(y, tau=4.0):
    T, C = y.shape
    total = 0.0
    for t in range(1, T):
        for c in range(C):
            r = math.log(y[t, c]) - math.log(y[t - 1, c])
            total += min(abs(r), tau) ** 2
    return total / (T * C)


def cls_oracle(y, target):
    return -sum(math.log(y[t, target[t]]) for t in range(len(target))) / len(target)


# ---------------------------------------------------------------- classification


def test_cls_examples():
    assert cls_loss(np.array([[0.7, 0.2, 0.1]]), [0]).item() == pytest.approx(0.356675, abs=1e-6)
    assert cls_loss(np.full((4, 5), 0.2), [0, 1, 4, 2]).item() == pytest.approx(math.log(5))
    assert cls_loss(np.eye(3), [0, 1, 2]).item() == pytest.approx(0.0, abs=1e-12)


def test_cls_clamps_zero_probability():
    assert cls_loss(np.array([[1.0, 0.0]]), [1]).item() == pytest.approx(-math.log(1e-12))


def test_cls_rejects_bad_targets():
    with pytest.raises(ValueError):
        cls_loss(np.full((2, 3), 1 / 3), [0, 3])
    with pytest.raises(ValueError):
        cls_loss(np.full((2, 3), 1 / 3), [0])


# ---------------------------------------------------------------- T-MSE


def test_tmse_examples():
    assert tmse_loss(np.tile([0.2, 0.3, 0.5], (6, 1))).item() == 0.0
    y = np.array([[1.0, 1.0], [math.exp(-10), 1.0]])
    assert tmse_loss(y, tau=4.0).item() * 4 == pytest.approx(16.0)
    assert tmse_loss(np.array([[0.5, 0.5]])).item() == 0.0


def test_tmse_double_loop_oracle():
    y = probs(np.random.default_rng(0), 4, 3)
    assert tmse_loss(y).item() == pytest.approx(tmse_oracle(y), rel=1e-12)
    y = probs(np.random.default_rng(1), 6, 3) ** 8
    y /= y.sum(1, keepdims=True)
    assert tmse_loss(y, tau=2.0).item() == pytest.approx(tmse_oracle(y, 2.0), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(2, 6), st.integers(0, 10**6))
def test_tmse_class_permutation_invariant(T, C, seed):
    rng = np.random.default_rng(seed)
    y = probs(rng, T, C) + 1e-6
    perm = rng.permutation(C)
    assert tmse_loss(y).item() == pytest.approx(tmse_loss(y[:, perm]).item(), rel=1e-12, abs=1e-15)


def test_tmse_previous_frame_is_detached():
    rng = np.random.default_rng(2)
    y = ad.Tensor(probs(rng, 2, 3), requires_grad=True)
    ad.backward(tmse_loss(y))
    assert np.all(y.grad[0] == 0) and np.any(y.grad[1] != 0)
    y2 = y.data.copy()
    y2[0] = [0.1, 0.1, 0.8]
    assert tmse_loss(y2).item() != tmse_loss(y.data).item()


# ---------------------------------------------------------------- composite


def test_total_reduces_to_cls_with_zero_weights():
    rng = np.random.default_rng(3)
    target = rng.integers(0, 3, size=5)
    outs = [probs(rng, 5, 3) for _ in range(3)]
    w = LossWeights(omega=0, lambda_e=0, lambda_c=0)
    loss, _ = total_loss(outs, None, None, target, None, w)
    assert loss.item() == pytest.approx(sum(cls_oracle(y, target) for y in outs), rel=1e-12)


def test_exchange_term_vanishes_for_perfect_detector():
    rng = np.random.default_rng(4)
    target = rng.integers(0, 3, size=6)
    outs = [probs(rng, 6, 3) for _ in range(2)]
    spec = ExchangeSpec([], np.zeros(6, dtype=np.int64), 0.0)
    e = np.tile([1.0, 0.0], (6, 1))
    _, terms = total_loss(outs, outs, [e], target, spec, LossWeights())
    assert terms["exchange"] == pytest.approx(0.0, abs=1e-12)


def test_two_stage_toy_matches_term_by_term_oracle():
    rng = np.random.default_rng(5)
    T, C = 6, 3
    target = rng.integers(0, C, size=T)
    ordered = [probs(rng, T, C) for _ in range(2)]
    exchanged = [probs(rng, T, C) for _ in range(2)]
    heads = [probs(rng, T, 2)]
    labels = np.array([0, 1, 0, 0, 1, 0])
    spec = ExchangeSpec([(1, 4)], labels, 40.0)
    w = LossWeights(omega=0.15, lambda_e=2.0, lambda_c=0.5)
    loss, terms = total_loss(ordered, exchanged, heads, target, spec, w)
    ref = 0.0
    for y in ordered:
        ref += cls_oracle(y, target) + 0.15 * tmse_oracle(y)
    for y in exchanged:
        ref += 0.5 * cls_oracle(y, target) + 0.15 * tmse_oracle(y)
    ref += 2.0 * cls_oracle(heads[0], labels)
    assert loss.item() == pytest.approx(ref, rel=1e-12)
    parts = sum(v for k, v in terms.items() if k != "total")
    assert parts == pytest.approx(terms["total"], rel=1e-12)
    assert all(v >= 0 for v in terms.values())


def test_total_loss_validates_stage_counts():
    rng = np.random.default_rng(6)
    outs = [probs(rng, 4, 3) for _ in range(2)]
    spec = ExchangeSpec([], np.zeros(4, dtype=np.int64), 0.0)
    with pytest.raises(ValueError):
        total_loss(outs, outs[:1], [probs(rng, 4, 2)], [0] * 4, spec, LossWeights())
    with pytest.raises(ValueError):
        total_loss(outs, outs, [], [0] * 4, spec, LossWeights())
    with pytest.raises(ValueError):
        LossWeights(omega=-1)


def test_default_weights():
    w = LossWeights()
    assert (w.omega, w.lambda_e, w.lambda_c, w.tmse_tau) == (0.15, 2.0, 0.5, 4.0)
