import numpy as np
import pytest

from dtgrm import autodiff as ad
from dtgrm.backbone import Backbone, BackboneConfig
from dtgrm.gradcheck import check_gradients


def make(d_in=4, C=3, d=4, L=3, seed=0):
    return Backbone(BackboneConfig(d_in, C, d, L), np.random.default_rng(seed))


def test_output_rows_are_distributions():
    bb = make(d_in=5, C=4, d=8, L=4)
    y = bb(np.random.default_rng(1).normal(size=(30, 5))).data
    assert y.shape == (30, 4) and np.all(y >= 0)
    np.testing.assert_allclose(y.sum(1), 1, atol=1e-6)


def test_single_frame_sequence():
    y = make()(np.ones((1, 4))).data
    assert y.shape == (1, 3)
    np.testing.assert_allclose(y.sum(), 1, atol=1e-6)


def test_deterministic_for_fixed_seed():
    x = np.random.default_rng(2).normal(size=(12, 4))
    assert np.array_equal(make(seed=7)(x).data, make(seed=7)(x).data)


def test_receptive_field_bound():
    L = 3
    cfg = BackboneConfig(4, 3, 4, L)
    assert cfg.receptive_field == 2 ** (L + 1) - 1 == 15
    half = cfg.receptive_field // 2
    bb = Backbone(cfg, np.random.default_rng(3))
    rng = np.random.default_rng(4)
    x = rng.normal(size=(40, 4))
    t = 20
    base = bb(x).data[t]
    for off in (half + 1, -(half + 1), 15, -19):
        x2 = x.copy()
        x2[t + off] += rng.normal(size=4) * 5
        assert np.array_equal(bb(x2).data[t], base)
    x2 = x.copy()
    x2[t + half] += 5.0
    assert not np.array_equal(bb(x2).data[t], base)


def test_layer_dilations_double():
    bb = make(L=4)
    names = [n for n in bb.params if n.endswith("dilated.w")]
    assert names == [f"layer{k}.dilated.w" for k in range(4)]


def test_gradient_tiny_backbone():
    rng = np.random.default_rng(5)
    bb = make(d_in=4, C=3, d=4, L=3, seed=6)
    x = ad.Tensor(rng.normal(size=(8, 4)), requires_grad=True)
    proj = rng.normal(size=(8, 3))
    assert check_gradients([x] + bb.parameters(), lambda: ad.sum_(ad.mul(bb(x), proj))) < 1e-4


def test_rejects_wrong_width_and_empty():
    bb = make()
    with pytest.raises(ValueError):
        bb(np.zeros((5, 3)))
    with pytest.raises(ValueError):
        bb(np.zeros((0, 4)))
    with pytest.raises(ValueError):
        BackboneConfig(4, 3, 0, 3)
