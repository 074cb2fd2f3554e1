"""Central finite-difference checks for every differentiable operation.

Each check builds a small random instance at 64-bit precision, reduces the
operation's output to a scalar through a fixed random projection, and
compares the analytic gradient of every input against central differences.
The relative error of one input is ``|analytic - numeric|_2 /
max(|analytic|_2, |numeric|_2, 1e-8)``; a check reports its worst input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .backbone import Backbone, BackboneConfig
from .graph import (
    DtgrmStage,
    DtgrmStageConfig,
    drgc_layer,
    embed_likelihoods,
    gcn_apply,
    l_graph_logits,
    normalize_adjacency,
    s_graph_logits,
)
from .losses import LossWeights, cls_loss, tmse_loss, total_loss
from .model import ModelConfig, SegmentationModel
from .selfsup import ExchangeSpec, exchange_head

STEP = 1e-5
TOLERANCE = 1e-4


@dataclass
class Check:
    name: str
    # rng -> (leaf tensors, scalar fn) or (leaf tensors, scalar fn, fn used for differences)
    build: Callable


@dataclass
class CheckResult:
    name: str
    rel_error: float
    passed: bool


def numeric_grad(f, tensor, step=STEP):
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = float(f().data)
        flat[i] = orig - step
        down = float(f().data)
        flat[i] = orig
        out[i] = (up - down) / (2 * step)
    return grad


def rel_error(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-8))


def check_gradients(inputs, f, f_numeric=None, step=STEP):
    """Worst relative error over ``inputs`` for scalar function ``f``."""
    f_numeric = f if f_numeric is None else f_numeric
    for t in inputs:
        t.grad = None
    ad.backward(f())
    worst = 0.0
    for t in inputs:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        worst = max(worst, rel_error(analytic, numeric_grad(f_numeric, t, step)))
    return worst


def _leaf(rng, *shape, low=-1.0, high=1.0):
    return ad.Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def _project(rng, out_fn):
    """Scalarise ``out_fn()`` with a fixed random weighting."""
    cache = {}

    def f():
        out = out_fn()
        if "w" not in cache:
            cache["w"] = ad.Tensor(rng.normal(size=out.shape))
        return ad.sum_(ad.mul(out, cache["w"]))

    return f


def _prob_rows(rng, T, C):
    z = rng.normal(size=(T, C))
    return np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)


def _unary(op, low=-1.0, high=1.0):
    def build(rng):
        a = _leaf(rng, 3, 4, low=low, high=high)
        return [a], _project(rng, lambda: op(a))

    return build


def _binary(op):
    def build(rng):
        a, b = _leaf(rng, 3, 4), _leaf(rng, 1, 4)
        return [a, b], _project(rng, lambda: op(a, b))

    return build


def _build_matmul(rng):
    a, b = _leaf(rng, 3, 4), _leaf(rng, 4, 2)
    return [a, b], _project(rng, lambda: ad.matmul(a, b))


def _build_conv1d(rng):
    x, w, b = _leaf(rng, 7, 3), _leaf(rng, 3, 3, 2), _leaf(rng, 2)
    return [x, w, b], _project(rng, lambda: ad.conv1d(x, w, 2, b))


def _build_softmax(rng):
    a = _leaf(rng, 4, 3, low=-2, high=2)
    mask = np.array([[1, 1, 1], [0, 1, 1], [1, 1, 0], [0, 1, 0]], dtype=bool)
    return [a], _project(rng, lambda: ad.softmax(a, axis=-1, mask=mask))


def _build_cosine(rng):
    a, b = _leaf(rng, 4, 1, 5), _leaf(rng, 4, 3, 5)
    return [a, b], _project(rng, lambda: ad.cosine_rows(a, b))


def _build_index(rng):
    a = _leaf(rng, 5, 3)
    return [a], _project(rng, lambda: a[np.array([0, 2, 2, 4]), np.array([1, 0, 0, 2])])


def _build_index_rows(rng):
    a = _leaf(rng, 5, 3)
    idx = np.array([[0, 1, 2], [3, 4, 4]])
    valid = np.array([[True, False, True], [True, True, True]])
    return [a], _project(rng, lambda: ad.index_rows(a, idx, valid))


def _build_gather(rng):
    a = _leaf(rng, 6, 3)
    return [a], _project(rng, lambda: ad.gather_neighbors(a, 2))


def _build_weighted(rng):
    w, X = _leaf(rng, 4, 3), _leaf(rng, 4, 3, 5)
    return [w, X], _project(rng, lambda: ad.weighted_rows(w, X))


def _build_concat(rng):
    a, b = _leaf(rng, 2, 3), _leaf(rng, 4, 3)
    return [a, b], _project(rng, lambda: ad.concat([a, b], axis=0))


def _build_reshape(rng):
    a = _leaf(rng, 3, 4)
    return [a], _project(rng, lambda: a.reshape(2, 6))


def _build_reduce(op):
    def build(rng):
        a = _leaf(rng, 3, 4)
        return [a], _project(rng, lambda: op(a))

    return build


def _build_embed(rng):
    y = ad.Tensor(_prob_rows(rng, 5, 3), requires_grad=True)
    w, b = _leaf(rng, 3, 4), _leaf(rng, 4)
    return [y, w, b], _project(rng, lambda: embed_likelihoods(y, w, b))


def _build_s_graph(rng):
    h = _leaf(rng, 6, 4)
    return [h], _project(rng, lambda: s_graph_logits(h, 2)[0])


def _build_l_graph(rng):
    h, w, b = _leaf(rng, 6, 4), _leaf(rng, 3, 4, 9), _leaf(rng, 9)
    return [h, w, b], _project(rng, lambda: l_graph_logits(h, 2, w, b))


def _build_normalize(rng):
    logits = _leaf(rng, 6, 3, 3, low=-2, high=2)
    valid = np.ones((6, 3), dtype=bool)
    valid[0, 0] = valid[1, 0] = valid[5, 2] = False
    return [logits], _project(rng, lambda: normalize_adjacency(logits, valid))


def _build_gcn(rng):
    X, W = _leaf(rng, 4, 3, 5), _leaf(rng, 5, 5)
    raw = _leaf(rng, 4, 3, 3, low=-2, high=2)
    return [X, W, raw], _project(rng, lambda: gcn_apply(X, ad.softmax(raw, axis=-1), W))


def _drgc_params(rng, d, variant):
    p = {"fuse.w": _leaf(rng, d, d), "fuse.b": _leaf(rng, d)}
    if variant == "conv":
        p.update({"conv.w": _leaf(rng, 3, d, d), "conv.b": _leaf(rng, d)})
    if variant in ("both", "s-only"):
        p["s.w"] = _leaf(rng, d, d)
    if variant in ("both", "l-only"):
        p.update({"l.w": _leaf(rng, d, d), "lgraph.w": _leaf(rng, 3, d, 9), "lgraph.b": _leaf(rng, 9)})
    return p


def _build_drgc(variant):
    def build(rng):
        h = _leaf(rng, 6, 3)
        p = _drgc_params(rng, 3, variant)
        return [h] + list(p.values()), _project(rng, lambda: drgc_layer(h, 1, p, variant))

    return build


def _build_backbone(rng):
    bb = Backbone(BackboneConfig(4, 3, d_hidden=4, num_layers=3), rng)
    for p in bb.parameters():
        p.data = rng.uniform(-0.8, 0.8, size=p.shape)
    x = _leaf(rng, 8, 4)
    return [x] + bb.parameters(), _project(rng, lambda: bb(x))


def _build_stage(rng):
    st = DtgrmStage(DtgrmStageConfig(3, d_hidden=4, num_levels=3), rng)
    for p in st.parameters():
        p.data = rng.uniform(-0.8, 0.8, size=p.shape)
    y = ad.Tensor(_prob_rows(rng, 6, 3), requires_grad=True)
    return [y] + st.parameters(include_exchange=False), _project(rng, lambda: st(y)[0])


def _build_exchange_head(rng):
    st = DtgrmStage(DtgrmStageConfig(3, d_hidden=4, num_levels=2), rng)
    for p in st.parameters():
        p.data = rng.uniform(-0.8, 0.8, size=p.shape)
    y = ad.Tensor(_prob_rows(rng, 6, 3))
    ps = st.parameters()

    def out():
        _, h = st(y)
        return exchange_head(h, st.params["exchange.w"], st.params["exchange.b"])

    return ps, _project(rng, out)


def _build_cls(rng):
    y = ad.Tensor(_prob_rows(rng, 5, 3), requires_grad=True)
    target = rng.integers(0, 3, size=5)
    return [y], lambda: cls_loss(y, target)


def _build_tmse(rng):
    y = ad.Tensor(_prob_rows(rng, 5, 3), requires_grad=True)
    return [y], lambda: tmse_loss(y, 0.6, detach_prev=False)


def _build_tmse_detached(rng):
    # analytic: the earlier frame is a constant; numeric: perturb y with the
    # earlier-frame values frozen at the base point
    y = ad.Tensor(_prob_rows(rng, 5, 3), requires_grad=True)
    frozen = y.data.copy()
    T, C = y.shape

    def numeric():
        prev = np.log(frozen[:-1])
        delta = np.clip(np.log(y.data[1:]) - prev, -0.6, 0.6)
        return ad.Tensor((delta**2).sum() / (T * C))

    return [y], lambda: tmse_loss(y, 0.6), numeric


def tiny_model(rng, T=6, C=3, d=4, K=3, S=2, d_in=4):
    cfg = ModelConfig(BackboneConfig(d_in, C, d_hidden=d, num_layers=3), DtgrmStageConfig(C, d_hidden=d, num_levels=K), S)
    model = SegmentationModel(cfg, seed=int(rng.integers(0, 2**31)))
    for p in model.parameters():
        p.data = rng.uniform(-0.8, 0.8, size=p.shape)
    return model


def _build_full_model(rng):
    T, C = 6, 3
    model = tiny_model(rng, T=T, C=C)
    x = rng.normal(size=(T, 4))
    pairs = [(0, 3)]
    labels = np.zeros(T, dtype=np.int64)
    labels[[0, 3]] = 1
    spec = ExchangeSpec(pairs, labels, 33.0)
    x_ex = spec.apply(x)
    targets = rng.integers(0, C, size=T)
    weights = LossWeights(tmse_tau=4.0, tmse_detach=False)

    def f():
        r = model(x)
        re = model(x_ex)
        loss, _ = total_loss(r.outputs, re.outputs, model.exchange_outputs(re.hiddens), targets, spec, weights)
        return loss

    return model.parameters(), f


def _faulty_square(a):
    # deliberately wrong derivative (3a instead of 2a), used as a negative control
    return ad._result(a.data * a.data, (a,), lambda g: (3.0 * a.data * g,), "faulty_square")


def default_checks():
    return [
        Check("add", _binary(ad.add)),
        Check("sub", _binary(ad.sub)),
        Check("mul", _binary(ad.mul)),
        Check("neg", _unary(ad.neg)),
        Check("square", _unary(ad.square)),
        Check("relu", _unary(ad.relu)),
        Check("exp", _unary(ad.exp)),
        Check("log", _unary(ad.log, low=0.2, high=2.0)),
        Check("clamp", _unary(lambda a: ad.clamp(a, -0.5, 0.5))),
        Check("sum", _build_reduce(lambda a: ad.sum_(a, axis=1))),
        Check("mean", _build_reduce(lambda a: ad.mean(a, axis=0))),
        Check("reshape", _build_reshape),
        Check("index", _build_index),
        Check("index_rows", _build_index_rows),
        Check("gather_neighbors", _build_gather),
        Check("weighted_rows", _build_weighted),
        Check("concat", _build_concat),
        Check("matmul", _build_matmul),
        Check("conv1d", _build_conv1d),
        Check("softmax", _build_softmax),
        Check("cosine_rows", _build_cosine),
        Check("embed_likelihoods", _build_embed),
        Check("s_graph", _build_s_graph),
        Check("l_graph", _build_l_graph),
        Check("normalize_adjacency", _build_normalize),
        Check("gcn_apply", _build_gcn),
        Check("drgc_layer", _build_drgc("both")),
        Check("drgc_layer[s-only]", _build_drgc("s-only")),
        Check("drgc_layer[l-only]", _build_drgc("l-only")),
        Check("drgc_layer[conv]", _build_drgc("conv")),
        Check("backbone", _build_backbone),
        Check("dtgrm_stage", _build_stage),
        Check("exchange_head", _build_exchange_head),
        Check("cls_loss", _build_cls),
        Check("tmse_loss", _build_tmse),
        Check("tmse_loss[detached]", _build_tmse_detached),
        Check("full_model", _build_full_model),
    ]


def faulty_check():
    return Check("faulty_square", _unary(_faulty_square))


def run_gradcheck(checks=None, seed=0, tolerance=TOLERANCE):
    checks = default_checks() if checks is None else checks
    results = []
    for i, check in enumerate(checks):
        rng = np.random.default_rng([seed, i])
        err = check_gradients(*check.build(rng))
        results.append(CheckResult(check.name, err, err < tolerance))
    return results
