"""Dilated temporal graph reasoning: graph construction, DRGC layers, stages.

Each frame ``t`` at level ``k`` owns a three-node graph over frames
``(t - tau, t, t + tau)`` with ``tau = 2**k``. Nodes falling outside the
sequence are masked: their feature rows are zero and they take no weight in
the normalised adjacency.

Two edge-weight sources are built per graph. The similarity graph uses
cosine similarity between hidden rows; the learned graph is the 9-channel
output of a dilated convolution over the hidden sequence, reshaped row-major
to 3x3.

Only the centre node's output feeds the residual update for frame ``t``, so
the batched path computes just the centre row of each adjacency. The full
3x3 graphs are available through :func:`frame_graph` and the ``*_logits``
helpers for inspection and testing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .optim import Parameter, uniform_init

GRAPH_VARIANTS = ("both", "s-only", "l-only", "conv")
COS_EPS = 1e-8
CENTER = 1


@dataclass
class DtgrmStageConfig:
    num_classes: int
    d_hidden: int = 64
    num_levels: int = 10
    graph_variant: str = "both"
    order: int = field(default=3, init=False)

    def __post_init__(self):
        if self.num_levels < 1 or self.d_hidden < 1 or self.num_classes < 1:
            raise ValueError("stage dimensions and level count must be positive")
        if self.graph_variant not in GRAPH_VARIANTS:
            raise ValueError(f"unknown graph variant {self.graph_variant!r}; expected one of {GRAPH_VARIANTS}")

    def dilation(self, level):
        return 2**level


def neighbor_indices(T, tau):
    """Node indices ``(T, 3)`` for every frame and their validity mask."""
    t = np.arange(T)
    idx = np.stack([t - tau, t, t + tau], axis=1)
    valid = (idx >= 0) & (idx < T)
    return idx, valid


# ---------------------------------------------------------------- graph construction


def s_graph_logits(h, tau, eps=COS_EPS):
    """Full similarity-graph logits ``(T, 3, 3)`` and their mask."""
    h = ad.as_tensor(h)
    idx, valid = neighbor_indices(h.shape[0], tau)
    X = ad.index_rows(h, idx, valid)
    T, _, d = X.shape
    logits = ad.cosine_rows(X.reshape(T, 3, 1, d), X.reshape(T, 1, 3, d), eps)
    mask = valid[:, :, None] & valid[:, None, :]
    return ad.mul(logits, mask.astype(logits.dtype)), mask


def l_graph_logits(h, tau, weight, bias=None):
    """Full learned-graph logits ``(T, 3, 3)``; ``weight`` is ``(3, d, 9)``."""
    h = ad.as_tensor(h)
    if weight.shape[0] != 3 or weight.shape[2] != 9 or weight.shape[1] != h.shape[1]:
        raise ValueError(f"learned-graph filter must be (3, {h.shape[1]}, 9), got {weight.shape}")
    out = ad.conv1d(h, weight, tau, bias)
    return out.reshape(h.shape[0], 3, 3)


def build_s_graph(h, t, tau, eps=COS_EPS):
    """Similarity logits for the single graph centred on frame ``t``.

    Returns ``(logits, valid)`` where ``logits`` is a 3x3 array with masked
    entries set to zero and ``valid`` marks the in-range nodes.
    """
    h = ad.as_tensor(h).data
    T = h.shape[0]
    if not 0 <= t < T:
        raise IndexError(f"frame {t} outside [0, {T})")
    nodes = (t - tau, t, t + tau)
    valid = np.array([0 <= n < T for n in nodes])
    logits = np.zeros((3, 3), dtype=h.dtype)
    for i in range(3):
        for j in range(3):
            if valid[i] and valid[j]:
                a, b = h[nodes[i]], h[nodes[j]]
                logits[i, j] = a @ b / max(np.linalg.norm(a) * np.linalg.norm(b), eps)
    return logits, valid


def build_l_graph(h, level, weight, bias=None):
    """Learned-graph logits ``(T, 3, 3)`` at ``level`` (dilation ``2**level``)."""
    return l_graph_logits(h, 2**level, weight, bias)


def normalize_adjacency(logits, valid):
    """Row-wise masked softmax. Rows belonging to invalid nodes are all zero.

    Works on a single ``(3, 3)`` graph with ``valid`` of shape ``(3,)`` or a
    batch ``(T, 3, 3)`` with ``valid`` of shape ``(T, 3)``.
    """
    logits = ad.as_tensor(logits)
    valid = np.asarray(valid, dtype=bool)
    if not valid[..., CENTER].all():
        raise ValueError("centre node must be valid")
    col_mask = valid[..., None, :]
    A = ad.softmax(logits, axis=-1, mask=np.broadcast_to(col_mask, logits.shape))
    return ad.mul(A, valid[..., :, None].astype(A.dtype))


@dataclass
class FrameGraph:
    center: int
    level: int
    dilation: int
    node_indices: tuple
    valid_mask: np.ndarray
    s_logits: np.ndarray
    l_logits: np.ndarray

    @property
    def adj_s(self):
        return normalize_adjacency(self.s_logits, self.valid_mask).data

    @property
    def adj_l(self):
        return normalize_adjacency(self.l_logits, self.valid_mask).data


def frame_graph(h, t, level, l_weight, l_bias=None, eps=COS_EPS):
    """Both graphs for frame ``t`` at ``level`` as plain arrays."""
    tau = 2**level
    s, valid = build_s_graph(h, t, tau, eps)
    l = build_l_graph(h, level, ad.as_tensor(l_weight), l_bias).data[t].copy()
    l[~(valid[:, None] & valid[None, :])] = 0.0
    return FrameGraph(t, level, tau, (t - tau, t, t + tau), valid, s, l)


# ---------------------------------------------------------------- reasoning


def gcn_apply(X, A, W):
    """Graph convolution ``relu(A @ X @ W)``; batches over leading axes."""
    X, A, W = ad.as_tensor(X), ad.as_tensor(A), ad.as_tensor(W)
    if A.shape[-1] != X.shape[-2] or X.shape[-1] != W.shape[0]:
        raise ValueError(f"gcn shape mismatch: A {A.shape}, X {X.shape}, W {W.shape}")
    return ad.relu(ad.matmul(ad.matmul(A, X), W))


def drgc_layer(h, level, params, variant="both", eps=COS_EPS):
    """One dilated residual graph convolution layer over a ``(T, d)`` sequence.

    ``params`` maps the level-local names ``s.w``, ``l.w``, ``lgraph.w``,
    ``lgraph.b``, ``fuse.w``, ``fuse.b`` (and ``conv.w``/``conv.b`` for the
    ``conv`` variant) to tensors.
    """
    h = ad.as_tensor(h)
    if level < 0:
        raise ValueError("level must be non-negative")
    T, d = h.shape
    tau = 2**level
    if variant == "conv":
        o = ad.relu(ad.conv1d(h, params["conv.w"], tau, params["conv.b"]))
    else:
        _, valid = neighbor_indices(T, tau)
        X = ad.gather_neighbors(h, tau)
        o = None
        if variant in ("both", "s-only"):
            s_row = ad.cosine_rows(h.reshape(T, 1, d), X, eps)
            A_s = ad.softmax(s_row, axis=-1, mask=valid)
            o = ad.relu(ad.matmul(ad.weighted_rows(A_s, X), params["s.w"]))
        if variant in ("both", "l-only"):
            rows = slice(3 * CENTER, 3 * CENTER + 3)
            w = params["lgraph.w"][:, :, rows]
            b = params["lgraph.b"][rows]
            l_row = ad.conv1d(h, w, tau, b)
            A_l = ad.softmax(l_row, axis=-1, mask=valid)
            gl = ad.relu(ad.matmul(ad.weighted_rows(A_l, X), params["l.w"]))
            o = gl if o is None else o + gl
    return ad.linear(o, params["fuse.w"], params["fuse.b"]) + h


class DtgrmStage:
    """One refinement stage: embed likelihoods, K DRGC layers, classify."""

    def __init__(self, config: DtgrmStageConfig, rng: np.random.Generator, dtype=np.float64, prefix="stage"):
        self.config = config
        C, d = config.num_classes, config.d_hidden
        p = {}

        def add(name, shape, fan_in, zero=False):
            data = np.zeros(shape, dtype) if zero else uniform_init(rng, shape, fan_in, dtype)
            p[name] = Parameter(data, name=f"{prefix}.{name}")

        add("embed.w", (C, d), C)
        add("embed.b", (d,), 1, zero=True)
        v = config.graph_variant
        for k in range(config.num_levels):
            if v == "conv":
                add(f"level{k}.conv.w", (3, d, d), 3 * d)
                add(f"level{k}.conv.b", (d,), 1, zero=True)
            if v in ("both", "s-only"):
                add(f"level{k}.s.w", (d, d), d)
            if v in ("both", "l-only"):
                add(f"level{k}.l.w", (d, d), d)
                add(f"level{k}.lgraph.w", (3, d, 9), 3 * d)
                add(f"level{k}.lgraph.b", (9,), 1, zero=True)
            add(f"level{k}.fuse.w", (d, d), d)
            add(f"level{k}.fuse.b", (d,), 1, zero=True)
        add("head.w", (d, C), d)
        add("head.b", (C,), 1, zero=True)
        add("exchange.w", (d, 2), d)
        add("exchange.b", (2,), 1, zero=True)
        self.params = p
        self._levels = [
            {key.split(".", 1)[1]: val for key, val in p.items() if key.startswith(f"level{k}.")}
            for k in range(config.num_levels)
        ]

    def parameters(self, include_exchange=True):
        return [v for k, v in self.params.items() if include_exchange or not k.startswith("exchange.")]

    def level_params(self, k):
        if not 0 <= k < self.config.num_levels:
            raise ValueError(f"level {k} out of range")
        return self._levels[k]

    def __call__(self, y_in):
        return dtgrm_stage(self, y_in)


def embed_likelihoods(y, w, b=None):
    """Per-frame affine map from ``C`` class likelihoods to ``d`` hidden channels."""
    y = ad.as_tensor(y)
    if y.shape[-1] != w.shape[0]:
        raise ValueError(f"likelihood width {y.shape[-1]} does not match embedding {w.shape}")
    return ad.linear(y, w, b)


def dtgrm_stage(stage: DtgrmStage, y_in):
    """Refine ``(T, C)`` likelihoods. Returns ``(y_out, h_K)``."""
    p, cfg = stage.params, stage.config
    h = embed_likelihoods(ad.as_tensor(y_in, dtype=p["embed.w"].dtype), p["embed.w"], p["embed.b"])
    for k in range(cfg.num_levels):
        h = drgc_layer(h, k, stage.level_params(k), cfg.graph_variant)
    y_out = ad.softmax(ad.linear(h, p["head.w"], p["head.b"]), axis=-1)
    return y_out, h


def refine(y0, stages):
    """Run stages in sequence; each consumes the previous stage's likelihoods.

    Returns the list of stage outputs and the list of final hidden sequences.
    """
    outputs, hiddens = [], []
    y = y0
    for stage in stages:
        y, h = stage(y)
        outputs.append(y)
        hiddens.append(h)
    return outputs, hiddens
