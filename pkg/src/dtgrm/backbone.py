"""Single-stage dilated temporal convolution backbone."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .optim import Parameter, uniform_init


@dataclass
class BackboneConfig:
    d_in: int
    num_classes: int
    d_hidden: int = 64
    num_layers: int = 10

    def __post_init__(self):
        if min(self.d_in, self.num_classes, self.d_hidden, self.num_layers) < 1:
            raise ValueError("backbone dimensions and layer count must be positive")

    @property
    def receptive_field(self):
        return 2 ** (self.num_layers + 1) - 1


class Backbone:
    """1x1 conv in, ``num_layers`` dilated residual blocks, 1x1 conv out, softmax.

    Block ``k`` uses a kernel-3 convolution with dilation ``2**k``.
    """

    def __init__(self, config: BackboneConfig, rng: np.random.Generator, dtype=np.float64, prefix="backbone"):
        self.config = config
        c, d = config, config.d_hidden
        p = {}

        def add(name, shape, fan_in, zero=False):
            data = np.zeros(shape, dtype) if zero else uniform_init(rng, shape, fan_in, dtype)
            p[name] = Parameter(data, name=f"{prefix}.{name}")

        add("in.w", (c.d_in, d), c.d_in)
        add("in.b", (d,), 1, zero=True)
        for k in range(c.num_layers):
            add(f"layer{k}.dilated.w", (3, d, d), 3 * d)
            add(f"layer{k}.dilated.b", (d,), 1, zero=True)
            add(f"layer{k}.pointwise.w", (d, d), d)
            add(f"layer{k}.pointwise.b", (d,), 1, zero=True)
        add("out.w", (d, c.num_classes), d)
        add("out.b", (c.num_classes,), 1, zero=True)
        self.params = p

    def parameters(self):
        return list(self.params.values())

    def __call__(self, features):
        return backbone_forward(self, features)


def backbone_forward(backbone: Backbone, features):
    """Map ``(T, d_in)`` features to ``(T, C)`` per-frame class likelihoods."""
    p, cfg = backbone.params, backbone.config
    x = ad.as_tensor(features, dtype=p["in.w"].dtype)
    if x.ndim != 2 or x.shape[1] != cfg.d_in:
        raise ValueError(f"expected features of width {cfg.d_in}, got shape {x.shape}")
    if x.shape[0] < 1:
        raise ValueError("empty sequence")
    h = ad.linear(x, p["in.w"], p["in.b"])
    for k in range(cfg.num_layers):
        out = ad.relu(ad.conv1d(h, p[f"layer{k}.dilated.w"], 2**k, p[f"layer{k}.dilated.b"]))
        out = ad.linear(out, p[f"layer{k}.pointwise.w"], p[f"layer{k}.pointwise.b"])
        h = h + out
    logits = ad.linear(h, p["out.w"], p["out.b"])
    return ad.softmax(logits, axis=-1)
