"""Backbone plus stacked refinement stages, as one trainable model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .backbone import Backbone, BackboneConfig
from .graph import DtgrmStage, DtgrmStageConfig, refine
from .selfsup import exchange_head


@dataclass
class ModelConfig:
    backbone: BackboneConfig
    stage: DtgrmStageConfig
    num_stages: int = 3

    def __post_init__(self):
        if self.num_stages < 0:
            raise ValueError("num_stages must be non-negative")
        if self.backbone.num_classes != self.stage.num_classes:
            raise ValueError("backbone and stage class counts differ")


@dataclass
class ForwardResult:
    outputs: list  # backbone prediction, then one per stage
    hiddens: list = field(default_factory=list)  # h_K per stage

    @property
    def final(self):
        return self.outputs[-1]


class SegmentationModel:
    def __init__(self, config: ModelConfig, seed=0, dtype=np.float64):
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = np.random.Generator(np.random.Philox(key=seed))
        self.backbone = Backbone(config.backbone, rng, dtype)
        self.stages = [
            DtgrmStage(config.stage, rng, dtype, prefix=f"stage{s + 1}") for s in range(config.num_stages)
        ]

    def named_parameters(self):
        out = dict((p.name, p) for p in self.backbone.parameters())
        for st in self.stages:
            out.update((p.name, p) for p in st.parameters())
        return out

    def parameters(self, include_exchange=True):
        ps = self.backbone.parameters()
        for st in self.stages:
            ps += st.parameters(include_exchange)
        return ps

    def astype(self, dtype):
        self.dtype = np.dtype(dtype)
        for p in self.parameters():
            p.astype(dtype)

    def forward(self, features):
        x = ad.Tensor(np.asarray(features), dtype=self.dtype)
        y0 = self.backbone(x)
        outs, hiddens = refine(y0, self.stages)
        return ForwardResult([y0] + outs, hiddens)

    __call__ = forward

    def exchange_outputs(self, hiddens):
        return [exchange_head(h, st.params["exchange.w"], st.params["exchange.b"]) for st, h in zip(self.stages, hiddens)]

    def predict(self, features):
        """Per-stage ``(T, C)`` likelihood arrays (no graph recorded)."""
        res = self.forward(features)
        return [y.data for y in res.outputs]
