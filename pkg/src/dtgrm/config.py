"""Run configuration and its INI-style text format.

A config file has one section per group; every key is optional and falls
back to the defaults below::

    [data]
    num_classes = 6
    n_train = 30
    n_test = 10
    ; data_dir = path/to/dataset   (read from disk instead of generating)

    [backbone]
    d_hidden = 64
    num_layers = 10

    [dtgrm]
    d_hidden = 64
    num_levels = 10
    num_stages = 3
    graph_variant = both

    [loss]
    omega = 0.15
    lambda_e = 2
    lambda_c = 0.5
    tmse_tau = 4

    [train]
    epochs = 100
    lr = 5e-4
    seed = 0
    eta = 20
    self_supervision = true
    precision = 32
    out_dir = runs/default
    eval_every = 10

``[data]`` also accepts every synthetic generator field (``d_in``,
``min_segments``, ``max_segments``, ``min_length``, ``max_length``,
``noise_std``, ``drift_scale``, ``seed``) and ``transition`` written as
semicolon-separated rows of space-separated numbers.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .losses import LossWeights
from .synthetic import GeneratorConfig, forward_transition


@dataclass
class DataSection:
    n_train: int = 30
    n_test: int = 10
    data_dir: str | None = None
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)


@dataclass
class BackboneSection:
    d_hidden: int = 64
    num_layers: int = 10


@dataclass
class DtgrmSection:
    d_hidden: int = 64
    num_levels: int = 10
    num_stages: int = 3
    graph_variant: str = "both"


@dataclass
class TrainSection:
    epochs: int = 100
    lr: float = 5e-4
    seed: int = 0
    eta: float = 20.0
    self_supervision: bool = True
    precision: int = 32
    out_dir: str = "runs/default"
    eval_every: int = 10

    def __post_init__(self):
        if self.precision not in (32, 64):
            raise ValueError("precision must be 32 or 64")
        if not 0 <= self.eta <= 100:
            raise ValueError("eta must be a percentage")

    @property
    def dtype(self):
        return np.float32 if self.precision == 32 else np.float64


@dataclass
class RunConfig:
    data: DataSection = field(default_factory=DataSection)
    backbone: BackboneSection = field(default_factory=BackboneSection)
    dtgrm: DtgrmSection = field(default_factory=DtgrmSection)
    loss: LossWeights = field(default_factory=LossWeights)
    train: TrainSection = field(default_factory=TrainSection)

    def to_sections(self):
        """Flat ``{section: {key: str}}`` view, as written to config files."""
        out = {}
        for name in ("data", "backbone", "dtgrm", "loss", "train"):
            sec = getattr(self, name)
            items = {}
            for f in dataclasses.fields(sec):
                value = getattr(sec, f.name)
                if f.name == "generator":
                    for gf in dataclasses.fields(value):
                        items[gf.name] = _fmt(getattr(value, gf.name))
                elif value is not None:
                    items[f.name] = _fmt(value)
            out[name] = items
        return out

    def dumps(self):
        lines = []
        for sec, items in self.to_sections().items():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in items.items()]
            lines.append("")
        return "\n".join(lines)


def _fmt(value):
    if isinstance(value, np.ndarray):
        return "; ".join(" ".join(repr(float(x)) for x in row) for row in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw, kind):
    kind = kind.replace(" ", "")
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind.startswith("np.ndarray"):
        return np.array([[float(x) for x in row.split()] for row in raw.split(";") if row.strip()])
    return raw.strip()


def _apply(obj, items, section):
    hints = {f.name: f.type for f in dataclasses.fields(obj)}
    for key, raw in items.items():
        if key not in hints:
            raise ValueError(f"unknown key {key!r} in [{section}]")
        setattr(obj, key, _parse(raw, str(hints[key]).split("|")[0]))


def from_sections(sections):
    cfg = RunConfig()
    known = {"data", "backbone", "dtgrm", "loss", "train"}
    for sec, items in sections.items():
        if sec not in known:
            raise ValueError(f"unknown config section [{sec}]")
        items = dict(items)
        if sec == "data":
            gen_keys = {f.name for f in dataclasses.fields(GeneratorConfig)}
            gen = {k: items.pop(k) for k in list(items) if k in gen_keys}
            _apply(cfg.data.generator, gen, sec)
            if "transition" not in gen:
                cfg.data.generator.transition = forward_transition(cfg.data.generator.num_classes)
            cfg.data.generator.validate()
        _apply(getattr(cfg, sec), items, sec)
    # re-run invariant checks after mutation
    cfg.loss.__post_init__()
    cfg.train.__post_init__()
    return cfg


def loads(text):
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read_string(text)
    return from_sections({s: dict(parser[s]) for s in parser.sections()})


def load(path):
    with open(path) as fh:
        return loads(fh.read())


def override(cfg: RunConfig, **flags):
    """Apply CLI-style overrides; ``None`` values are ignored."""
    cfg = dataclasses.replace(
        cfg,
        data=dataclasses.replace(cfg.data, generator=dataclasses.replace(cfg.data.generator)),
        backbone=dataclasses.replace(cfg.backbone),
        dtgrm=dataclasses.replace(cfg.dtgrm),
        loss=dataclasses.replace(cfg.loss),
        train=dataclasses.replace(cfg.train),
    )
    where = {
        "seed": cfg.train, "out_dir": cfg.train, "precision": cfg.train, "eta": cfg.train,
        "epochs": cfg.train, "lr": cfg.train, "self_supervision": cfg.train,
        "num_stages": cfg.dtgrm, "num_levels": cfg.dtgrm, "graph_variant": cfg.dtgrm,
        "omega": cfg.loss, "lambda_e": cfg.loss, "lambda_c": cfg.loss,
        "data_dir": cfg.data, "n_train": cfg.data, "n_test": cfg.data,
    }
    for key, value in flags.items():
        if value is None:
            continue
        if key not in where:
            raise ValueError(f"unknown override {key!r}")
        setattr(where[key], key, value)
    cfg.loss.__post_init__()
    cfg.train.__post_init__()
    return cfg
