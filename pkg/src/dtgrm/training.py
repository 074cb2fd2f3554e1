"""Training loop, evaluation and ablation sweeps."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import io
from .backbone import BackboneConfig
from .config import RunConfig, from_sections
from .graph import DtgrmStageConfig
from .losses import total_loss
from .metrics import MetricReport, evaluate_dataset
from .model import ModelConfig, SegmentationModel
from .optim import adam_step, zero_grad
from .selfsup import exchange_frames
from .synthetic import derive_key, generate_split

log = logging.getLogger(__name__)


class NonFiniteLoss(FloatingPointError):
    pass


def build_model(cfg: RunConfig, d_in, num_classes):
    mc = ModelConfig(
        BackboneConfig(d_in, num_classes, cfg.backbone.d_hidden, cfg.backbone.num_layers),
        DtgrmStageConfig(num_classes, cfg.dtgrm.d_hidden, cfg.dtgrm.num_levels, cfg.dtgrm.graph_variant),
        cfg.dtgrm.num_stages,
    )
    return SegmentationModel(mc, seed=derive_key(cfg.train.seed, 0x1417), dtype=cfg.train.dtype)


def load_data(cfg: RunConfig):
    """Returns ``(train, test, num_classes)``; reads ``data_dir`` when set."""
    if cfg.data.data_dir:
        root = Path(cfg.data.data_dir)
        train, C = io.read_dataset(root / "train")
        test, C_test = io.read_dataset(root / "test") if (root / "test").exists() else ([], C)
        if C_test != C:
            raise io.FormatError("train and test splits disagree on class count")
        return train, test, C
    train, test = generate_split(cfg.data.generator, cfg.data.n_train, cfg.data.n_test)
    return train, test, cfg.data.generator.num_classes


def predict_labels(likelihoods):
    """Frame labels by argmax; ties go to the lowest class index."""
    return np.argmax(likelihoods, axis=-1)


def evaluate_model(model: SegmentationModel, sequences, ignore=()):
    """One dataset-level :class:`MetricReport` per stage (backbone first)."""
    n = len(model.stages) + 1
    preds = [[] for _ in range(n)]
    for seq in sequences:
        for s, y in enumerate(model.predict(seq.features)):
            preds[s].append(predict_labels(y))
    gts = [seq.labels for seq in sequences]
    return [evaluate_dataset(p, gts, ignore=ignore) for p in preds]


def exchange_detection(model: SegmentationModel, sequences, eta, seed=0):
    """Balanced accuracy of the last stage's exchanged-frame detector."""
    if not model.stages:
        raise ValueError("model has no refinement stage")
    rng = np.random.Generator(np.random.Philox(key=seed))
    tp = fn = tn = fp = 0
    for seq in sequences:
        x_ex, spec = exchange_frames(seq.features, eta, rng)
        res = model(x_ex)
        e = model.exchange_outputs(res.hiddens)[-1]
        flag = predict_labels(e.data) == 1
        truth = spec.labels == 1
        tp += int((flag & truth).sum())
        fn += int((~flag & truth).sum())
        tn += int((~flag & ~truth).sum())
        fp += int((flag & ~truth).sum())
    tpr = tp / (tp + fn) if tp + fn else 0.0
    tnr = tn / (tn + fp) if tn + fp else 0.0
    return 0.5 * (tpr + tnr)


def report_record(reports, prefix):
    out = {}
    for s, r in enumerate(reports):
        out.update(r.as_dict(f"{prefix}stage{s}/"))
    return out


@dataclass
class TrainResult:
    model: SegmentationModel
    losses: list = field(default_factory=list)  # mean total loss per epoch
    records: list = field(default_factory=list)
    test_reports: list = field(default_factory=list)
    train_reports: list = field(default_factory=list)


def train_step(model, seq, cfg: RunConfig, rng):
    ss = cfg.train.self_supervision
    res = model(seq.features)
    ex_out = heads = spec = None
    if ss:
        x_ex, spec = exchange_frames(seq.features, cfg.train.eta, rng)
        res_ex = model(x_ex)
        ex_out = res_ex.outputs
        heads = model.exchange_outputs(res_ex.hiddens)
    loss, terms = total_loss(res.outputs, ex_out, heads, seq.labels, spec, cfg.loss)
    if not np.isfinite(terms["total"]):
        raise NonFiniteLoss(f"non-finite loss on {seq.id}: {terms}")
    params = model.parameters(include_exchange=ss)
    zero_grad(model.parameters())
    ad.backward(loss)
    adam_step(params, lr=cfg.train.lr)
    return terms


def train(cfg: RunConfig, train_set, test_set, num_classes, out_dir=None, log_path=None):
    """Train end to end.

    With ``out_dir`` set, writes ``last.ckpt``, ``best.ckpt`` (best final-stage
    test edit score, or train edit when there is no test split) and
    ``train_log.jsonl``.
    """
    if cfg.train.self_supervision is False:
        cfg = dataclasses.replace(cfg, loss=dataclasses.replace(cfg.loss, lambda_e=0.0, lambda_c=0.0))
    d_in = train_set[0].features.shape[1]
    model = build_model(cfg, d_in, num_classes)
    rng = np.random.Generator(np.random.Philox(key=derive_key(cfg.train.seed, 0xE7C4)))
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    log_fh = open(log_path or out / "train_log.jsonl", "w") if (out or log_path) else None
    result = TrainResult(model)
    best = -1.0
    meta = {"num_classes": num_classes, "d_in": d_in}

    def emit(rec):
        result.records.append(rec)
        if log_fh:
            log_fh.write(json.dumps(rec, sort_keys=True) + "\n")
            log_fh.flush()

    try:
        for epoch in range(1, cfg.train.epochs + 1):
            t0 = time.time()
            sums = {}
            for i in rng.permutation(len(train_set)):
                terms = train_step(model, train_set[i], cfg, rng)
                for k, v in terms.items():
                    sums[k] = sums.get(k, 0.0) + v
            means = {k: v / len(train_set) for k, v in sums.items()}
            result.losses.append(means["total"])
            emit({"kind": "epoch", "epoch": epoch, "seconds": round(time.time() - t0, 3), **{f"loss/{k}": v for k, v in means.items()}})
            log.info("epoch %d loss %.4f", epoch, means["total"])
            if epoch % cfg.train.eval_every == 0 or epoch == cfg.train.epochs:
                result.train_reports = evaluate_model(model, train_set)
                rec = {"kind": "eval", "epoch": epoch, **report_record(result.train_reports, "train/")}
                score = result.train_reports[-1].edit
                if test_set:
                    result.test_reports = evaluate_model(model, test_set)
                    rec.update(report_record(result.test_reports, "test/"))
                    score = result.test_reports[-1].edit
                emit(rec)
                if out and score > best:
                    best = score
                    io.save_checkpoint(out / "best.ckpt", model, epoch, cfg.to_sections(), meta)
        if out:
            io.save_checkpoint(out / "last.ckpt", model, cfg.train.epochs, cfg.to_sections(), meta)
    finally:
        if log_fh:
            log_fh.close()
    return result


def load_model(path):
    header, arrays = io.read_checkpoint(path)
    cfg = from_sections(header["config"])
    model = build_model(cfg, header["extra"]["d_in"], header["extra"]["num_classes"])
    io.load_into(model, header, arrays)
    return model, cfg, header


ABLATION_PARAMS = ("eta", "lambda_e", "lambda_c", "omega", "num_stages", "num_levels", "graph_variant", "self_supervision")


def ablate(cfg: RunConfig, param, values, train_set, test_set, num_classes, out_dir=None):
    """Train one run per value under the shared seed; returns table rows."""
    from .config import override

    if param not in ABLATION_PARAMS:
        raise ValueError(f"unknown ablation parameter {param!r}; choose from {ABLATION_PARAMS}")
    rows = []
    for value in values:
        run_cfg = override(cfg, **{param: value})
        sub = Path(out_dir) / f"{param}={value}" if out_dir else None
        res = train(run_cfg, train_set, test_set, num_classes, out_dir=sub)
        reports = res.test_reports or res.train_reports
        rows.append({"param": param, "value": value, "final": reports[-1], "stages": reports})
    return rows


def format_table(rows):
    head = f"{'param':<16}{'value':>10}{'F1@10':>8}{'F1@25':>8}{'F1@50':>8}{'Edit':>8}{'Acc':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        m: MetricReport = r["final"]
        lines.append(
            f"{r['param']:<16}{str(r['value']):>10}{m.f1[10]:8.1f}{m.f1[25]:8.1f}{m.f1[50]:8.1f}{m.edit:8.1f}{m.acc:8.1f}"
        )
    return "\n".join(lines)
