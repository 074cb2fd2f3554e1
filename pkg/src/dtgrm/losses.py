"""Training objectives and their multi-stage composition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

PROB_FLOOR = 1e-12


@dataclass
class LossWeights:
    omega: float = 0.15
    lambda_e: float = 2.0
    lambda_c: float = 0.5
    tmse_tau: float = 4.0
    tmse_detach: bool = True

    def __post_init__(self):
        if min(self.omega, self.lambda_e, self.lambda_c, self.tmse_tau) < 0:
            raise ValueError("loss weights must be non-negative")


def cls_loss(y, target):
    """Mean negative log-likelihood of the target class per frame."""
    y = ad.as_tensor(y)
    target = np.asarray(target, dtype=np.int64)
    T, C = y.shape
    if target.shape != (T,):
        raise ValueError(f"expected {T} targets, got shape {target.shape}")
    if target.min() < 0 or target.max() >= C:
        raise ValueError(f"target outside [0, {C - 1}]")
    picked = y[np.arange(T), target]
    return ad.neg(ad.mean(ad.log(ad.clamp(picked, PROB_FLOOR, 1.0))))


def tmse_loss(y, tau=4.0, detach_prev=True):
    """Truncated squared log-ratio between neighbouring frames.

    By default the earlier frame of each pair is a constant (no gradient
    flows into it). Normalised by ``T * C``.
    """
    y = ad.as_tensor(y)
    T, C = y.shape
    if T < 2:
        return ad.Tensor(np.zeros((), dtype=y.dtype))
    if detach_prev:
        prev = np.log(np.clip(y.data[:-1], PROB_FLOOR, 1.0))
    else:
        prev = ad.log(ad.clamp(y[:-1], PROB_FLOOR, 1.0))
    cur = ad.log(ad.clamp(y[1:], PROB_FLOOR, 1.0))
    delta = ad.clamp(ad.sub(cur, prev), -tau, tau)
    return ad.mul(ad.sum_(ad.square(delta)), 1.0 / (T * C))


def total_loss(ordered_outputs, exchanged_outputs, exchange_outputs, targets, spec, weights: LossWeights):
    """Sum the segmentation and self-supervision terms over all stages.

    ``ordered_outputs`` holds the backbone prediction followed by the S stage
    predictions. ``exchanged_outputs`` (same length) and ``exchange_outputs``
    (one per refinement stage) may be ``None`` to train without the
    exchanged pass. Returns ``(loss, terms)`` where ``terms`` maps each
    weighted component to its float value.
    """
    w = weights
    n = len(ordered_outputs)
    if n < 1:
        raise ValueError("need at least the backbone output")
    terms = {}
    parts = []

    def put(name, value):
        parts.append(value)
        terms[name] = terms.get(name, 0.0) + float(value.data)

    for y in ordered_outputs:
        put("cls", cls_loss(y, targets))
        put("tmse", ad.mul(tmse_loss(y, w.tmse_tau, w.tmse_detach), w.omega))
    if exchanged_outputs is not None:
        if len(exchanged_outputs) != n:
            raise ValueError(f"stage count mismatch: {n} ordered vs {len(exchanged_outputs)} exchanged")
        if exchange_outputs is None or len(exchange_outputs) != n - 1:
            raise ValueError(f"expected {n - 1} exchange-head outputs")
        for y in exchanged_outputs:
            put("corr", ad.mul(cls_loss(y, targets), w.lambda_c))
            put("corr_tmse", ad.mul(tmse_loss(y, w.tmse_tau, w.tmse_detach), w.omega))
        for e in exchange_outputs:
            put("exchange", ad.mul(cls_loss(e, spec.labels), w.lambda_e))
    loss = parts[0]
    for part in parts[1:]:
        loss = loss + part
    terms["total"] = float(loss.data)
    return loss, terms
