"""Frame-exchange perturbation and the exchanged-frame detection head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad


@dataclass
class ExchangeSpec:
    pairs: list
    labels: np.ndarray
    eta: float

    @property
    def num_exchanged(self):
        return int(self.labels.sum())

    def apply(self, x):
        """Swap the paired rows of ``x`` (a copy). Applying twice is the identity."""
        out = np.array(x, copy=True)
        for i, j in self.pairs:
            out[[i, j]] = out[[j, i]]
        return out


def exchange_count(T, eta):
    """Largest even number not above ``floor(eta * T / 100)``."""
    n = int(np.floor(eta * T / 100.0 + 1e-9))
    return n - (n % 2)


def exchange_frames(x, eta, rng: np.random.Generator):
    """Swap the rows of randomly paired frames.

    ``n`` frames are drawn uniformly without replacement and matched by a
    uniformly random perfect matching. ``x`` is left untouched.
    """
    if not 0 <= eta <= 100:
        raise ValueError("eta must be a percentage in [0, 100]")
    x = np.asarray(x)
    T = x.shape[0]
    n = exchange_count(T, eta)
    labels = np.zeros(T, dtype=np.int64)
    if n < 2:
        return x.copy(), ExchangeSpec([], labels, eta)
    # a uniformly ordered sample paired consecutively is a uniform matching
    chosen = rng.choice(T, size=n, replace=False)
    pairs = [(int(a), int(b)) for a, b in chosen.reshape(-1, 2)]
    labels[chosen] = 1
    spec = ExchangeSpec(pairs, labels, eta)
    return spec.apply(x), spec


def exchange_head(h, w, b=None):
    """Per-frame ``(T, 2)`` exchange likelihoods; column 1 means exchanged."""
    h = ad.as_tensor(h)
    if h.shape[-1] != w.shape[0]:
        raise ValueError(f"hidden width {h.shape[-1]} does not match head {w.shape}")
    return ad.softmax(ad.linear(h, w, b), axis=-1)
