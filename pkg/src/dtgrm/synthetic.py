"""Deterministic synthetic labelled sequences standing in for video features.

Randomness comes from numpy's Philox4x64-10 bit generator keyed directly by
an integer (``Philox(key=k)``, counter starting at zero). Uniform doubles are
``(raw >> 11) * 2**-53`` of the raw 64-bit words; Gaussians use the
Box-Muller transform on consecutive uniform pairs. Sub-stream keys are
derived with SplitMix64, so the byte stream is reproducible from the seed
alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_key(seed, *path):
    k = splitmix64(seed & MASK64)
    for p in path:
        k = splitmix64(k ^ (p & MASK64))
    return k


class Stream:
    """Counter-based random stream with explicitly specified conversions."""

    def __init__(self, key):
        self.bitgen = np.random.Philox(key=int(key) & MASK64)

    def uniform(self, n=None):
        raw = self.bitgen.random_raw(1 if n is None else n)
        u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return float(u[0]) if n is None else u

    def integer(self, lo, hi):
        """Uniform integer in the closed range ``[lo, hi]``."""
        return lo + min(int(self.uniform() * (hi - lo + 1)), hi - lo)

    def categorical(self, probs):
        cdf = np.cumsum(probs)
        return int(min(np.searchsorted(cdf, self.uniform() * cdf[-1], side="right"), len(probs) - 1))

    def normal(self, shape):
        n = int(np.prod(shape))
        m = (n + 1) // 2
        u = self.uniform(2 * m).reshape(m, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1).reshape(-1)
        return z[:n].reshape(shape)


def forward_transition(C, forward=0.7):
    """Circulant chain favouring ``c -> c+1``; self-transitions forbidden."""
    P = np.zeros((C, C))
    if C < 2:
        raise ValueError("need at least two classes")
    if C == 2:
        return np.array([[0.0, 1.0], [1.0, 0.0]])
    rest = (1.0 - forward) / (C - 2)
    for c in range(C):
        P[c] = rest
        P[c, c] = 0.0
        P[c, (c + 1) % C] = forward
    return P


def stationary_distribution(P):
    w, v = np.linalg.eig(np.asarray(P).T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    return pi / pi.sum()


@dataclass
class GeneratorConfig:
    num_classes: int = 6
    d_in: int = 32
    min_segments: int = 4
    max_segments: int = 10
    min_length: int = 10
    max_length: int = 60
    noise_std: float = 0.6
    drift_scale: float = 0.5
    transition: np.ndarray | None = field(default=None, repr=False)
    seed: int = 0

    def __post_init__(self):
        if self.transition is None:
            self.transition = forward_transition(self.num_classes)
        self.transition = np.asarray(self.transition, dtype=np.float64)
        self.validate()

    def validate(self):
        P, C = self.transition, self.num_classes
        if P.shape != (C, C):
            raise ValueError(f"transition must be {C}x{C}")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0):
            raise ValueError("transition rows must be probability vectors")
        if np.any(np.diag(P) != 0):
            raise ValueError("transition must forbid self-transitions")
        if not 1 <= self.min_segments <= self.max_segments:
            raise ValueError("segment count bounds must be positive and ordered")
        if not 1 <= self.min_length <= self.max_length:
            raise ValueError("segment length bounds must be positive and ordered")
        if self.d_in < 1 or self.noise_std < 0 or self.drift_scale < 0:
            raise ValueError("invalid feature parameters")


@dataclass
class LabeledSequence:
    features: np.ndarray  # (T, d_in) float32
    labels: np.ndarray  # (T,) int64
    id: str

    def __len__(self):
        return len(self.labels)


def class_prototypes(config: GeneratorConfig):
    """Unit-norm per-class feature prototypes, fixed by the seed."""
    z = Stream(derive_key(config.seed, 0xC1A55)).normal((config.num_classes, config.d_in))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def generate_sequence(config: GeneratorConfig, rng: Stream, prototypes=None, seq_id="seq"):
    if prototypes is None:
        prototypes = class_prototypes(config)
    n_seg = rng.integer(config.min_segments, config.max_segments)
    labels = [rng.categorical(stationary_distribution(config.transition))]
    for _ in range(n_seg - 1):
        labels.append(rng.categorical(config.transition[labels[-1]]))
    lengths = [rng.integer(config.min_length, config.max_length) for _ in labels]
    frame_labels = np.repeat(np.array(labels, dtype=np.int64), lengths)
    T = frame_labels.size

    noise = config.noise_std * rng.normal((T, config.d_in))
    directions = rng.normal((2, config.d_in))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    freq = 0.5 + rng.uniform(2)
    phase = 2.0 * np.pi * rng.uniform(2)
    t = np.arange(T) / T
    waves = np.sin(2.0 * np.pi * freq[None, :] * t[:, None] + phase[None, :])
    drift = config.drift_scale * waves @ directions

    features = prototypes[frame_labels] + noise + drift
    return LabeledSequence(features.astype(np.float32), frame_labels, seq_id)


def generate_split(config: GeneratorConfig, n_train, n_test):
    if n_train < 1 or n_test < 1:
        raise ValueError("split sizes must be positive")
    protos = class_prototypes(config)

    def make(split, name, n):
        return [
            generate_sequence(config, Stream(derive_key(config.seed, split, i)), protos, f"{name}_{i:04d}")
            for i in range(n)
        ]

    return make(1, "train", n_train), make(2, "test", n_test)
