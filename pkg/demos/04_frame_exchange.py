"""
Frame exchange as an auxiliary task
===================================

A fraction ``eta`` of frames is paired up and their feature rows swapped.
The swapped frames look like over-segmentation noise, and each refinement
stage gets a small head that must spot them.
"""

import numpy as np

from dtgrm.selfsup import exchange_count, exchange_frames

rng = np.random.Generator(np.random.Philox(key=4))
x = np.arange(20, dtype=np.float32)[:, None].repeat(2, axis=1)

x_ex, spec = exchange_frames(x, eta=20, rng=rng)
print("exchanged frames:", exchange_count(len(x), 20), "pairs:", spec.pairs)
print("labels:", spec.labels)
print("row values after exchange:", x_ex[:, 0].astype(int))

# swapping the same pairs again restores the input
assert np.array_equal(spec.apply(x_ex), x)

# with T = 17 only floor(3.4) = 3 frames qualify, rounded down to an even 2
print("T=17:", exchange_count(17, 20))
