"""
Three-node temporal graphs at doubling dilations
================================================

Each frame ``t`` looks at ``t - 2**k`` and ``t + 2**k`` at level ``k``. The
similarity graph weighs them by cosine similarity; the learned graph gets
its edge logits from a dilated convolution. Neighbours that fall outside the
sequence are masked out.
"""

import numpy as np

from dtgrm.graph import frame_graph

rng = np.random.default_rng(1)
T, d = 12, 4
h = rng.normal(size=(T, d))
# make frames 4 and 6 resemble frame 5
h[4] = h[5] + 0.1 * rng.normal(size=d)
h[6] = -h[5]

np.set_printoptions(precision=3, suppress=True)
l_weight = 0.3 * rng.normal(size=(3, d, 9))

for level in range(3):
    g = frame_graph(h, 5, level, l_weight)
    print(f"level {level}: nodes {g.node_indices}, valid {g.valid_mask.tolist()}")
    print("  similarity logits\n", g.s_logits)
    print("  normalised similarity adjacency\n", g.adj_s)

# near the start of the sequence the left neighbour does not exist
g = frame_graph(h, 1, 2, l_weight)
print("frame 1, level 2:", g.node_indices, g.valid_mask.tolist())
print(g.adj_l)
