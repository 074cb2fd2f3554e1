"""
Reverse-mode gradients on numpy arrays
======================================

Every model quantity is a ``Tensor``: a numpy array plus a record of the
operation that produced it. ``backward`` walks that record in reverse and
leaves gradients on the leaves.
"""

import numpy as np

from dtgrm import autodiff as ad
from dtgrm.gradcheck import check_gradients

# a tiny sequence of 5 frames with 1 channel, and a filter that looks two
# frames into the past (dilation 2, first tap only)
x = ad.Tensor(np.arange(1.0, 6.0).reshape(5, 1), requires_grad=True)
w = ad.Tensor(np.array([1.0, 0.0, 0.0]).reshape(3, 1, 1), requires_grad=True)
y = ad.conv1d(x, w, dilation=2)
print("shifted sequence:", y.data.ravel())

# gradients of a scalar: each output frame t reads input frame t - 2
loss = ad.sum_(ad.square(y))
ad.backward(loss)
print("d loss / d x:", x.grad.ravel())
print("d loss / d w:", w.grad.ravel())

# masked softmax keeps invalid entries at exactly zero
p = ad.softmax(ad.Tensor(np.zeros(3)), mask=np.array([True, True, False]))
print("masked softmax:", p.data)

# finite differences agree with the analytic gradient
rng = np.random.default_rng(0)
a = ad.Tensor(rng.normal(size=(4, 3)), requires_grad=True)
b = ad.Tensor(rng.normal(size=(3, 2)), requires_grad=True)
err = check_gradients([a, b], lambda: ad.sum_(ad.softmax(ad.matmul(a, b))[:, 0]))
print(f"worst relative error vs central differences: {err:.2e}")
