"""
Reverse-mode gradients and the reversal layer
=============================================

A tiny network, one scalar loss, and two ways of looking at its gradient:
the engine's backward pass and central finite differences.  Then the same
loss is routed through a gradient reversal layer, which leaves the forward
value alone and flips (and scales) everything flowing back.
"""

import numpy as np

from tsc_uda import autodiff as ad
from tsc_uda.networks import Mlp, MlpSpec

rng = np.random.default_rng(0)
net = Mlp(MlpSpec(2, (8,), 3, activation="tanh"), rng)
x0 = rng.normal(size=(5, 2))
w = rng.normal(size=(5, 3))


def loss_of(x):
    return ad.sum(ad.mul(net(x), ad.Tensor(w)))


# backward pass with respect to the input
x = ad.Tensor(x0.copy(), requires_grad=True)
ad.backward(loss_of(x))
analytic = x.grad

# central differences, one coordinate at a time
numeric = np.zeros_like(x0)
h = 1e-4
for idx in np.ndindex(*x0.shape):
    up, down = x0.copy(), x0.copy()
    up[idx] += h
    down[idx] -= h
    numeric[idx] = (loss_of(ad.Tensor(up)).item() - loss_of(ad.Tensor(down)).item()) / (2 * h)
print("max |backward - finite differences| =", np.abs(analytic - numeric).max())

# the same loss behind grl(x, 0.5): identical value, gradient times -0.5
x = ad.Tensor(x0.copy(), requires_grad=True)
value = loss_of(ad.grl(x, 0.5))
ad.backward(value)
print("forward value unchanged:", value.item() == loss_of(ad.Tensor(x0)).item())
print("reversed gradient is exactly -0.5 x the plain one:", np.array_equal(x.grad, -0.5 * analytic))
