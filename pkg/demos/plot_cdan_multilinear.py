"""
Conditioning the discriminator on predictions
=============================================

The conditional variant feeds the discriminator the outer product of the
feature vector and the softmax prediction, flattened.  With 32 features and 2
classes that is a 64-wide input.  Gradients reach both factors, so the
classifier is also pushed by the adversarial loss.
"""

import numpy as np

from tsc_uda import autodiff as ad
from tsc_uda.networks import Architecture, build_teacher, multilinear, teacher_forward

rng = np.random.default_rng(1)
f = ad.Tensor(rng.normal(size=(3, 4)), requires_grad=True)
g = ad.Tensor(rng.normal(size=(3, 2)), requires_grad=True)
h = multilinear(f, g)
print("input widths 4 and 2 give", h.shape[1], "columns")
print("row 0 equals the flattened outer product:", np.allclose(h.data[0], np.outer(f.data[0], g.data[0]).ravel()))

ad.backward(ad.sum(h))
print("both factors received gradients:", f.grad is not None and g.grad is not None)

teacher = build_teacher(2, 2, "CDAN", Architecture(), rng)
print("discriminator input width:", teacher.D1.spec.input_dim)
out = teacher_forward(teacher, ad.Tensor(rng.normal(size=(5, 2))), ad.Tensor(rng.normal(size=(5, 2))))
print("source domain probabilities:", np.round(out.source_domain.data, 3))
