"""
Reverse-mode gradients and finite-difference checking
======================================================

Build a tiny expression, differentiate it, and compare against central differences.
"""

import numpy as np

from pggnn import autodiff as ad
from pggnn.autodiff import finite_diff_check, parameter

rng = np.random.default_rng(0)

# a 3×3 dilated convolution followed by instance norm and ELU
x = parameter(rng.normal(size=(2, 6, 6)))
k = parameter(rng.normal(size=(3, 2, 3, 3)))
gamma, beta = parameter(np.ones(3)), parameter(np.zeros(3))

y = ad.elu(ad.instance_norm(ad.conv2d(x, k, dilation=2), gamma, beta))
loss = (y ** 2).mean()
loss.backward()
print("loss", loss.item())
print("d loss / d kernel, first filter:\n", k.grad[0, 0])

# the same gradients, checked numerically
report = finite_diff_check(lambda x, k, g, b: (ad.elu(ad.instance_norm(ad.conv2d(x, k, 2), g, b)) ** 2).mean(),
                           [x, k, gamma, beta])
print(report)

# the full suite used by `pggnn gradcheck`
from pggnn.gradcheck import joint_model_check, op_checks

for name, rep in op_checks(seed=0):
    print(f"{name:<26s} {rep}")
print("joint model", joint_model_check())
