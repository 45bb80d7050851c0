"""
Reverse-mode autodiff on numpy arrays
=====================================

A small tour of ``wvae.tensor``: build a graph, call ``backward`` and
check the gradients against central differences.
"""

# %%
import numpy as np

from wvae import tensor as T
from wvae.tensor import Tensor, backward, grad_check

rng = np.random.default_rng(0)

# %%
# Every Tensor holds float64 data. Parameters ask for gradients.
w = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
b = Tensor(np.zeros(3), requires_grad=True)
x = rng.standard_normal((5, 2))

# a one-layer net with a scalar loss
h = T.tanh(T.linear(x, w, b))
loss = T.mean(T.square(h))
backward(loss)
print("loss", loss.item())
print("dL/dw\n", w.grad)

# %%
# Gradients accumulate until reset, so two backward calls double them.
first = w.grad.copy()
backward(loss)
print("after a second backward, twice as large:", np.allclose(w.grad, 2 * first))
w.zero_grad()
b.zero_grad()

# %%
# ``grad_check`` rebuilds the loss with each parameter entry nudged by
# +/- eps and reports the worst relative mismatch.
f = lambda: T.mean(T.square(T.tanh(T.linear(x, w, b))))
print("max relative error", grad_check(f, [w, b]))

# %%
# Shapes must match exactly, except for scalar operands.
try:
    T.add(np.zeros(2), np.zeros(3))
except T.ShapeError as e:
    print("ShapeError:", e)
