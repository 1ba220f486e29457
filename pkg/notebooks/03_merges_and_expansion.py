"""
Merging three views
===================

Each view passes through its own convolutional branch.  The resulting
activation volumes can be merged by an element-wise maximum, which forgets
which view was which, or by stacking them along depth and convolving back to
the original depth, which keeps that information.
"""

# %%
import itertools

import numpy as np

from mlhnet.mv_merge import expand_input_weights, merge_concat_conv, merge_max

rng = np.random.default_rng(0)
D, W = 4, 6
b = [rng.normal(size=(D, W, W)) for _ in range(3)]

# %%
# The maximum is symmetric in its arguments.
ref = merge_max(*b)
print(all(np.array_equal(merge_max(*[b[i] for i in p]), ref)
          for p in itertools.permutations(range(3))))

# %%
# Concatenation followed by a 3x3 convolution is not: swapping two views
# changes the output unless the filter groups happen to coincide.
w = rng.normal(size=(D, 3 * D, 3, 3))
a = merge_concat_conv(b[0], b[1], b[2], w)
s = merge_concat_conv(b[1], b[0], b[2], w)
print("output shape", a.shape, "swap changes it by", float(np.abs(a - s).max()))

g = rng.normal(size=(D, D, 3, 3))
sym = np.concatenate([g, g, g], axis=1)
print("equal groups:", float(np.abs(merge_concat_conv(*b, sym)
                                    - merge_concat_conv(b[2], b[0], b[1], sym)).max()))

# %%
# First-layer weights of a 3-channel image network can seed a 5-layer
# descriptor network: the image channels go to layers 1, 3 and 5 and the two
# in-between layers get their average.
w3 = np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1, 1)
print(expand_input_weights(w3).ravel())

w3 = rng.normal(size=(2, 3, 3, 3))
img = rng.normal(size=(3, 3))
r3 = np.einsum("dcij,ij->d", w3, img) / 3
r5 = np.einsum("dcij,ij->d", expand_input_weights(w3), img) / 5
print("mean response per channel, before and after:", r3, r5)
