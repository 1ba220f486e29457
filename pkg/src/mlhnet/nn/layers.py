"""Layers with explicit forward/backward passes.

``forward`` returns ``(output, cache)`` and ``backward(grad, cache)`` returns
the input gradient while *accumulating* parameter gradients.  Keeping the
cache outside the layer lets one layer object be applied several times per
step (weight-shared branches).
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch


class Layer:
    tag = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}
        self.buffers = {}

    def _add_param(self, name, value):
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0)

    def forward(self, x, train=True):
        raise NotImplementedError

    def backward(self, grad, cache):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


def _he(rng, shape, fan_in, dtype):
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2D(Layer):
    """2-D cross-correlation (no kernel flip) on ``[B, C, H, W]`` inputs."""

    tag = "conv2d"

    def __init__(self, in_ch, out_ch, kernel=3, stride=1, pad=0, rng=None,
                 dtype=np.float64, bias=True):
        super().__init__()
        kh, kw = (kernel, kernel) if np.isscalar(kernel) else kernel
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel = (int(kh), int(kw))
        self.stride, self.pad = int(stride), int(pad)
        rng = rng if rng is not None else np.random.default_rng(0)
        self._add_param("weight", _he(rng, (out_ch, in_ch, kh, kw), in_ch * kh * kw, dtype))
        # a conv feeding BatchNorm gets no bias: BN cancels it exactly
        if bias:
            self._add_param("bias", np.zeros(out_ch, dtype=dtype))

    def output_hw(self, h, w):
        kh, kw = self.kernel
        s, p = self.stride, self.pad
        if h + 2 * p < kh or w + 2 * p < kw:
            raise ShapeMismatch(f"input {h}x{w} smaller than kernel {kh}x{kw}")
        return (h + 2 * p - kh) // s + 1, (w + 2 * p - kw) // s + 1

    def forward(self, x, train=True):
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise ShapeMismatch(f"conv expects [B, {self.in_ch}, H, W], got {x.shape}")
        B, C, H, W = x.shape
        kh, kw = self.kernel
        s, p = self.stride, self.pad
        Ho, Wo = self.output_hw(H, W)
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::s, ::s][:, :, :Ho, :Wo]
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, C * kh * kw)
        wm = self.params["weight"].reshape(self.out_ch, -1)
        y = cols @ wm.T
        if "bias" in self.params:
            y += self.params["bias"]
        y = y.reshape(B, Ho, Wo, self.out_ch).transpose(0, 3, 1, 2)
        return np.ascontiguousarray(y), (x.shape, cols)

    def backward(self, grad, cache):
        (B, C, H, W), cols = cache
        kh, kw = self.kernel
        s, p = self.stride, self.pad
        Ho, Wo = grad.shape[2], grad.shape[3]
        gm = grad.transpose(0, 2, 3, 1).reshape(-1, self.out_ch)
        w = self.params["weight"]
        self.grads["weight"] += (gm.T @ cols).reshape(w.shape)
        if "bias" in self.grads:
            self.grads["bias"] += gm.sum(axis=0)
        dcols = (gm @ w.reshape(self.out_ch, -1)).reshape(B, Ho, Wo, C, kh, kw)
        dxp = np.zeros((B, C, H + 2 * p, W + 2 * p), dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i:i + s * (Ho - 1) + 1:s, j:j + s * (Wo - 1) + 1:s] += (
                    dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        return dxp[:, :, p:p + H, p:p + W] if p else dxp

    def __repr__(self):
        return (f"Conv2D({self.in_ch}, {self.out_ch}, kernel={self.kernel}, "
                f"stride={self.stride}, pad={self.pad})")


class ReLU(Layer):
    tag = "relu"

    def forward(self, x, train=True):
        mask = x > 0
        return x * mask, mask

    def backward(self, grad, mask):
        return grad * mask


class MaxPool2x2(Layer):
    """2x2 max pooling, stride 2. Ties send the gradient to the first maximum
    in row-major window order."""

    tag = "maxpool2x2"

    def forward(self, x, train=True):
        B, C, H, W = x.shape
        if H % 2 or W % 2:
            raise ShapeMismatch(f"maxpool2x2 needs even spatial dims, got {H}x{W}")
        quads = (x[:, :, 0::2, 0::2], x[:, :, 0::2, 1::2], x[:, :, 1::2, 0::2], x[:, :, 1::2, 1::2])
        y = np.maximum(np.maximum(quads[0], quads[1]), np.maximum(quads[2], quads[3]))
        return y, (x, y)

    def backward(self, grad, cache):
        x, y = cache
        dx = np.zeros_like(x, dtype=grad.dtype)
        taken = np.zeros(y.shape, dtype=bool)
        for di, dj in ((0, 0), (0, 1), (1, 0), (1, 1)):
            hit = (x[:, :, di::2, dj::2] == y) & ~taken
            dx[:, :, di::2, dj::2] = grad * hit
            taken |= hit
        return dx


class BatchNorm2D(Layer):
    """Per-channel batch normalisation.

    Training mode normalises with batch statistics and folds them into the
    running estimates; eval mode is the fixed affine map given by the running
    estimates.
    """

    tag = "batchnorm2d"

    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=np.float64):
        super().__init__()
        self.channels, self.eps, self.momentum = channels, eps, momentum
        self._add_param("gamma", np.ones(channels, dtype=dtype))
        self._add_param("beta", np.zeros(channels, dtype=dtype))
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    def forward(self, x, train=True):
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeMismatch(f"batchnorm expects [B, {self.channels}, H, W], got {x.shape}")
        gamma = self.params["gamma"][None, :, None, None]
        beta = self.params["beta"][None, :, None, None]
        if not train:
            inv = 1.0 / np.sqrt(self.buffers["running_var"] + self.eps)
            xhat = (x - self.buffers["running_mean"][None, :, None, None]) * inv[None, :, None, None]
            return gamma * xhat + beta, ("eval", inv, xhat)
        n = x.shape[0] * x.shape[2] * x.shape[3]
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv[None, :, None, None]
        m = self.momentum
        rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
        rm *= 1 - m
        rm += m * mean
        rv *= 1 - m
        rv += m * var * (n / max(n - 1, 1))
        return gamma * xhat + beta, ("train", inv, xhat)

    def backward(self, grad, cache):
        mode, inv, xhat = cache
        self.grads["gamma"] += (grad * xhat).sum(axis=(0, 2, 3))
        self.grads["beta"] += grad.sum(axis=(0, 2, 3))
        gamma = self.params["gamma"]
        if mode == "eval":
            return grad * (gamma * inv)[None, :, None, None]
        n = grad.shape[0] * grad.shape[2] * grad.shape[3]
        dxhat = grad * gamma[None, :, None, None]
        s1 = dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
        s2 = (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
        return (inv[None, :, None, None] / n) * (n * dxhat - s1 - xhat * s2)

    def __repr__(self):
        return f"BatchNorm2D({self.channels}, eps={self.eps}, momentum={self.momentum})"


class Flatten(Layer):
    tag = "flatten"

    def forward(self, x, train=True):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad, shape):
        return grad.reshape(shape)


class Linear(Layer):
    tag = "linear"

    def __init__(self, in_features, out_features, rng=None, dtype=np.float64):
        super().__init__()
        self.in_features, self.out_features = in_features, out_features
        rng = rng if rng is not None else np.random.default_rng(0)
        self._add_param("weight", _he(rng, (out_features, in_features), in_features, dtype))
        self._add_param("bias", np.zeros(out_features, dtype=dtype))

    def forward(self, x, train=True):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(f"linear expects [B, {self.in_features}], got {x.shape}")
        return x @ self.params["weight"].T + self.params["bias"], x

    def backward(self, grad, x):
        self.grads["weight"] += grad.T @ x
        self.grads["bias"] += grad.sum(axis=0)
        return grad @ self.params["weight"]

    def __repr__(self):
        return f"Linear({self.in_features}, {self.out_features})"


class Sequential(Layer):
    tag = "sequential"

    def __init__(self, *layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x, train=True):
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x, train)
            caches.append(c)
        return x, caches

    def backward(self, grad, caches):
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            grad = layer.backward(grad, c)
        return grad

    def modules(self):
        return list(self.layers)

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def __repr__(self):
        inner = ", ".join(repr(layer) for layer in self.layers)
        return f"Sequential({inner})"


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. ``logits``.

    The loss is returned as a numpy scalar of the logits' dtype.
    """
    from ..errors import LabelOutOfRange

    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    B, C = logits.shape
    if labels.shape != (B,):
        raise ShapeMismatch(f"labels shape {labels.shape} != ({B},)")
    if B and (labels.min() < 0 or labels.max() >= C):
        raise LabelOutOfRange(f"labels must lie in [0, {C})")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    logp = z - logsum[:, None]
    loss = -logp[np.arange(B), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(B), labels] -= 1.0
    # numpy scalar, not float: extended-precision gradchecks need every digit
    return loss, grad / B
