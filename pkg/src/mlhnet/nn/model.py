"""Trainable model protocol shared by single-view and multi-view networks."""
from __future__ import annotations

import numpy as np

from .layers import Sequential, softmax_cross_entropy


class Model:
    """Subclasses implement ``forward``, ``backward`` and ``named_layers``.

    ``named_layers`` must list every distinct layer object once, in a fixed
    order; parameter names, optimiser state and checkpoints all key off it.
    """

    def named_layers(self):
        raise NotImplementedError

    def forward(self, x, train=True):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def named_parameters(self):
        """``[(name, param_array, grad_array), ...]`` over distinct layers."""
        out = []
        for lname, layer in self.named_layers():
            for key in layer.params:
                out.append((f"{lname}.{key}", layer.params[key], layer.grads[key]))
        return out

    def named_buffers(self):
        return [(f"{lname}.{key}", buf)
                for lname, layer in self.named_layers()
                for key, buf in layer.buffers.items()]

    def state_arrays(self):
        """Parameters followed by buffers, as ``[(name, array)]``."""
        return [(n, p) for n, p, _ in self.named_parameters()] + self.named_buffers()

    def zero_grad(self):
        for _, layer in self.named_layers():
            layer.zero_grad()

    def loss_grad(self, x, labels, train=True):
        """Zero grads, run forward + backward; returns ``(loss, dloss/dx)``."""
        self.zero_grad()
        logits = self.forward(x, train)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        return loss, self.backward(dlogits)

    def loss(self, x, labels, train=True):
        return softmax_cross_entropy(self.forward(x, train), labels)[0]

    def predict(self, x, batch_size=64):
        out = []
        for i in range(0, len(x), batch_size):
            out.append(self.forward(x[i:i + batch_size], train=False))
        return np.concatenate(out) if out else np.zeros((0,))


def _flat_layers(prefix, seq):
    out = []
    for i, layer in enumerate(seq.layers):
        if isinstance(layer, Sequential):
            out += _flat_layers(f"{prefix}{i}.", layer)
        elif layer.params or layer.buffers:
            out.append((f"{prefix}{i}", layer))
    return out


class Classifier(Model):
    """A single feed-forward stack ending in class logits."""

    def __init__(self, net: Sequential):
        self.net = net
        self._caches = None

    def named_layers(self):
        return _flat_layers("net.", self.net)

    def forward(self, x, train=True):
        y, self._caches = self.net.forward(x, train)
        return y

    def backward(self, grad):
        return self.net.backward(grad, self._caches)
