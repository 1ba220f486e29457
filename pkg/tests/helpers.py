"""Shared test utilities: descriptor invariant audit, kink detection for
finite-difference checks, and a small probe model around the merges."""
import threading
from contextlib import contextmanager

import numpy as np

from mlhnet.mlh import INF
from mlhnet.mv_merge import MaxMerge
from mlhnet.nn.layers import Flatten, Linear, MaxPool2x2, ReLU, Sequential
from mlhnet.nn.model import Model, _flat_layers


def descriptor_violations(desc):
    """Count invariant breaks: mixed sentinel bins, decreasing layers, range."""
    g = desc.grid
    empty = g == np.float32(INF)
    mixed = int((empty.any(axis=2) != empty.all(axis=2)).sum())
    occ = ~empty.any(axis=2)
    vals = g[occ]
    decreasing = int((np.diff(vals, axis=1) < 0).any(axis=1).sum()) if vals.size else 0
    out_of_range = int(((vals < 0) | (vals > 1)).sum())
    return mixed + decreasing + out_of_range


class DescriptorAudit:
    """Running tally of invariant checks over every computed descriptor."""

    def __init__(self):
        self.count = 0
        self.violations = 0
        self.examples = []
        self._lock = threading.Lock()

    def note(self, desc):
        bad = descriptor_violations(desc)
        with self._lock:
            self._tally(desc, bad)
        return desc

    def _tally(self, desc, bad):
        self.count += 1
        if bad:
            self.violations += bad
            if len(self.examples) < 5:
                self.examples.append((desc.N, desc.k, desc.view.tag, bad))


AUDIT = DescriptorAudit()


def install_audit(modules):
    """Route ``MLHDescriptor`` construction inside ``modules`` through
    :data:`AUDIT`.  Returns a callable that undoes the patch."""
    saved = []
    for mod in modules:
        cls = mod.MLHDescriptor

        def make(*args, _cls=cls, **kw):
            return AUDIT.note(_cls(*args, **kw))

        saved.append((mod, cls))
        mod.MLHDescriptor = make

    def undo():
        for mod, cls in saved:
            mod.MLHDescriptor = cls
    return undo


class MergeProbe(Model):
    """Three input volumes -> merge -> Flatten -> Linear -> loss."""

    def __init__(self, merge, D, hw, rng):
        self.merge = merge
        self.head = Sequential(Flatten(), Linear(D * hw * hw, 3, rng=rng))

    def named_layers(self):
        return self.merge.named_layers() + _flat_layers("head.", self.head)

    def forward(self, x, train=True):
        y, mc = self.merge.forward([x[:, i] for i in range(3)], train)
        out, hc = self.head.forward(y, train)
        self._cache = (mc, hc)
        return out

    def backward(self, grad):
        mc, hc = self._cache
        g = self.merge.backward(self.head.backward(grad, hc), mc)
        return np.stack(g, axis=1)


def _note_gap(box, s):
    gap = (s[-1] - s[-2])[s[-1] != 0]
    if gap.size:
        box["margin"] = min(box["margin"], float(gap.min()))


@contextmanager
def record_kink_margin():
    """Track the smallest distance to a non-differentiable point seen during
    forward passes: |pre-activation| for ReLU, top-two gap for 2x2 max pooling
    and for the three-way max merge.

    Max ties at exactly zero are ignored: after a rectifier they come from
    clipped units whose gradient is zero whichever branch wins, and the ReLU
    margin already guards the clipping."""
    box = {"margin": np.inf}
    relu_fwd, pool_fwd, merge_fwd = ReLU.forward, MaxPool2x2.forward, MaxMerge.forward

    def relu(self, x, train=True):
        if x.size:
            box["margin"] = min(box["margin"], float(np.abs(x).min()))
        return relu_fwd(self, x, train)

    def pool(self, x, train=True):
        q = np.stack([x[:, :, 0::2, 0::2], x[:, :, 0::2, 1::2],
                      x[:, :, 1::2, 0::2], x[:, :, 1::2, 1::2]])
        _note_gap(box, np.sort(q, axis=0))
        return pool_fwd(self, x, train)

    def merge(self, volumes, train=True):
        _note_gap(box, np.sort(np.stack(volumes), axis=0))
        return merge_fwd(self, volumes, train)

    ReLU.forward, MaxPool2x2.forward, MaxMerge.forward = relu, pool, merge
    try:
        yield box
    finally:
        ReLU.forward, MaxPool2x2.forward, MaxMerge.forward = relu_fwd, pool_fwd, merge_fwd


def kink_margin(model, x, train=True):
    with record_kink_margin() as box:
        model.forward(x, train)
    return box["margin"]


def smooth_point(make, margin=1e-3, tries=200):
    """Call ``make(attempt) -> (model, x, labels)`` until the forward pass stays
    at least ``margin`` away from every kink."""
    for attempt in range(tries):
        model, x, labels = make(attempt)
        if kink_margin(model, x) >= margin:
            return model, x, labels
    raise RuntimeError("no kink-free evaluation point found")
