"""Three-view networks: branch sharing, view merging and first-layer expansion.

Branches map each view's ``k x N x N`` descriptor to a ``D x W x H``
activation volume.  The volumes are merged either by an element-wise maximum
(order does not matter) or by depth-concatenation in X, Y, Z order followed by
a 3x3 convolution back to ``D`` channels (order matters).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigInvalid, ShapeMismatch, UnsupportedK
from .mlh import MultiViewBundle
from .nn.layers import BatchNorm2D, Conv2D, Flatten, Linear, MaxPool2x2, ReLU, Sequential
from .nn.model import Model, _flat_layers
from .sampling import make_rng

MERGE_KINDS = ("max", "concat")
VARIANTS = {
    "shared-max": (True, "max"),
    "ind-max": (False, "max"),
    "ind-cat": (False, "concat"),
}


def _batched(volumes):
    vols = [np.asarray(v) for v in volumes]
    if len(vols) != 3:
        raise ShapeMismatch(f"expected 3 branch volumes, got {len(vols)}")
    if len({v.shape for v in vols}) != 1:
        raise ShapeMismatch(f"branch volumes differ in shape: {[v.shape for v in vols]}")
    squeeze = vols[0].ndim == 3
    if squeeze:
        vols = [v[None] for v in vols]
    if vols[0].ndim != 4:
        raise ShapeMismatch("branch volumes must be [D, W, H] or [B, D, W, H]")
    return vols, squeeze


class MaxMerge:
    """Element-wise maximum; ties send the gradient to the lowest branch."""

    kind = "max"

    def named_layers(self):
        return []

    def forward(self, volumes, train=True):
        stack = np.stack(volumes)
        idx = stack.argmax(axis=0)
        return np.take_along_axis(stack, idx[None], axis=0)[0], idx

    def backward(self, grad, idx):
        return [grad * (idx == i) for i in range(3)]


class ConcatConvMerge:
    """Concatenate along depth (X, Y, Z), then 3x3 conv with ``D`` filters.

    ``relu`` applies a rectifier after the convolution, as in the conv blocks.
    """

    kind = "concat"

    def __init__(self, depth, rng=None, dtype=np.float64, relu=True):
        self.depth = depth
        self.conv = Conv2D(3 * depth, depth, 3, stride=1, pad=1, rng=rng, dtype=dtype)
        self.relu = ReLU() if relu else None

    def named_layers(self):
        return [("merge.conv", self.conv)]

    def forward(self, volumes, train=True):
        cat = np.concatenate(volumes, axis=1)
        y, c_conv = self.conv.forward(cat, train)
        c_relu = None
        if self.relu is not None:
            y, c_relu = self.relu.forward(y, train)
        return y, (c_conv, c_relu)

    def backward(self, grad, cache):
        c_conv, c_relu = cache
        if self.relu is not None:
            grad = self.relu.backward(grad, c_relu)
        dcat = self.conv.backward(grad, c_conv)
        D = self.depth
        return [dcat[:, i * D:(i + 1) * D] for i in range(3)]


def merge_max(b1, b2, b3):
    """Element-wise maximum of three equally shaped activation volumes."""
    vols, squeeze = _batched((b1, b2, b3))
    y, _ = MaxMerge().forward(vols)
    return y[0] if squeeze else y


def merge_concat_conv(b1, b2, b3, weight, bias=None, relu=False):
    """Depth-concatenate ``(b1, b2, b3)`` and convolve back to ``D`` channels.

    ``weight`` is ``[D, 3D, 3, 3]``; padding 1, stride 1, so the output keeps
    the per-branch ``[D, W, H]`` shape.
    """
    vols, squeeze = _batched((b1, b2, b3))
    D = vols[0].shape[1]
    weight = np.asarray(weight)
    if weight.shape != (D, 3 * D, 3, 3):
        raise ShapeMismatch(f"merge conv weight must be {(D, 3 * D, 3, 3)}, got {weight.shape}")
    m = ConcatConvMerge(D, dtype=weight.dtype, relu=relu)
    m.conv.params["weight"][...] = weight
    if bias is not None:
        m.conv.params["bias"][...] = bias
    y, _ = m.forward(vols)
    return y[0] if squeeze else y


def expand_input_weights(w3, k=5):
    """Expand 3-channel first-layer filters to ``k`` input channels.

    For ``k=5`` the image channels go to slots 1, 3 and 5 and slots 2 and 4
    receive their mean.  ``k=3`` returns a copy.
    """
    w3 = np.asarray(w3)
    if w3.ndim != 4 or w3.shape[1] != 3:
        raise ShapeMismatch(f"expected [D, 3, kh, kw] weights, got {w3.shape}")
    if k == 3:
        return w3.copy()
    if k != 5:
        raise UnsupportedK(f"channel expansion is defined for k in (3, 5), got {k}")
    mean = w3.mean(axis=1)
    return np.stack([w3[:, 0], mean, w3[:, 1], mean, w3[:, 2]], axis=1)


@dataclass(frozen=True)
class MultiViewConfig:
    shared: bool = False
    merge: str = "concat"
    classes: int = 4
    N: int = 32
    k: int = 5
    width: int = 32
    hidden: int = 128
    blocks: int = 3

    def __post_init__(self):
        if self.merge not in MERGE_KINDS:
            raise ConfigInvalid(f"merge must be one of {MERGE_KINDS}")
        if min(self.classes, self.N, self.k, self.width, self.hidden, self.blocks) < 1:
            raise ConfigInvalid("all sizes must be positive")
        if self.N % (2 ** self.blocks):
            raise ConfigInvalid(f"N={self.N} is not divisible by 2**blocks")

    @classmethod
    def from_variant(cls, variant, **kw):
        if variant not in VARIANTS:
            raise ConfigInvalid(f"unknown merge variant {variant!r}; use one of {list(VARIANTS)}")
        shared, merge = VARIANTS[variant]
        return cls(shared=shared, merge=merge, **kw)

    @property
    def variant(self):
        return {v: k for k, v in VARIANTS.items()}[(self.shared, self.merge)]

    @property
    def feature_hw(self):
        return self.N // 2 ** self.blocks

    def as_dict(self):
        return asdict(self)


def build_branch(cfg: MultiViewConfig, rng, dtype=np.float64) -> Sequential:
    """``[Conv3x3 -> BN -> ReLU -> MaxPool] x blocks``."""
    layers = []
    c = cfg.k
    for _ in range(cfg.blocks):
        layers += [Conv2D(c, cfg.width, 3, pad=1, rng=rng, dtype=dtype, bias=False),
                   BatchNorm2D(cfg.width, dtype=dtype), ReLU(), MaxPool2x2()]
        c = cfg.width
    return Sequential(*layers)


def build_head(cfg: MultiViewConfig, rng, dtype=np.float64) -> Sequential:
    feat = cfg.width * cfg.feature_hw ** 2
    return Sequential(Flatten(), Linear(feat, cfg.hidden, rng=rng, dtype=dtype), ReLU(),
                      Linear(cfg.hidden, cfg.classes, rng=rng, dtype=dtype))


class MultiViewNetwork(Model):
    """Three branches, one merge, one fully connected head.

    Input batches are ``[B, 3, k, N, N]`` with views in X, Y, Z order.
    """

    def __init__(self, config: MultiViewConfig, branches, merge, head):
        self.config = config
        self.branches = list(branches)
        self.merge = merge
        self.head = head
        self._cache = None

    def named_layers(self):
        out = []
        branches = self.branches[:1] if self.config.shared else self.branches
        for i, b in enumerate(branches):
            out += _flat_layers(f"branch{i}.", b)
        out += self.merge.named_layers()
        out += _flat_layers("head.", self.head)
        return out

    def forward(self, x, train=True):
        x = np.asarray(x)
        cfg = self.config
        if x.ndim != 5 or x.shape[1:] != (3, cfg.k, cfg.N, cfg.N):
            raise ShapeMismatch(f"expected [B, 3, {cfg.k}, {cfg.N}, {cfg.N}], got {x.shape}")
        vols, bcaches = [], []
        for i, branch in enumerate(self.branches):
            v, c = branch.forward(x[:, i], train)
            vols.append(v)
            bcaches.append(c)
        merged, mcache = self.merge.forward(vols, train)
        logits, hcache = self.head.forward(merged, train)
        self._cache = (x.shape, bcaches, mcache, hcache)
        return logits

    def backward(self, grad):
        shape, bcaches, mcache, hcache = self._cache
        g = self.head.backward(grad, hcache)
        gvols = self.merge.backward(g, mcache)
        dx = np.zeros(shape, dtype=grad.dtype)
        # fixed order 0, 1, 2 keeps shared-weight accumulation reproducible
        for i, branch in enumerate(self.branches):
            dx[:, i] = branch.backward(gvols[i], bcaches[i])
        return dx


def build_multiview_net(config: MultiViewConfig, seed: int = 0,
                        dtype=np.float64) -> MultiViewNetwork:
    """Shared: one parameter set used by all three views (seeded with ``seed``).
    Independent: branches seeded ``seed``, ``seed + 1``, ``seed + 2``.
    """
    if config.shared:
        b = build_branch(config, make_rng(seed), dtype)
        branches = [b, b, b]
    else:
        branches = [build_branch(config, make_rng(seed + i), dtype) for i in range(3)]
    if config.merge == "max":
        merge = MaxMerge()
    else:
        merge = ConcatConvMerge(config.width, rng=make_rng([seed, 3]), dtype=dtype)
    head = build_head(config, make_rng([seed, 4]), dtype)
    return MultiViewNetwork(config, branches, merge, head)


def bundle_input(bundles) -> np.ndarray:
    """Stack bundles into a ``[B, 3, k, N, N]`` network input."""
    if isinstance(bundles, MultiViewBundle):
        bundles = [bundles]
    return np.stack([b.as_array() for b in bundles])


def forward_multiview(net: MultiViewNetwork, bundle, train=False) -> np.ndarray:
    """Class logits for one bundle (1-D) or a list of bundles (2-D)."""
    single = isinstance(bundle, MultiViewBundle)
    x = bundle_input(bundle)
    if (x.shape[2], x.shape[3]) != (net.config.k, net.config.N):
        raise ShapeMismatch("bundle (N, k) does not match the network")
    dtype = net.head.layers[1].params["weight"].dtype
    logits = net.forward(x.astype(dtype), train)
    return logits[0] if single else logits
