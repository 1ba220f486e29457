import itertools

import numpy as np
import pytest

from helpers import MergeProbe, smooth_point
from mlhnet.errors import ConfigInvalid, ShapeMismatch, UnsupportedK
from mlhnet.mlh import INF, POS_X, POS_Y, POS_Z, MLHDescriptor, MultiViewBundle
from mlhnet.mv_merge import (
    ConcatConvMerge,
    MaxMerge,
    MultiViewConfig,
    build_multiview_net,
    expand_input_weights,
    forward_multiview,
    merge_concat_conv,
    merge_max,
)
from mlhnet.nn import SGD, SgdConfig, finite_diff_gradcheck

EXT = np.longdouble


def volumes(seed, shape=(4, 3, 3)):
    rng = np.random.default_rng(seed)
    return [rng.normal(size=shape) for _ in range(3)]


# -- merge_max -----------------------------------------------------------

def test_max_dominant_branch():
    b1 = volumes(0)[0]
    low = np.full_like(b1, -1e6)
    assert np.array_equal(merge_max(b1, low, low), b1)


@pytest.mark.parametrize("seed", range(5))
def test_max_permutation_invariant(seed):
    vs = volumes(seed)
    ref = merge_max(*vs)
    for perm in itertools.permutations(range(3)):
        assert np.array_equal(merge_max(*[vs[i] for i in perm]), ref)


def test_max_batched_and_shape_errors():
    vs = volumes(1, (2, 4, 3, 3))
    assert merge_max(*vs).shape == (2, 4, 3, 3)
    with pytest.raises(ShapeMismatch):
        merge_max(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))


def test_max_backward_ties_to_first():
    m = MaxMerge()
    v = np.ones((1, 1, 1, 1))
    _, idx = m.forward([v, v, v])
    g = m.backward(np.ones_like(v), idx)
    assert [float(x.sum()) for x in g] == [1.0, 0.0, 0.0]


def probe(kind, seed):
    rng = np.random.default_rng(seed)
    D, hw = 3, 4
    merge = MaxMerge() if kind == "max" else ConcatConvMerge(D, rng=rng)
    x = rng.normal(size=(2, 3, D, hw, hw))
    return MergeProbe(merge, D, hw, rng), x, rng.integers(0, 3, 2)


@pytest.mark.parametrize("kind", ["max", "concat"])
@pytest.mark.parametrize("seed", range(5))
def test_merge_gradcheck(kind, seed):
    net, x, y = smooth_point(lambda a: probe(kind, 100 * seed + a))
    assert finite_diff_gradcheck(net, x, y, oracle_dtype=EXT).max_rel_error < 1e-6


# -- merge_concat_conv ---------------------------------------------------

def test_concat_zero_weights():
    vs = volumes(2)
    out = merge_concat_conv(*vs, np.zeros((4, 12, 3, 3)), np.zeros(4))
    assert out.shape == (4, 3, 3) and not out.any()


@pytest.mark.parametrize("seed", range(10))
def test_concat_not_commutative(seed):
    vs = volumes(seed)
    w = np.random.default_rng(seed + 1000).normal(size=(4, 12, 3, 3))
    a = merge_concat_conv(vs[0], vs[1], vs[2], w)
    b = merge_concat_conv(vs[1], vs[0], vs[2], w)
    assert np.abs(a - b).max() > 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_concat_symmetric_weights_commute(seed):
    rng = np.random.default_rng(seed)
    vs = volumes(seed)
    g = rng.normal(size=(4, 4, 3, 3))
    w = np.concatenate([g, g, g], axis=1)
    ref = merge_concat_conv(*vs, w)
    for perm in itertools.permutations(range(3)):
        out = merge_concat_conv(*[vs[i] for i in perm], w)
        np.testing.assert_allclose(out, ref, rtol=0, atol=1e-12)


def test_concat_order_is_xyz():
    # weights that read only the first group reproduce a conv of b1 alone
    vs = volumes(3)
    w = np.zeros((4, 12, 3, 3))
    w[:, :4, 1, 1] = np.eye(4)
    assert np.array_equal(merge_concat_conv(*vs, w), vs[0])


def test_concat_weight_shape_checked():
    with pytest.raises(ShapeMismatch):
        merge_concat_conv(*volumes(0), np.zeros((4, 8, 3, 3)))


# -- expand_input_weights ------------------------------------------------

def test_expand_scalar_example():
    w3 = np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1, 1)
    assert expand_input_weights(w3).ravel().tolist() == [1, 2, 2, 2, 3]


def test_expand_k3_copy():
    w3 = np.random.default_rng(0).normal(size=(2, 3, 3, 3))
    out = expand_input_weights(w3, k=3)
    assert out is not w3 and out.tobytes() == w3.tobytes()


def test_expand_equal_channels():
    v = np.random.default_rng(1).normal(size=(2, 1, 3, 3))
    out = expand_input_weights(np.repeat(v, 3, axis=1))
    np.testing.assert_allclose(out, np.repeat(v, 5, axis=1), rtol=4e-16, atol=0)


def test_expand_slots():
    w3 = np.random.default_rng(2).normal(size=(4, 3, 3, 3))
    out = expand_input_weights(w3)
    assert np.array_equal(out[:, [0, 2, 4]], w3)
    assert np.array_equal(out[:, 1], w3.mean(axis=1)) and np.array_equal(out[:, 3], out[:, 1])


@pytest.mark.parametrize("k", [1, 2, 4, 6])
def test_expand_unsupported_k(k):
    with pytest.raises(UnsupportedK):
        expand_input_weights(np.zeros((1, 3, 1, 1)), k=k)


@pytest.mark.parametrize("seed", range(5))
def test_expand_channel_constant_mean_response(seed):
    """Per input channel, the expanded filter responds to a channel-constant
    image exactly as the original filter does."""
    rng = np.random.default_rng(seed)
    w3 = rng.normal(size=(4, 3, 3, 3))
    w5 = expand_input_weights(w3)
    img = rng.normal(size=(3, 3))
    r3 = np.einsum("dcij,ij->d", w3, img)
    r5 = np.einsum("dcij,ij->d", w5, img)
    assert np.abs(r5 / 5 - r3 / 3).max() < 1e-12


# -- network assembly ----------------------------------------------------

def small_cfg(variant, **kw):
    base = dict(N=16, k=2, width=4, hidden=8, classes=3)
    base.update(kw)
    return MultiViewConfig.from_variant(variant, **base)


def rand_bundle(rng, N, k):
    return rng.uniform(0, 1, size=(3, k, N, N))


@pytest.mark.parametrize("variant", ["shared-max", "ind-max", "ind-cat"])
def test_shapes_and_names(variant):
    cfg = small_cfg(variant)
    net = build_multiview_net(cfg, seed=0)
    x = rand_bundle(np.random.default_rng(0), 16, 2)[None]
    assert net.forward(x, False).shape == (1, 3)
    names = [n for n, _, _ in net.named_parameters()]
    assert len(names) == len(set(names))
    n_branches = len({n.split(".")[0] for n in names if n.startswith("branch")})
    assert n_branches == (1 if cfg.shared else 3)
    assert any(n.startswith("merge.") for n in names) == (cfg.merge == "concat")


def test_concat_shape_audit():
    cfg = small_cfg("ind-cat")
    net = build_multiview_net(cfg, seed=0)
    assert net.merge.conv.params["weight"].shape == (4, 12, 3, 3)


def test_shared_stays_identical_independent_diverges():
    rng = np.random.default_rng(5)
    x = rand_bundle(rng, 16, 2)[None].repeat(4, axis=0) + rng.normal(0, 0.1, (4, 3, 2, 16, 16))
    y = np.array([0, 1, 2, 0])
    for variant in ("shared-max", "ind-max"):
        net = build_multiview_net(small_cfg(variant), seed=3)
        net.loss_grad(x, y)
        SGD(net, SgdConfig()).step(0)
        params = [[l.params[k].tobytes() for l in b.layers for k in sorted(l.params)]
                  for b in net.branches]
        same = params[0] == params[1] == params[2]
        assert same == (variant == "shared-max")


def test_independent_branches_seeded_apart():
    net = build_multiview_net(small_cfg("ind-cat"), seed=7)
    w = [b.layers[0].params["weight"] for b in net.branches]
    assert not np.array_equal(w[0], w[1]) and not np.array_equal(w[1], w[2])


def test_identical_views_shared_max_equals_single_branch():
    net = build_multiview_net(small_cfg("shared-max"), seed=1)
    view = np.random.default_rng(2).uniform(size=(2, 16, 16))
    x = np.stack([view] * 3)[None]
    logits = net.forward(x, False)
    v, _ = net.branches[0].forward(view[None], False)
    ref, _ = net.head.forward(v, False)
    assert np.array_equal(logits, ref)


def test_empty_bundle_finite():
    net = build_multiview_net(small_cfg("ind-cat"), seed=0)
    descs = [MLHDescriptor(16, 2, v, np.full((16, 16, 2), INF, dtype=np.float32))
             for v in (POS_X, POS_Y, POS_Z)]
    logits = forward_multiview(net, MultiViewBundle(*descs))
    assert logits.shape == (3,) and np.isfinite(logits).all()


def test_forward_multiview_mismatch():
    net = build_multiview_net(small_cfg("ind-cat"), seed=0)
    descs = [MLHDescriptor(8, 2, v, np.zeros((8, 8, 2), dtype=np.float32))
             for v in (POS_X, POS_Y, POS_Z)]
    with pytest.raises(ShapeMismatch):
        forward_multiview(net, MultiViewBundle(*descs))


def test_config_validation():
    with pytest.raises(ConfigInvalid):
        MultiViewConfig.from_variant("shared-cat")
    with pytest.raises(ConfigInvalid):
        MultiViewConfig(N=20)


@pytest.mark.parametrize("variant", ["shared-max", "ind-max", "ind-cat"])
def test_end_to_end_gradcheck(variant):
    cfg = small_cfg(variant)

    def make(attempt):
        rng = np.random.default_rng(attempt)
        x = rng.uniform(0, 1, size=(2, 3, 2, 16, 16))
        return build_multiview_net(cfg, seed=attempt), x, np.array([0, 2])

    net, x, y = smooth_point(make, margin=1e-4, tries=500)
    res = finite_diff_gradcheck(net, x, y, max_entries=40, oracle_dtype=EXT)
    assert res.max_rel_error < 1e-5
