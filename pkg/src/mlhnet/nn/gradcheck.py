"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np


def relative_error(analytic, numeric):
    """``|a - n| / max(|a|, |n|, 1e-12)`` elementwise."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-12)


def numeric_gradient(f, arr, eps=1e-5, indices=None):
    """Central differences of scalar ``f()`` w.r.t. entries of ``arr``.

    ``arr`` is perturbed in place and restored; the arithmetic runs in
    ``arr``'s dtype.
    """
    flat = arr.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = np.zeros(flat.size, dtype=np.float64)
    h = flat.dtype.type(eps)
    for i in idx:
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        out[i] = (fp - fm) / ((old + h) - (old - h))
    return out.reshape(arr.shape)


@contextmanager
def _cast_state(model, dtype):
    """Temporarily swap every parameter and buffer of ``model`` to ``dtype``."""
    saved = []
    for _, layer in model.named_layers():
        for store in (layer.params, layer.buffers):
            for key, arr in store.items():
                saved.append((store, key, arr))
                store[key] = arr.astype(dtype)
    try:
        yield
    finally:
        for store, key, arr in saved:
            store[key] = arr


@dataclass
class GradcheckResult:
    max_rel_error: float
    per_tensor: dict = field(default_factory=dict)


def finite_diff_gradcheck(model, x, labels, eps=1e-5, train=True, max_entries=None,
                          seed=0, oracle_dtype=np.float64) -> GradcheckResult:
    """Compare ``model``'s float64 backward pass against central differences.

    Every parameter entry and every input entry is checked unless
    ``max_entries`` caps the number per tensor (a seeded random subset).
    ``oracle_dtype=np.longdouble`` evaluates the finite differences in
    extended precision, which keeps roundoff well below the gradient of
    small entries; the analytic side is always float64.
    """
    x = np.array(x, dtype=np.float64)
    _, dx = model.loss_grad(x, labels, train)
    analytic = {"input": dx.copy()}
    analytic.update((n, g.copy()) for n, _, g in model.named_parameters())

    rng = np.random.default_rng(seed)
    per = {}
    with _cast_state(model, oracle_dtype):
        xo = x.astype(oracle_dtype)
        tensors = [("input", xo)] + [(n, p) for n, p, _ in model.named_parameters()]

        def f():
            return model.loss(xo, labels, train)

        for name, arr in tensors:
            idx = None
            if max_entries is not None and arr.size > max_entries:
                idx = np.sort(rng.choice(arr.size, size=max_entries, replace=False))
            num = numeric_gradient(f, arr, eps, idx)
            err = relative_error(analytic[name], num)
            if idx is not None:
                err = err.reshape(-1)[idx]
            per[name] = float(err.max()) if err.size else 0.0
    return GradcheckResult(max(per.values()), per)
