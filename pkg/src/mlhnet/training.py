"""Seeded, single-threaded training and evaluation of multi-view networks."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigInvalid, ShapeMismatch
from .formats import Dataset
from .mv_merge import MultiViewConfig, MultiViewNetwork, build_multiview_net
from .nn.checkpoint import load_into, read_state, save_model
from .nn.optim import SGD, SgdConfig
from .sampling import make_rng

log = logging.getLogger(__name__)

DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    train_accuracy: float
    test_accuracy: float | None


@dataclass
class TrainReport:
    variant: str
    seed: int
    classes: list
    config: dict
    sgd: dict
    epochs: list = field(default_factory=list)
    final_test_accuracy: float | None = None
    confusion: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["epochs"] = [asdict(e) if not isinstance(e, dict) else e for e in self.epochs]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def confusion_matrix(labels, preds, classes: int) -> np.ndarray:
    """Rows are true classes, columns predictions."""
    cm = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(labels, dtype=np.int64), np.asarray(preds, dtype=np.int64)), 1)
    return cm


def accuracy_of(cm) -> float | None:
    total = int(np.sum(cm))
    return None if total == 0 else float(np.trace(cm) / total)


def evaluate_arrays(net: MultiViewNetwork, X, y, batch_size=64):
    """``(accuracy, confusion)``; accuracy is None for an empty split."""
    cfg = net.config
    if len(X) and X.shape[1:] != (3, cfg.k, cfg.N, cfg.N):
        raise ShapeMismatch(f"dataset inputs {X.shape[1:]} do not fit the network")
    if len(X) == 0:
        cm = np.zeros((cfg.classes, cfg.classes), dtype=np.int64)
        return None, cm
    preds = net.predict(X, batch_size).argmax(axis=1)
    cm = confusion_matrix(y, preds, cfg.classes)
    return accuracy_of(cm), cm


def fit(net: MultiViewNetwork, X, y, sgd: SgdConfig, seed: int, X_test=None, y_test=None,
        steps: int | None = None):
    """Minibatch SGD over ``X``; returns the list of :class:`EpochStats`.

    ``steps`` stops after that many optimiser steps (across epochs) instead of
    running ``sgd.epochs`` full epochs.
    """
    opt = SGD(net, sgd)
    rng = make_rng([seed, 0x5EED])
    n = len(X)
    if n == 0:
        raise ConfigInvalid("training split is empty")
    history = []
    done = 0
    epoch = 0
    while True:
        if steps is None and epoch >= sgd.epochs:
            break
        if steps is not None and done >= steps:
            break
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, sgd.batch_size):
            idx = order[start:start + sgd.batch_size]
            loss, _ = net.loss_grad(X[idx], y[idx], train=True)
            opt.step(epoch)
            total += float(loss) * len(idx)
            seen += len(idx)
            done += 1
            if steps is not None and done >= steps:
                break
        train_acc, _ = evaluate_arrays(net, X, y)
        test_acc = None
        if X_test is not None and len(X_test):
            test_acc, _ = evaluate_arrays(net, X_test, y_test)
        stats = EpochStats(epoch, sgd.lr_at(epoch), total / seen, train_acc, test_acc)
        log.info("epoch %d lr %.4g loss %.4f train %.3f test %s", epoch, stats.lr,
                 stats.train_loss, train_acc, test_acc)
        history.append(stats)
        epoch += 1
    return history


def train(dataset: Dataset, config: MultiViewConfig, sgd: SgdConfig | None = None, seed=0,
          dtype="float32"):
    """Train a fresh network on the dataset's train split.

    Returns ``(report, net)``; the report carries per-epoch statistics and the
    final test confusion matrix.
    """
    sgd = sgd or SgdConfig()
    if dtype not in DTYPES:
        raise ConfigInvalid(f"dtype must be one of {list(DTYPES)}")
    if (config.N, config.k) != (dataset.N, dataset.k):
        raise ConfigInvalid(f"network (N, k)=({config.N}, {config.k}) does not match the "
                            f"dataset ({dataset.N}, {dataset.k})")
    if config.classes != len(dataset.classes):
        raise ConfigInvalid("network class count does not match the dataset")
    dt = DTYPES[dtype]
    X, y = dataset.arrays("train", dt)
    Xt, yt = dataset.arrays("test", dt)
    net = build_multiview_net(config, seed, dt)
    history = fit(net, X, y, sgd, seed, Xt, yt)
    acc, cm = evaluate_arrays(net, Xt, yt)
    report = TrainReport(
        variant=config.variant, seed=int(seed), classes=list(dataset.classes),
        config=config.as_dict() | {"dtype": dtype}, sgd=asdict(sgd),
        epochs=history, final_test_accuracy=acc, confusion=cm.tolist(),
    )
    return report, net


def evaluate(net: MultiViewNetwork, dataset: Dataset, split="test"):
    """``(accuracy, confusion)`` on one split (``None`` for every record)."""
    dt = net.head.layers[1].params["weight"].dtype
    X, y = dataset.arrays(split, dt)
    if dataset.records and (dataset.N, dataset.k) != (net.config.N, net.config.k):
        raise ShapeMismatch("checkpoint and dataset disagree on (N, k)")
    return evaluate_arrays(net, X, y)


def save_network(net: MultiViewNetwork, path) -> None:
    dtype = np.dtype(net.head.layers[1].params["weight"].dtype).name
    save_model(net, path, {"model": "multiview", "config": net.config.as_dict(),
                           "dtype": dtype})


def load_network(path) -> MultiViewNetwork:
    with open(path, "rb") as fh:
        meta, tensors = read_state(fh)
    if meta.get("model") != "multiview":
        raise ConfigInvalid("checkpoint does not hold a multi-view network")
    cfg = MultiViewConfig(**meta["config"])
    net = build_multiview_net(cfg, 0, DTYPES[meta["dtype"]])
    load_into(net, tensors)
    return net
