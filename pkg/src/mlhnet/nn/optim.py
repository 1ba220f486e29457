"""SGD with momentum and a step learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigInvalid, ShapeMismatch


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 20
    batch_size: int = 8
    decay_epoch: int = 10
    decay_factor: float = 0.1

    def __post_init__(self):
        if self.learning_rate < 0 or self.momentum < 0 or self.decay_factor <= 0:
            raise ConfigInvalid("learning_rate, momentum must be >= 0, decay_factor > 0")
        if self.epochs < 1 or self.batch_size < 1 or self.decay_epoch < 1:
            raise ConfigInvalid("epochs, batch_size and decay_epoch must be >= 1")

    def lr_at(self, epoch: int) -> float:
        """Learning rate for 0-based ``epoch``: ``lr * factor**(epoch // decay_epoch)``."""
        return self.learning_rate * self.decay_factor ** (epoch // self.decay_epoch)


def sgd_step(params, grads, velocity, config: SgdConfig, epoch: int):
    """In-place update ``v <- mu*v + g``, ``theta <- theta - lr(epoch)*v``.

    ``params``, ``grads`` and ``velocity`` are parallel lists of arrays.
    Returns ``params``.
    """
    lr = config.lr_at(epoch)
    for p, g, v in zip(params, grads, velocity):
        if p.shape != g.shape or p.shape != v.shape:
            raise ShapeMismatch(f"parameter {p.shape} / gradient {g.shape} mismatch")
        v *= config.momentum
        v += g
        p -= lr * v
    return params


class SGD:
    def __init__(self, model, config: SgdConfig):
        self.model = model
        self.config = config
        self.velocity = [np.zeros_like(p) for _, p, _ in model.named_parameters()]

    def step(self, epoch: int):
        named = self.model.named_parameters()
        sgd_step([p for _, p, _ in named], [g for _, _, g in named],
                 self.velocity, self.config, epoch)
