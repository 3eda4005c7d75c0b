"""Learners for vector-valued prediction: projected SGD and an exact ERM over labeling matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import InstanceTooLarge, LearnerContract, StructuredMatrix, VvpInstance
from .shatter import ShatterInstance, code_bits, example_loss_table, labeling_matrix


@dataclass(frozen=True)
class SgdConfig:
    """Projected subgradient descent settings.

    ``steps=None`` means one pass over the sample. ``eta=None`` picks
    ``radius / (G * X * sqrt(T))`` where ``G`` is the loss Lipschitz bound and
    ``X`` the input norm bound. ``schedule="sqrt"`` uses ``eta / sqrt(t)``.
    """

    steps: Optional[int] = None
    eta: Optional[float] = None
    schedule: str = "constant"
    radius: float = 1.0
    averaging: str = "average"
    shuffle: bool = False

    def __post_init__(self):
        if self.steps is not None and self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.schedule not in ("constant", "sqrt"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.averaging not in ("average", "final"):
            raise ValueError(f"unknown averaging {self.averaging!r}")


def default_eta(inst: VvpInstance, steps: int, radius: float = 1.0) -> float:
    return radius / (inst.lipschitz * inst.input_norm_bound * math.sqrt(max(steps, 1)))


def sgd_train(inst: VvpInstance, sample, cfg: SgdConfig = SgdConfig(), seed: int = 0,
              on_step: Callable[[int, np.ndarray], None] | None = None) -> StructuredMatrix:
    """Run projected SGD from ``W0`` inside the Frobenius ball of radius ``cfg.radius``.

    Examples are visited in sample order, cycling when ``steps`` exceeds the
    sample size (reshuffled each pass when ``cfg.shuffle``).
    """
    sample = np.asarray(sample, dtype=np.int64)
    T = len(sample) if cfg.steps is None else cfg.steps
    if T == 0:
        return inst.W0
    if sample.size == 0:
        raise ValueError("empty sample")
    eta0 = cfg.eta if cfg.eta is not None else default_eta(inst, T, cfg.radius)
    rng = np.random.default_rng(seed)

    W0 = inst.W0.to_dense()
    W = W0.copy()
    acc = np.zeros_like(W)
    order = sample.copy()
    for t in range(T):
        pos = t % len(order)
        if pos == 0 and t > 0 and cfg.shuffle:
            order = rng.permutation(sample)
        acc += W
        x = inst.inputs[int(order[pos])]
        yhat = np.zeros(inst.k)
        for j, v in x.items():
            yhat += v * W[:, j]
        g = inst.subgradient(yhat)
        eta = eta0 / math.sqrt(t + 1) if cfg.schedule == "sqrt" else eta0
        for j, v in x.items():
            W[:, j] -= eta * v * g
        diff = W - W0
        dist = math.sqrt(float(np.sum(diff * diff)))
        if dist > cfg.radius:
            W = W0 + diff * (cfg.radius / dist)
        if on_step is not None:
            on_step(t, W)
    out = acc / T if cfg.averaging == "average" else W
    return StructuredMatrix.from_dense(out)


def sgd_learner(cfg: SgdConfig = SgdConfig(), lipschitz: float = 1.0,
                input_norm: float = 1.0) -> LearnerContract:
    """Wrap :func:`sgd_train` with the rate ``2 * G * X * R / sqrt(n)`` it advertises."""

    def rate(n):
        return 2.0 * lipschitz * input_norm * cfg.radius / math.sqrt(n)

    return LearnerContract(train=lambda inst, sample, seed: sgd_train(inst, sample, cfg, seed),
                           rate=rate, name="sgd")


def family_erm_labeling(inst: ShatterInstance, sample) -> np.ndarray:
    """Labeling whose matrix minimizes the empirical loss; ties go to the lexicographically smallest."""
    p = inst.params
    if p.n > 24:
        raise InstanceTooLarge(f"labeling family has 2^{p.n} members; limit is 2^24")
    counts = np.bincount(np.asarray(sample, dtype=np.int64), minlength=p.n).reshape(p.J, p.B)
    table = example_loss_table(inst)                      # (J, 2^B, B)
    scores = np.einsum("jzi,ji->jz", table, counts)
    # codes are big-endian, so the smallest tied code is the lexicographically smallest block;
    # rounding in the loss values would otherwise split exact ties
    tied = scores <= scores.min(axis=1, keepdims=True) + 1e-12
    best = tied.argmax(axis=1)
    return np.concatenate([code_bits(int(z), p.B) for z in best])


def family_erm(inst: ShatterInstance, sample) -> StructuredMatrix:
    return labeling_matrix(inst, family_erm_labeling(inst, sample))
