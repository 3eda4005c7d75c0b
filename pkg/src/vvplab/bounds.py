"""Monte Carlo Rademacher complexity and worst-case generalization gap of the labeling family.

Example ``(i, j)`` only sees block ``j`` of a labeling, so any objective of the
form ``sum_e weight_e * loss_e(y)`` splits into independent maximizations over
the ``2^B`` codes of each block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import estimate_lipschitz
from .shatter import ShatterInstance, example_loss_table


@dataclass(frozen=True)
class RademacherEstimate:
    value: float
    trials: int
    standard_error: float
    bound: float
    sample_size: int
    lipschitz: float

    @property
    def within_bound(self) -> bool:
        return self.value <= self.bound + 3 * self.standard_error

    def to_json(self):
        return {
            "value": self.value,
            "trials": self.trials,
            "standard_error": self.standard_error,
            "bound": self.bound,
            "sample_size": self.sample_size,
            "lipschitz": self.lipschitz,
            "within_bound": self.within_bound,
        }


def uniform_convergence_bound(lipschitz: float, k: int, n: int) -> float:
    return 2 * math.sqrt(2) * lipschitz * math.sqrt(k) / math.sqrt(n)


def measured_lipschitz(inst: ShatterInstance, seed: int = 0, trials: int = 2000) -> float:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    return estimate_lipschitz(inst.vvp.loss, inst.params.k, rng, trials=trials)


def _block_sup(table: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``sum_j max_z sum_i weights[..., j, i] * table[j, z, i]`` for a batch of weights."""
    return np.einsum("tji,jzi->tjz", weights, table).max(axis=2).sum(axis=1)


def family_sup(inst: ShatterInstance, sample, sigma, table=None) -> np.ndarray:
    """Per-draw ``sup_y (1/n) sum_s sigma_s loss(W_y x_{i_s})`` over all labelings."""
    p = inst.params
    sample = np.asarray(sample, dtype=np.int64)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    table = example_loss_table(inst) if table is None else table
    # fold draws onto examples: repeated indices add their signs
    onto = np.zeros((sample.size, p.n))
    onto[np.arange(sample.size), sample] = 1.0
    weights = (sigma @ onto).reshape(-1, p.J, p.B)
    return _block_sup(table, weights) / sample.size


def rademacher_estimate(inst: ShatterInstance, sample, trials: int = 10_000, seed: int = 0,
                        family=None, lipschitz: float | None = None,
                        chunk: int = 1000) -> RademacherEstimate:
    """Monte Carlo estimate of the empirical Rademacher complexity on ``sample``.

    With ``family=None`` the supremum runs over every labeling matrix; otherwise
    over the given list of matrices. The reported bound uses the measured
    Lipschitz constant of the loss unless ``lipschitz`` is supplied.
    """
    sample = np.asarray(sample, dtype=np.int64)
    n = sample.size
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, trials]))
    G = measured_lipschitz(inst, seed) if lipschitz is None else lipschitz

    if family is not None:
        losses = np.array([inst.vvp.losses(W, sample) for W in family])   # (F, n)
        table = None
    else:
        table = example_loss_table(inst)
    sups = []
    for start in range(0, trials, chunk):
        size = min(chunk, trials - start)
        sigma = rng.integers(0, 2, size=(size, n)) * 2.0 - 1.0
        if family is not None:
            sups.append((sigma @ losses.T).max(axis=1) / n)
        else:
            sups.append(family_sup(inst, sample, sigma, table))
    sups = np.concatenate(sups)
    se = float(sups.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return RademacherEstimate(
        value=float(sups.mean()),
        trials=trials,
        standard_error=se,
        bound=uniform_convergence_bound(G, inst.params.k, n),
        sample_size=n,
        lipschitz=G,
    )


def gap_weights(inst: ShatterInstance, sample) -> np.ndarray:
    """Per-example weight of ``L - L_hat``: ``1/n - count_e / |sample|``."""
    p = inst.params
    sample = np.asarray(sample, dtype=np.int64)
    counts = np.bincount(sample, minlength=p.n)
    return 1.0 / p.n - counts / sample.size


def sup_generalization_gap(inst: ShatterInstance, sample) -> float:
    """Exact ``max_y L(W_y') - L_hat(W_y')`` over all labelings."""
    p = inst.params
    w = gap_weights(inst, sample).reshape(1, p.J, p.B)
    return float(_block_sup(example_loss_table(inst), w)[0])
