"""Bad empirical risk minimizers on the shattering instances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import DimensionError, StructuredMatrix, VvpInstance, empirical_loss, population_loss
from .shatter import ShatterInstance, labeling_matrix

GAP_HEADER = ("trial", "unseen_fraction", "empirical_loss", "excess")


@dataclass(frozen=True)
class AdversaryResult:
    labeling: np.ndarray
    W: StructuredMatrix
    empirical_loss: float
    population_excess: float
    unseen_fraction: float


@lru_cache(maxsize=32)
def _reference_loss(inst: ShatterInstance) -> float:
    return population_loss(inst.vvp, labeling_matrix(inst, np.zeros(inst.params.n, dtype=np.uint8)))


def reference_matrix(inst: ShatterInstance) -> StructuredMatrix:
    """The all-zeros labeling matrix, a population minimizer with loss ``-eps``."""
    return labeling_matrix(inst, np.zeros(inst.params.n, dtype=np.uint8))


def adversarial_erm(inst: ShatterInstance, sample) -> AdversaryResult:
    """Label sampled examples 0 and unsampled ones 1, and return that labeling's matrix.

    Every sampled example then has loss ``-eps`` (the smallest value the loss
    takes), so the matrix minimizes the empirical loss, while every unseen
    example pays ``+eps`` in the population.
    """
    n = inst.params.n
    sample = np.asarray(sample, dtype=np.int64)
    if sample.size and (sample.min() < 0 or sample.max() >= n):
        raise DimensionError(f"sample index outside [0, {n})")
    y = np.ones(n, dtype=np.uint8)
    y[sample] = 0
    W = labeling_matrix(inst, y)
    emp = empirical_loss(inst.vvp, W, sample)
    excess = population_loss(inst.vvp, W) - _reference_loss(inst)
    return AdversaryResult(y, W, emp, excess, float(y.sum()) / n)


def draw_sample(n: int, size: int, seed: int, trial: int = 0) -> np.ndarray:
    """I.i.d. uniform indices in ``[0, n)``, reproducible per ``(seed, trial)``."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
    return rng.integers(0, n, size=size)


def expected_unseen_fraction(n: int, size: int) -> float:
    return (1.0 - 1.0 / n) ** size


def gap_experiment(inst: ShatterInstance, sample_size: int, trials: int, seed: int) -> list[dict]:
    """One row per trial: fresh with-replacement sample, adversarial ERM, its excess risk."""
    n = inst.params.n
    if not 1 <= sample_size <= n:
        raise ValueError(f"sample size must lie in [1, {n}]")
    rows = []
    for trial in range(trials):
        res = adversarial_erm(inst, draw_sample(n, sample_size, seed, trial))
        rows.append({
            "trial": trial,
            "unseen_fraction": res.unseen_fraction,
            "empirical_loss": res.empirical_loss,
            "excess": res.population_excess,
        })
    return rows


class ScalarInstance:
    """One-coordinate construction: ``l(y) = y_1``, inputs ``e_i``, ``W0 = 0``.

    A labeling ``b`` in {0,1}^m maps to the matrix whose first row is
    ``eps * (2b - 1)`` and whose other rows are zero.
    """

    def __init__(self, eps: float, k: int = 1):
        if not 0 < eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if k < 1:
            raise ValueError("k must be positive")
        self.eps = eps
        self.k = k
        # floor keeps eps * sqrt(m) <= 1 when 1/eps^2 is not an integer
        self.m = math.floor(1.0 / eps ** 2 + 1e-9)
        e1 = np.zeros(k)
        e1[0] = 1.0
        self.vvp = VvpInstance(
            k=k, m=self.m, W0=StructuredMatrix.zeros(k, self.m),
            loss=lambda y: float(y[0]),
            subgradient=lambda y: e1.copy(),
            inputs=[{i: 1.0} for i in range(self.m)],
            lipschitz=1.0,
            loss_batch=lambda Y: np.asarray(Y)[:, 0],
        )

    def labeling_matrix(self, bits) -> StructuredMatrix:
        bits = np.asarray(bits)
        if bits.shape != (self.m,):
            raise DimensionError(f"labeling length must be {self.m}")
        row = self.eps * (2.0 * bits - 1.0)
        cols = {}
        for i, v in enumerate(row):
            col = np.zeros(self.k)
            col[0] = v
            cols[i] = col
        return StructuredMatrix(self.k, self.m, cols)

    def verify(self, chunk: int = 4096):
        """Exhaustive margin and norm check over all ``2^m`` labelings.

        Returns ``(worst margin deviation, smallest ||W_y||_F, largest ||W_y||_F)``.
        """
        m, k = self.m, self.k
        X = np.eye(m)  # column i is the input e_i
        shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
        worst_dev, nmin, nmax = 0.0, math.inf, -math.inf
        for start in range(0, 1 << m, chunk):
            ids = np.arange(start, min(start + chunk, 1 << m), dtype=np.int64)
            bits = ((ids[:, None] >> shifts) & 1).astype(float)
            W = np.zeros((ids.size, k, m))
            W[:, 0, :] = self.eps * (2.0 * bits - 1.0)
            preds = W @ X                      # (N, k, m): column i is W_y e_i
            losses = preds[:, 0, :]
            worst_dev = max(worst_dev, float(np.abs(losses - self.eps * (2 * bits - 1)).max()))
            norms = np.sqrt((W ** 2).sum(axis=(1, 2)))
            nmin, nmax = min(nmin, float(norms.min())), max(nmax, float(norms.max()))
        return worst_dev, nmin, nmax


def scalar_instance(eps: float, k: int = 1) -> ScalarInstance:
    return ScalarInstance(eps, k)
