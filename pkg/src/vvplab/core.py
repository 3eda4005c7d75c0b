"""Shared objects for vector-valued prediction problems.

Matrices are stored column-sparse: a ``k x m`` matrix holds only the columns
that are nonzero, everything else is implicitly zero. Input vectors are sparse
maps ``{column index: value}``. Indices are 0-based in memory; the JSON form
uses 1-based column keys.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

SparseVec = Mapping[int, float]

ATOL = 1e-9


class DimensionError(ValueError):
    """Shapes or indices do not line up."""


class ConstructionError(RuntimeError):
    """A randomized construction could not be certified.

    ``best_certificate`` carries the best value reached across attempts.
    """

    def __init__(self, message, best_certificate=None):
        super().__init__(message)
        self.best_certificate = best_certificate


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class StructuredMatrix:
    """A ``k x m`` real matrix with only some columns stored explicitly."""

    k: int
    m: int
    cols: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise DimensionError(f"matrix shape must be positive, got {self.k}x{self.m}")
        frozen = {}
        for idx, col in self.cols.items():
            idx = int(idx)
            if not 0 <= idx < self.m:
                raise DimensionError(f"column index {idx} outside [0, {self.m})")
            col = np.array(col, dtype=float)
            if col.shape != (self.k,):
                raise DimensionError(f"column {idx} has shape {col.shape}, expected ({self.k},)")
            col.flags.writeable = False
            frozen[idx] = col
        object.__setattr__(self, "cols", frozen)

    @property
    def shape(self):
        return (self.k, self.m)

    @classmethod
    def zeros(cls, k, m):
        return cls(k, m, {})

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2:
            raise DimensionError("dense matrix must be 2-D")
        k, m = a.shape
        cols = {j: a[:, j].copy() for j in range(m) if np.any(a[:, j])}
        return cls(k, m, cols)

    def column(self, j):
        if not 0 <= j < self.m:
            raise DimensionError(f"column index {j} outside [0, {self.m})")
        col = self.cols.get(j)
        return np.zeros(self.k) if col is None else col

    def to_dense(self):
        out = np.zeros((self.k, self.m))
        for j, col in self.cols.items():
            out[:, j] = col
        return out

    def with_columns(self, updates):
        """Copy with some columns replaced."""
        cols = dict(self.cols)
        cols.update(updates)
        return StructuredMatrix(self.k, self.m, cols)

    def to_json(self):
        return {
            "k": self.k,
            "m": self.m,
            "cols": {str(j + 1): [float(v) for v in self.cols[j]] for j in sorted(self.cols)},
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        cols = {int(key) - 1: np.asarray(vals, dtype=float) for key, vals in obj["cols"].items()}
        return cls(int(obj["k"]), int(obj["m"]), cols)


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def matvec(M: StructuredMatrix, x: SparseVec) -> np.ndarray:
    """Exact product ``M @ x`` for a sparse input; only referenced columns are read."""
    out = np.zeros(M.k)
    for j, v in x.items():
        if not 0 <= j < M.m:
            raise DimensionError(f"input index {j} outside [0, {M.m})")
        col = M.cols.get(j)
        if col is not None and v != 0.0:
            out += v * col
    return out


def add(a: StructuredMatrix, b: StructuredMatrix) -> StructuredMatrix:
    _check_same_shape(a, b)
    cols = dict(a.cols)
    for j, col in b.cols.items():
        cols[j] = cols[j] + col if j in cols else col
    return StructuredMatrix(a.k, a.m, cols)


def subtract(a: StructuredMatrix, b: StructuredMatrix) -> StructuredMatrix:
    _check_same_shape(a, b)
    cols = dict(a.cols)
    for j, col in b.cols.items():
        cols[j] = cols[j] - col if j in cols else -col
    return StructuredMatrix(a.k, a.m, cols)


def scale(a: StructuredMatrix, s: float) -> StructuredMatrix:
    return StructuredMatrix(a.k, a.m, {j: s * col for j, col in a.cols.items()})


def frobenius_distance(a: StructuredMatrix, b: StructuredMatrix) -> float:
    """Frobenius norm of ``a - b``, summed over the union of explicit columns."""
    _check_same_shape(a, b)
    total = 0.0
    for j in set(a.cols) | set(b.cols):
        diff = a.column(j) - b.column(j)
        total += float(diff @ diff)
    return math.sqrt(total)


def project_frobenius_ball(W: StructuredMatrix, W0: StructuredMatrix, R: float = 1.0) -> StructuredMatrix:
    """Euclidean projection of ``W`` onto ``{V : ||V - W0||_F <= R}``."""
    if R <= 0:
        raise ValueError("radius must be positive")
    dist = frobenius_distance(W, W0)
    if dist <= R:
        return W
    return add(W0, scale(subtract(W, W0), R / dist))


def sparse_norm(x: SparseVec) -> float:
    return math.sqrt(sum(v * v for v in x.values()))


@dataclass(frozen=True)
class VvpInstance:
    """A vector-valued prediction problem with a uniform distribution over ``inputs``.

    ``loss`` maps a prediction in R^k to a real and ``subgradient`` returns one
    subgradient there. ``loss_batch`` is an optional vectorized version
    (rows are predictions) used when present.
    """

    k: int
    m: int
    W0: StructuredMatrix
    loss: Callable[[np.ndarray], float]
    subgradient: Callable[[np.ndarray], np.ndarray]
    inputs: Sequence[SparseVec]
    lipschitz: float
    input_norm_bound: float = 1.0
    loss_batch: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.W0.shape != (self.k, self.m):
            raise DimensionError("reference matrix shape does not match (k, m)")
        if self.lipschitz <= 0:
            raise ValueError("lipschitz bound must be positive")
        for x in self.inputs:
            if sparse_norm(x) > self.input_norm_bound + 1e-12:
                raise ValueError("input exceeds the declared norm bound")
            if any(not 0 <= j < self.m for j in x):
                raise DimensionError("input index out of range")

    @property
    def n_inputs(self):
        return len(self.inputs)

    def predictions(self, W: StructuredMatrix, indices=None) -> np.ndarray:
        if W.shape != (self.k, self.m):
            raise DimensionError(f"matrix shape {W.shape} does not match instance {(self.k, self.m)}")
        if indices is None:
            indices = range(self.n_inputs)
        return np.array([matvec(W, self.inputs[i]) for i in indices]).reshape(-1, self.k)

    def losses(self, W: StructuredMatrix, indices=None) -> np.ndarray:
        preds = self.predictions(W, indices)
        if self.loss_batch is not None:
            return np.asarray(self.loss_batch(preds), dtype=float)
        return np.array([self.loss(p) for p in preds])


def population_loss(inst: VvpInstance, W: StructuredMatrix) -> float:
    """Exact average loss over the finite support."""
    return float(np.mean(inst.losses(W)))


def empirical_loss(inst: VvpInstance, W: StructuredMatrix, sample: Sequence[int]) -> float:
    """Average loss over a multiset of input indices."""
    sample = [int(i) for i in sample]
    if not sample:
        raise ValueError("empty sample")
    if any(not 0 <= i < inst.n_inputs for i in sample):
        raise DimensionError("sample index out of range")
    uniq, counts = np.unique(sample, return_counts=True)
    vals = inst.losses(W, uniq)
    return float(np.dot(vals, counts) / len(sample))


@dataclass(frozen=True)
class ScoInstance:
    """A stochastic convex problem ``min_w E_z f(w, z)``.

    ``loss(w, zs)`` evaluates ``f`` at one point against a batch of samples and
    returns one value per sample; ``subgradient(w, z)`` takes a single sample.
    ``sampler(rng, size)`` draws a batch. ``population`` is the exact ``F`` when
    the distribution has finite support.
    """

    d: int
    loss: Callable[[np.ndarray, np.ndarray], np.ndarray]
    subgradient: Callable[[np.ndarray, object], np.ndarray]
    bound: float
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    domain_radius: float = math.sqrt(2.0)
    population: Callable[[np.ndarray], float] | None = None
    optimum: tuple[np.ndarray, float] | None = None
    name: str = "sco"


@dataclass(frozen=True)
class LearnerContract:
    """A learner: ``train(instance, sample, seed) -> matrix`` plus its advertised rate."""

    train: Callable[[VvpInstance, Sequence[int], int], StructuredMatrix]
    rate: Callable[[int], float]
    name: str = "learner"


def estimate_lipschitz(loss: Callable[[np.ndarray], float], dim: int, rng: np.random.Generator,
                       trials: int = 1000, scale: float = 1.0, h: float = 1e-3) -> float:
    """Largest directional difference quotient seen over random points and unit directions."""
    best = 0.0
    for _ in range(trials):
        y = scale * rng.standard_normal(dim)
        u = rng.standard_normal(dim)
        u /= np.linalg.norm(u)
        best = max(best, abs(loss(y + h * u) - loss(y)) / h)
    return best
