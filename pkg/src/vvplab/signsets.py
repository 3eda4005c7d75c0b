"""Near-orthogonal unit-vector families and the quarter-circle embedding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConstructionError, DimensionError


@dataclass(frozen=True)
class SignVectorSet:
    d: int
    vectors: np.ndarray  # (count, d)
    tau: float
    certificate: float

    def __len__(self):
        return self.vectors.shape[0]

    def __getitem__(self, idx):
        return self.vectors[idx]

    def to_json(self):
        return {
            "d": self.d,
            "tau": self.tau,
            "vectors": self.vectors.tolist(),
            "certificate": self.certificate,
        }

    @classmethod
    def from_json(cls, obj):
        vecs = np.asarray(obj["vectors"], dtype=float).reshape(-1, int(obj["d"]))
        return cls(int(obj["d"]), vecs, float(obj["tau"]), float(obj["certificate"]))


def max_pairwise_inner(vectors) -> float:
    """Largest inner product over distinct pairs; ``-inf`` when there are no pairs."""
    v = np.asarray(vectors, dtype=float)
    if v.shape[0] < 2:
        return -math.inf
    gram = v @ v.T
    np.fill_diagonal(gram, -np.inf)
    return float(gram.max())


def certify(s: SignVectorSet, atol=1e-12) -> bool:
    """Re-check unit norms and the pairwise bound from scratch."""
    norms = np.linalg.norm(s.vectors, axis=1)
    if np.any(np.abs(norms - 1.0) > atol):
        return False
    return max_pairwise_inner(s.vectors) <= s.tau


def build_sign_set(d: int, count: int, tau: float = 0.5, max_restarts: int = 10,
                   seed: int = 0) -> SignVectorSet:
    """Return ``count`` unit vectors in R^d with pairwise inner products at most ``tau``.

    For ``count <= d`` the first standard basis vectors are used. Otherwise the
    whole set of i.i.d. ``+-1/sqrt(d)`` sign vectors is redrawn until every pair
    passes, up to ``max_restarts`` attempts.
    """
    if d < 1 or count < 1:
        raise ValueError("d and count must be positive")
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    if count <= d:
        vecs = np.eye(d)[:count]
        return SignVectorSet(d, vecs, tau, max_pairwise_inner(vecs))

    rng = np.random.default_rng(np.random.SeedSequence([seed, d, count]))
    best = math.inf
    for _ in range(max_restarts):
        signs = rng.integers(0, 2, size=(count, d), dtype=np.int64) * 2 - 1
        gram = signs @ signs.T  # exact integers
        np.fill_diagonal(gram, -d - 1)
        cert = gram.max() / d
        best = min(best, cert)
        if cert <= tau:
            return SignVectorSet(d, signs / math.sqrt(d), tau, float(cert))
    raise ConstructionError(
        f"no {count}-vector sign set in dimension {d} with max inner product <= {tau} "
        f"after {max_restarts} attempts (best {best:.4f})",
        best_certificate=float(best),
    )


def hoeffding_failure_bound(d: int, count: int, tau: float = 0.5) -> float:
    """Union bound on the chance a random sign set has some pair above ``tau``."""
    return math.exp(-d * tau * tau / 2.0) * math.comb(count, 2)


@dataclass(frozen=True)
class CircleEmbedding:
    """Indices ``1..a`` placed on a quarter circle."""

    a: int

    def __post_init__(self):
        if self.a < 2:
            raise ValueError("a must be at least 2")

    @property
    def delta(self) -> float:
        return 1.0 - math.cos(math.pi / (2 * self.a))

    def points(self) -> np.ndarray:
        ang = np.pi * np.arange(1, self.a + 1) / (2 * self.a)
        return np.column_stack([np.sin(ang), np.cos(ang)])


def circle_point(emb: CircleEmbedding, j: int) -> np.ndarray:
    if not 1 <= j <= emb.a:
        raise ValueError(f"index {j} outside [1, {emb.a}]")
    ang = math.pi * j / (2 * emb.a)
    return np.array([math.sin(ang), math.cos(ang)])


def pad_embed(u, total: int, offset: int) -> np.ndarray:
    """Place ``u`` at positions ``offset .. offset+len(u)-1`` of a zero vector."""
    u = np.asarray(u, dtype=float)
    if offset < 0 or offset + u.shape[0] > total:
        raise DimensionError(f"cannot place length-{u.shape[0]} vector at offset {offset} in {total}")
    out = np.zeros(total)
    out[offset:offset + u.shape[0]] = u
    return out
