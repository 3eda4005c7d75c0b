"""Embedding a stochastic convex problem into vector-valued prediction.

Given ``2n`` samples ``z_1..z_2n`` of a d-dimensional problem, the prediction
problem has ``k = d + 2`` outputs and ``m = 2n + 1`` inputs. Column ``i`` of the
reference matrix is ``c * [phi(i); 0]``, input ``i`` is ``e_i + e_{2n+1}``, and

    l(y) = max_j  <y[0:2], phi(j)> + f(y[2:], z_j).

A learner trained on ``n`` of those inputs yields a matrix whose last column
(bottom ``d`` entries) is read back as the solution ``w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (DimensionError, LearnerContract, ScoInstance, StructuredMatrix, VvpInstance,
                   population_loss)
from .signsets import CircleEmbedding

REDUCTION_HEADER = ("seed", "n", "c", "delta", "vvp_rate_eps_n", "measured_excess", "bound")


@dataclass(frozen=True)
class ReductionConfig:
    n: int
    c: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.c is not None and not self.c > 0:
            raise ValueError("c must be positive")


class ReductionProblem:
    """The converted prediction problem together with the pieces used to build it."""

    def __init__(self, sco: ScoInstance, S, cfg: ReductionConfig):
        S = np.asarray(S)
        if S.shape[0] % 2:
            raise ValueError("the sample must have an even number of points")
        if S.shape[0] != 2 * cfg.n:
            raise ValueError(f"expected {2 * cfg.n} samples, got {S.shape[0]}")
        if sco.domain_radius < math.sqrt(2.0) - 1e-12:
            raise ValueError("the loss must be defined on radius sqrt(2)")
        n2 = 2 * cfg.n
        self.sco = sco
        self.S = S
        self.n = cfg.n
        self.d = sco.d
        self.embedding = CircleEmbedding(n2)
        self.delta = self.embedding.delta
        self.c = 4.0 * sco.bound / self.delta if cfg.c is None else cfg.c
        self.phi = self.embedding.points()       # (2n, 2)
        k, m = self.d + 2, n2 + 1
        cols = {}
        for i in range(n2):
            col = np.zeros(k)
            col[:2] = self.c * self.phi[i]
            cols[i] = col
        self.W0 = StructuredMatrix(k, m, cols)
        self.vvp = VvpInstance(
            k=k, m=m, W0=self.W0,
            loss=self.loss,
            subgradient=self.subgradient,
            inputs=[{i: 1.0, n2: 1.0} for i in range(n2)],
            lipschitz=2.0,
            input_norm_bound=math.sqrt(2.0),
        )

    def branches(self, yhat) -> np.ndarray:
        yhat = np.asarray(yhat, dtype=float)
        return self.phi @ yhat[:2] + self.sco.loss(yhat[2:], self.S)

    def loss(self, yhat) -> float:
        return float(self.branches(yhat).max())

    def subgradient(self, yhat) -> np.ndarray:
        yhat = np.asarray(yhat, dtype=float)
        j = int(np.argmax(self.branches(yhat)))
        return np.concatenate([self.phi[j], self.sco.subgradient(yhat[2:], self.S[j])])

    def proof_matrix(self, w) -> StructuredMatrix:
        """``W0`` with ``w`` placed in the bottom of the last column."""
        col = np.zeros(self.d + 2)
        col[2:] = w
        return self.W0.with_columns({2 * self.n: col})

    def decode_margin(self, W: StructuredMatrix) -> float:
        """Smallest gap between branch ``i`` and the best other branch at ``W x_i``."""
        preds = self.vvp.predictions(W)
        gaps = []
        for i, y in enumerate(preds):
            b = self.branches(y)
            own = b[i]
            b[i] = -np.inf
            gaps.append(own - b.max())
        return float(min(gaps))


def convert(sco: ScoInstance, S, cfg: ReductionConfig) -> ReductionProblem:
    return ReductionProblem(sco, S, cfg)


def extract(W: StructuredMatrix, d: int) -> np.ndarray:
    """Bottom ``d`` entries of the last column."""
    if W.k != d + 2:
        raise DimensionError(f"matrix has {W.k} rows, expected {d + 2}")
    if W.m < 2 or W.m % 2 == 0:
        raise DimensionError("matrix must have 2n + 1 columns")
    return np.array(W.column(W.m - 1)[2:])


def evaluate_population(sco: ScoInstance, w, rng: np.random.Generator, mc_samples: int = 100_000):
    """``(F(w), standard error)``: exact when the problem exposes it, else Monte Carlo."""
    if sco.population is not None:
        return float(sco.population(w)), 0.0
    vals = sco.loss(np.asarray(w, dtype=float), sco.sampler(rng, mc_samples))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(mc_samples))


@dataclass
class ReductionRow:
    seed: int
    n: int
    c: float
    delta: float
    vvp_rate_eps_n: float
    measured_excess: float
    bound: float
    F_out: float = math.nan
    F_star: float = math.nan
    standard_error: float = 0.0
    vvp_excess_vs_proof: float = math.nan
    terms: dict = field(default_factory=dict)

    def csv_row(self):
        return [self.seed, self.n, self.c, self.delta, self.vvp_rate_eps_n, self.measured_excess, self.bound]


def run_reduction(sco: ScoInstance, learner: LearnerContract, n: int, seeds, c: float | None = None,
                  mc_samples: int = 100_000) -> list[ReductionRow]:
    """Full pipeline per seed: sample 2n points, convert, train on n inputs, decode, evaluate."""
    rows = []
    for seed in seeds:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), n]))
        S = sco.sampler(rng, 2 * n)
        prob = convert(sco, S, ReductionConfig(n=n, c=c, seed=int(seed)))
        train_idx = rng.integers(0, 2 * n, size=n)
        W = learner.train(prob.vvp, train_idx, int(seed))
        w = extract(W, sco.d)
        F_out, se = evaluate_population(sco, w, rng, mc_samples)
        rate = learner.rate(n)
        row = ReductionRow(
            seed=int(seed), n=n, c=prob.c, delta=prob.delta, vvp_rate_eps_n=rate,
            measured_excess=math.nan, bound=2 * rate + 10 / math.sqrt(n),
            F_out=F_out, standard_error=se,
            terms={
                "cauchy_schwarz": 1 / math.sqrt(2 * n),
                "empirical_optimism": 2 / math.sqrt(n),
                "stated_slack": 10 / math.sqrt(n),
            },
        )
        if sco.optimum is not None:
            w_star, F_star = sco.optimum
            row.F_star = float(F_star)
            row.measured_excess = F_out - float(F_star)
            row.vvp_excess_vs_proof = (population_loss(prob.vvp, W)
                                       - population_loss(prob.vvp, prob.proof_matrix(w_star)))
        rows.append(row)
    return rows


def mean_excess(rows) -> float:
    return float(np.mean([r.measured_excess for r in rows]))


# test problems --------------------------------------------------------------

def _linear(d=10, p=0.75, **_):
    e1 = np.zeros(d)
    e1[0] = 1.0

    def sampler(rng, size):
        signs = np.where(rng.random(size) < p, 1.0, -1.0)
        return signs[:, None] * e1[None, :]

    slope = 2 * p - 1
    if slope == 0:
        optimum = (np.zeros(d), 0.0)
    else:
        optimum = (-math.copysign(1.0, slope) * e1, -abs(slope))
    return ScoInstance(
        d=d,
        loss=lambda w, zs: np.asarray(zs) @ w,
        subgradient=lambda w, z: np.array(z, dtype=float),
        bound=math.sqrt(2.0),
        sampler=sampler,
        population=lambda w: slope * float(w[0]),
        optimum=optimum,
        name="linear",
    )


def _point_distance(d=10, support=None, **_):
    if support is None:
        z0 = np.zeros(d)
        z0[0] = 0.5
        support = [z0]
    support = np.atleast_2d(np.asarray(support, dtype=float))
    if support.shape[1] != d or np.any(np.linalg.norm(support, axis=1) > 1 + 1e-12):
        raise ValueError("support points must be in the unit ball of R^d")

    def subgradient(w, z):
        diff = w - z
        nrm = np.linalg.norm(diff)
        return diff / nrm if nrm > 0 else np.zeros(d)

    def loss(w, zs):
        return np.linalg.norm(w[None, :] - np.atleast_2d(zs), axis=1)

    return ScoInstance(
        d=d,
        loss=loss,
        subgradient=subgradient,
        bound=1.0 + math.sqrt(2.0),
        sampler=lambda rng, size: support[rng.integers(0, len(support), size=size)],
        population=lambda w: float(loss(np.asarray(w), support).mean()),
        optimum=(support[0].copy(), 0.0) if len(support) == 1 else None,
        name="point_distance",
    )


def _coordinate_median(d=10, p=0.75, **_):
    if p == 0.5:
        w1 = 0.5
    else:
        w1 = 1.0 if p > 0.5 else 0.0
    w_star = np.zeros(d)
    w_star[0] = w1

    def subgradient(w, z):
        g = np.zeros(d)
        g[0] = np.sign(w[0] - z)
        return g

    return ScoInstance(
        d=d,
        loss=lambda w, zs: np.abs(w[0] - np.asarray(zs, dtype=float)),
        subgradient=subgradient,
        bound=1.0 + math.sqrt(2.0),
        sampler=lambda rng, size: (rng.random(size) < p).astype(float),
        population=lambda w: p * abs(w[0] - 1.0) + (1 - p) * abs(w[0]),
        optimum=(w_star, min(p, 1 - p)),
        name="coordinate_median",
    )


SCO_LIBRARY = {
    "linear": _linear,
    "point_distance": _point_distance,
    "coordinate_median": _coordinate_median,
}


def sco_library(name: str, **kwargs) -> ScoInstance:
    """Named test problem; keyword arguments (``d``, ``p``, ``support``) override defaults."""
    try:
        factory = SCO_LIBRARY[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(SCO_LIBRARY)}") from None
    return factory(**kwargs)


def spot_check_bound(sco: ScoInstance, rng: np.random.Generator, points: int = 200, samples: int = 200) -> float:
    """Largest ``|f(w, z)|`` seen for random ``w`` in the domain ball; should not exceed ``sco.bound``."""
    zs = sco.sampler(rng, samples)
    worst = 0.0
    for _ in range(points):
        w = rng.standard_normal(sco.d)
        w *= sco.domain_radius * rng.random() ** (1 / sco.d) / np.linalg.norm(w)
        worst = max(worst, float(np.abs(sco.loss(w, zs)).max()))
    return worst
