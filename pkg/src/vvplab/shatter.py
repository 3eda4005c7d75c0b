"""Hard vector-valued prediction instance that shatters ``B * J`` examples with margin eps.

Layout (0-based). Predictions live in R^k with ``k = d1 + d2``: the top ``d1``
coordinates carry the near-orthogonal set ``U`` and the bottom ``d2`` carry
``Uhat``. Example ``(i, j)`` (``i < B``, ``j < J``) has flat index
``t = B*j + i`` and input ``(e_t + e_{B*J + j}) / sqrt(2)``. The reference
matrix has column ``t`` equal to ``eps * [u_t; 0]`` for ``t < B*J``. A labeling
``y`` in {0,1}^(B*J) is cut into ``J`` blocks of length ``B``; block ``j`` is
read as a big-endian integer code ``z`` and selects ``uhat_z``.

The loss is::

    l(y) = 2*sqrt(8) * max(3c, max_{z, r: z(r)=1, p} [max(c, <[0; uhat_z], y>)
                                                   + max(c, <[u_{B*p + r}; 0], y>)]) - 7*eps

with ``c = eps / sqrt(8)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DimensionError, StructuredMatrix, VvpInstance, frobenius_distance
from .signsets import SignVectorSet, build_sign_set

SQRT8 = math.sqrt(8.0)
INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class ShatterParams:
    d1: int
    d2: int
    B: int
    J: int
    eps: float
    tau: float = 0.5

    def __post_init__(self):
        if min(self.d1, self.d2, self.B, self.J) < 1:
            raise ValueError("dimensions and block sizes must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.eps * math.sqrt(self.J) > 1.0 + 1e-12:
            raise ValueError(f"eps * sqrt(J) = {self.eps * math.sqrt(self.J):.6g} exceeds 1")

    @property
    def k(self):
        return self.d1 + self.d2

    @property
    def n(self):
        return self.B * self.J

    @property
    def m(self):
        return self.B * self.J + self.J

    @property
    def n_codes(self):
        return 2 ** self.B

    def to_json(self):
        return {"d1": self.d1, "d2": self.d2, "B": self.B, "J": self.J, "eps": self.eps, "tau": self.tau}


def code_bits(code: int, B: int) -> np.ndarray:
    """Big-endian bits of ``code``: entry 0 is the most significant."""
    return np.array([(code >> (B - 1 - r)) & 1 for r in range(B)], dtype=np.uint8)


def block_codes(y, B: int, J: int) -> np.ndarray:
    """Block codes for one labeling (shape ``(n,)``) or a batch (shape ``(N, n)``)."""
    y = np.asarray(y)
    if y.shape[-1] != B * J:
        raise DimensionError(f"labeling length {y.shape[-1]} != {B * J}")
    weights = 1 << np.arange(B - 1, -1, -1, dtype=np.int64)
    return (y.reshape(*y.shape[:-1], J, B).astype(np.int64) * weights).sum(axis=-1)


class ShatterInstance:
    """Built instance: the two vector sets, the VVP problem and cached lookup tables."""

    def __init__(self, params: ShatterParams, U: SignVectorSet, Uhat: SignVectorSet):
        p = params
        if U.d != p.d1 or Uhat.d != p.d2:
            raise DimensionError("sign-set dimensions do not match d1/d2")
        if len(U) < p.n or len(Uhat) < p.n_codes:
            raise DimensionError(f"need |U| >= {p.n} and |Uhat| >= {p.n_codes}")
        self.params = p
        self.U = U
        self.Uhat = Uhat
        self.eps = p.eps
        self.clamp = p.eps / SQRT8
        self._u = np.ascontiguousarray(U.vectors[:p.n])
        self._uhat = np.ascontiguousarray(Uhat.vectors[:p.n_codes])
        # mask[r, z] is True when bit r of code z is set
        self._mask = np.array([code_bits(z, p.B) for z in range(p.n_codes)], dtype=bool).T

        self.W0 = StructuredMatrix(p.k, p.m, {t: p.eps * self.top(t) for t in range(p.n)})
        self.examples = [{p.B * j + i: INV_SQRT2, p.n + j: INV_SQRT2}
                         for j in range(p.J) for i in range(p.B)]
        self.vvp = VvpInstance(
            k=p.k, m=p.m, W0=self.W0,
            loss=lambda y: eval_loss(self, y),
            subgradient=lambda y: loss_subgradient(self, y),
            inputs=self.examples,
            lipschitz=2 * SQRT8 * math.sqrt(2.0),
            input_norm_bound=1.0,
            loss_batch=lambda Y: eval_loss_batch(self, Y),
        )

    def top(self, t: int) -> np.ndarray:
        """``u_t`` padded into the top block of R^k."""
        out = np.zeros(self.params.k)
        out[:self.params.d1] = self._u[t]
        return out

    def bottom(self, z: int) -> np.ndarray:
        """``uhat_z`` padded into the bottom block of R^k."""
        out = np.zeros(self.params.k)
        out[self.params.d1:] = self._uhat[z]
        return out

    def example_index(self, i: int, j: int) -> int:
        return self.params.B * j + i

    def to_json(self):
        return {
            "params": self.params.to_json(),
            "U": self.U.to_json(),
            "Uhat": self.Uhat.to_json(),
            "W0": self.W0.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        params = ShatterParams(**obj["params"])
        inst = cls(params, SignVectorSet.from_json(obj["U"]), SignVectorSet.from_json(obj["Uhat"]))
        if "W0" in obj:
            stored = StructuredMatrix.from_json(obj["W0"])
            if frobenius_distance(stored, inst.W0) > 1e-9:
                raise ValueError("stored reference matrix disagrees with the sign sets")
        return inst


def build_instance(p: ShatterParams, seed: int = 0, max_restarts: int = 10) -> ShatterInstance:
    U = build_sign_set(p.d1, p.n, p.tau, max_restarts=max_restarts, seed=seed)
    Uhat = build_sign_set(p.d2, p.n_codes, p.tau, max_restarts=max_restarts, seed=seed + 1)
    return ShatterInstance(p, U, Uhat)


def _parts(inst: ShatterInstance, Y: np.ndarray):
    """Per-r clamped terms: first term maximized over codes, second over blocks."""
    p = inst.params
    c = inst.clamp
    ph = Y[:, p.d1:] @ inst._uhat.T          # (N, 2^B)
    pt = Y[:, :p.d1] @ inst._u.T             # (N, n)
    N = Y.shape[0]
    first = np.empty((N, p.B))
    for r in range(p.B):
        first[:, r] = ph[:, inst._mask[r]].max(axis=1)
    second = pt.reshape(N, p.J, p.B).max(axis=1)
    return np.maximum(first, c), np.maximum(second, c), ph, pt


def eval_loss_batch(inst: ShatterInstance, Y) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[1] != inst.params.k:
        raise DimensionError(f"prediction length {Y.shape[1]} != k = {inst.params.k}")
    first, second, _, _ = _parts(inst, Y)
    best = np.maximum(3 * inst.clamp, (first + second).max(axis=1))
    return 2 * SQRT8 * best - 7 * inst.eps


def eval_loss(inst: ShatterInstance, yhat) -> float:
    return float(eval_loss_batch(inst, np.asarray(yhat, dtype=float)[None, :])[0])


def loss_subgradient(inst: ShatterInstance, yhat) -> np.ndarray:
    """A subgradient of the loss; ties go to the first maximizer in (z, r, p) order."""
    p = inst.params
    c = inst.clamp
    y = np.asarray(yhat, dtype=float)
    if y.shape != (p.k,):
        raise DimensionError(f"prediction length {y.shape} != ({p.k},)")
    first, second, ph, pt = _parts(inst, y[None, :])
    branch = (first + second)[0]
    top = branch.max()
    grad = np.zeros(p.k)
    if 3 * c >= top:
        return grad

    clamped_ph = np.maximum(ph[0], c)
    best_z, best_r = None, None
    for r in np.flatnonzero(branch == top):
        zs = np.flatnonzero(inst._mask[r])
        z = int(zs[np.argmax(clamped_ph[zs])])
        if best_z is None or z < best_z:
            best_z, best_r = z, int(r)
    r = best_r
    blocks = pt[0].reshape(p.J, p.B)[:, r]
    t = p.B * int(np.argmax(np.maximum(blocks, c))) + r

    if ph[0, best_z] > c:
        grad[p.d1:] += inst._uhat[best_z]
    if pt[0, t] > c:
        grad[:p.d1] += inst._u[t]
    return 2 * SQRT8 * grad


def labeling_matrix(inst: ShatterInstance, y) -> StructuredMatrix:
    """``W0 + W_y``: block ``j`` of ``y`` picks column ``n + j`` = ``eps * [0; uhat_code]``."""
    p = inst.params
    codes = block_codes(np.asarray(y), p.B, p.J)
    return inst.W0.with_columns({p.n + j: p.eps * inst.bottom(int(codes[j])) for j in range(p.J)})


def example_loss_table(inst: ShatterInstance) -> np.ndarray:
    """``T[j, z, i]``: loss on example ``(i, j)`` when block ``j`` carries code ``z``.

    Each example only sees its own block's column, so this table determines the
    loss of every labeling matrix on every example.
    """
    p = inst.params
    w0 = np.array([inst.W0.column(t) for t in range(p.n)]).reshape(p.J, p.B, p.k)
    tail = p.eps * np.array([inst.bottom(z) for z in range(p.n_codes)])
    Y = (w0[:, None, :, :] + tail[None, :, None, :]) * INV_SQRT2
    return eval_loss_batch(inst, Y.reshape(-1, p.k)).reshape(p.J, p.n_codes, p.B)


@dataclass
class ShatterReport:
    passed: bool
    worst_violation: float
    labelings_checked: int
    worst_labeling: str
    frobenius_min: float
    frobenius_max: float

    def to_json(self):
        return {
            "pass": self.passed,
            "worst_violation": self.worst_violation,
            "labelings_checked": self.labelings_checked,
            "worst_labeling": self.worst_labeling,
            "frobenius_min": self.frobenius_min,
            "frobenius_max": self.frobenius_max,
        }


def _all_labelings(n: int, chunk: int):
    total = 1 << n
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield ((ids[:, None] >> shifts) & 1).astype(np.uint8)


def verify_shattering(inst: ShatterInstance, labelings="all", tol: float = 1e-9,
                      chunk_examples: int = 1 << 16) -> ShatterReport:
    """Evaluate the loss of ``W0 + W_y`` on every example for each labeling.

    ``labelings`` is ``"all"`` or an array/list of 0/1 labelings. The report
    carries the worst ``|loss - eps*(2y - 1)|`` and the range of
    ``||W_y'- W0||_F`` across the checked labelings.
    """
    p = inst.params
    n, k = p.n, p.k
    w0_cols = np.array([inst.W0.column(t) for t in range(n)])          # (n, k)
    tail = p.eps * np.array([inst.bottom(z) for z in range(p.n_codes)])  # (2^B, k)
    tail_sq = (tail ** 2).sum(axis=1)
    block_of = np.repeat(np.arange(p.J), p.B)

    chunk = max(1, chunk_examples // n)
    if isinstance(labelings, str):
        if labelings != "all":
            raise ValueError("labelings must be 'all' or an explicit list")
        batches = _all_labelings(n, chunk)
    else:
        arr = np.atleast_2d(np.asarray(labelings, dtype=np.uint8))
        if arr.shape[1] != n:
            raise DimensionError(f"labelings must have length {n}")
        batches = (arr[s:s + chunk] for s in range(0, arr.shape[0], chunk))

    worst, worst_y, count = 0.0, None, 0
    fmin, fmax = math.inf, -math.inf
    for ys in batches:
        codes = block_codes(ys, p.B, p.J)                     # (N, J)
        preds = (w0_cols[None, :, :] + tail[codes[:, block_of]]) * INV_SQRT2
        losses = eval_loss_batch(inst, preds.reshape(-1, k)).reshape(-1, n)
        dev = np.abs(losses - p.eps * (2.0 * ys - 1.0)).max(axis=1)
        idx = int(np.argmax(dev))
        if worst_y is None or dev[idx] > worst:
            worst, worst_y = float(dev[idx]), ys[idx]
        frob = np.sqrt(tail_sq[codes].sum(axis=1))
        fmin, fmax = min(fmin, float(frob.min())), max(fmax, float(frob.max()))
        count += ys.shape[0]
    return ShatterReport(
        passed=worst <= tol,
        worst_violation=worst,
        labelings_checked=count,
        worst_labeling="".join(str(int(b)) for b in worst_y),
        frobenius_min=fmin,
        frobenius_max=fmax,
    )


def random_labelings(n: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, n]))
    return rng.integers(0, 2, size=(count, n), dtype=np.uint8)
