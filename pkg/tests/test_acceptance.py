"""Acceptance criteria 1-11. Each test prints one PASS/FAIL line; tolerances are pinned here."""

import itertools
import math
import time

import numpy as np
import pytest

from vvplab.adversary import adversarial_erm, draw_sample, gap_experiment, reference_matrix, scalar_instance
from vvplab.bounds import (measured_lipschitz, rademacher_estimate, sup_generalization_gap,
                           uniform_convergence_bound)
from vvplab.core import matvec, population_loss
from vvplab.learners import SgdConfig, sgd_learner, sgd_train
from vvplab.reduction import ReductionConfig, convert, mean_excess, run_reduction, sco_library
from vvplab.shatter import (ShatterParams, build_instance, eval_loss_batch, labeling_matrix, loss_subgradient,
                            verify_shattering)
from vvplab.signsets import CircleEmbedding, build_sign_set

CRIT1 = ShatterParams(d1=16, d2=16, B=4, J=4, eps=0.5, tau=0.5)


@pytest.fixture(scope="module")
def crit1_inst():
    return build_instance(CRIT1, seed=0)


@pytest.fixture(scope="module")
def crit1_report(crit1_inst):
    t0 = time.perf_counter()
    report = verify_shattering(crit1_inst, "all")
    return report, time.perf_counter() - t0


def test_c01_shattering_exactness(crit1_report, acceptance):
    report, secs = crit1_report
    ok = (report.passed and report.labelings_checked == 2 ** 16
          and report.worst_violation <= 1e-9 and secs <= 60)
    acceptance(1, ok, f"2^16 labelings x 16 examples, max deviation {report.worst_violation:.2e} "
                      f"(<= 1e-9), {secs:.2f} s (<= 60 s)")
    assert ok


def test_c02_feasibility(crit1_report, acceptance):
    report, _ = crit1_report
    dev = max(abs(report.frobenius_min - 1.0), abs(report.frobenius_max - 1.0))
    ok = dev <= 1e-9
    acceptance(2, ok, f"||W'_y - W0||_F in [{report.frobenius_min:.12f}, {report.frobenius_max:.12f}], "
                      f"|dev| {dev:.2e} (<= 1e-9)")
    assert ok


def test_c03_erm_gap(crit1_inst, acceptance):
    eps = crit1_inst.eps
    t0 = time.perf_counter()
    rows = gap_experiment(crit1_inst, 8, 1000, seed=0)
    secs = time.perf_counter() - t0
    exact = all(r["empirical_loss"] == -eps for r in rows)
    mean = float(np.mean([r["excess"] for r in rows]))
    ok = exact and 1.0 * eps <= mean <= 1.4 * eps and secs <= 30
    acceptance(3, ok, f"empirical loss == -eps in all 1000 trials: {exact}; mean excess {mean / eps:.4f} eps "
                      f"in [1.0, 1.4] (closed form {2 * (15 / 16) ** 8:.4f}); {secs:.2f} s (<= 30 s)")
    assert ok


def test_c04_sgd_vs_erm(acceptance):
    inst = build_instance(ShatterParams(d1=128, d2=128, B=8, J=16, eps=0.25), seed=0)
    n = inst.params.n
    assert n == 128
    ref = population_loss(inst.vvp, reference_matrix(inst))
    sgd_ex, erm_ex = [], []
    for trial in range(100):
        sample = draw_sample(n, n, seed=0, trial=trial)          # same sample for both learners
        erm_ex.append(adversarial_erm(inst, sample).population_excess)
        W = sgd_train(inst.vvp, sample, SgdConfig(), seed=trial)
        sgd_ex.append(population_loss(inst.vvp, W) - ref)
    s, e = float(np.mean(sgd_ex)), float(np.mean(erm_ex))
    ok = s < e and s < inst.eps
    acceptance(4, ok, f"mean SGD excess {s:.3e} < mean adversarial ERM excess {e:.4f} and < eps = {inst.eps}")
    assert ok


def test_c05_sign_sets(acceptance):
    t0 = time.perf_counter()
    s = build_sign_set(120, 1024, 0.5, max_restarts=10, seed=0)
    secs = time.perf_counter() - t0
    gram = s.vectors @ s.vectors.T
    worst = float(gram[~np.eye(1024, dtype=bool)].max())
    ok = len(s) == 1024 and worst <= 0.5 + 1e-12 and s.certificate <= 0.5 and secs <= 5
    acceptance(5, ok, f"d=120, 1024 vectors, max pairwise inner {worst:.4f} (<= 0.5), "
                      f"all {1024 * 1023 // 2} pairs checked, {secs:.2f} s (<= 5 s)")
    assert ok


def test_c06_circle_embedding(acceptance):
    details, ok = [], True
    for a in (2, 10, 100):
        emb = CircleEmbedding(a)
        pts = emb.points()
        delta = 1 - math.cos(math.pi / (2 * a))
        norm_dev = float(np.abs(np.linalg.norm(pts, axis=1) - 1).max())
        gram = pts @ pts.T
        top = float(gram[~np.eye(a, dtype=bool)].max())
        cell = norm_dev <= 1e-12 and abs(top - (1 - delta)) <= 1e-12 and abs(emb.delta - delta) <= 1e-15
        ok &= cell
        details.append(f"a={a}: |norm-1| {norm_dev:.1e}, |max inner-(1-delta)| {abs(top - (1 - delta)):.1e}")
    acceptance(6, ok, "; ".join(details) + " (<= 1e-12)")
    assert ok


def test_c07_decode_identity(acceptance):
    sco = sco_library("linear", d=10)
    n = 50
    S = sco.sampler(np.random.default_rng(0), 2 * n)
    prob = convert(sco, S, ReductionConfig(n=n))
    w_star, _ = sco.optimum
    W = prob.proof_matrix(w_star)
    vals = np.array([prob.loss(matvec(W, x)) for x in prob.vvp.inputs])
    dev = float(np.abs(vals - (prob.c + S @ w_star)).max())
    margin = prob.decode_margin(W)
    need = prob.c * prob.delta - 2 * sco.bound - 1e-9
    ok = len(vals) == 100 and dev <= 1e-9 and margin >= need and need >= 2 * sco.bound - 2e-9
    acceptance(7, ok, f"100 inputs, max |l(W x_i) - c - f(w*, z_i)| {dev:.2e} (<= 1e-9); "
                      f"margin {margin:.4f} >= c*delta - 2b = {need + 1e-9:.4f}")
    assert ok


def test_c08_reduction_end_to_end(acceptance):
    sco = sco_library("linear", d=10)
    assert np.array_equal(sco.optimum[0], -np.eye(10)[0]) and sco.optimum[1] == -0.5
    learner = sgd_learner(SgdConfig(), lipschitz=2.0, input_norm=math.sqrt(2.0))
    t0 = time.perf_counter()
    rows = run_reduction(sco, learner, 400, range(20))
    secs = time.perf_counter() - t0
    mean = mean_excess(rows)
    bound = 2 * learner.rate(400) + 10 / math.sqrt(400)
    ok = mean <= bound and secs <= 120
    acceptance(8, ok, f"n=400, 20 seeds: mean excess {mean:.4f} <= 2 eps(n) + 10/sqrt(n) = {bound:.4f}; "
                      f"{secs:.2f} s (<= 120 s)")
    assert ok


def test_c09_upper_bound_consistency(crit1_inst, acceptance):
    sample = np.arange(16)
    G = measured_lipschitz(crit1_inst)
    est = rademacher_estimate(crit1_inst, sample, trials=10_000, seed=0, lipschitz=G)
    bound = uniform_convergence_bound(G, crit1_inst.params.k, 16)
    rad_ok = est.value <= bound + 3 * est.standard_error

    # closed-form sup gap against enumeration of all 2^12 labelings
    small = build_instance(ShatterParams(d1=12, d2=8, B=3, J=4, eps=0.5), seed=2)
    losses = [small.vvp.losses(labeling_matrix(small, np.array(bits)))
              for bits in itertools.product([0, 1], repeat=12)]
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        s = rng.integers(0, 12, size=rng.integers(1, 13))
        brute = max(float(L.mean() - L[s].mean()) for L in losses)
        worst = max(worst, abs(brute - sup_generalization_gap(small, s)))
    gap_ok = worst <= 1e-12
    ok = rad_ok and gap_ok
    acceptance(9, ok, f"Rademacher {est.value:.4f} +- {est.standard_error:.1e} <= "
                      f"2 sqrt2 G sqrt(k/n) = {bound:.3f} (G measured {G:.3f}); "
                      f"sup gap vs enumeration (n=12, 50 samples) max diff {worst:.1e} (<= 1e-12)")
    assert ok


def _shatter_pieces_gap(inst, Y):
    """Gap between the two largest distinct linear pieces at each row of Y."""
    p = inst.params
    c = inst.eps / math.sqrt(8)
    ph = Y @ np.stack([inst.bottom(z) for z in range(2 ** p.B)]).T
    pt = Y @ np.stack([inst.top(t) for t in range(p.n)]).T
    gaps = []
    for row in range(Y.shape[0]):
        vals = {3 * c}
        for t in range(p.n):
            r = t % p.B
            vals.add(c + pt[row, t])
            for z in range(2 ** p.B):
                if (z >> (p.B - 1 - r)) & 1:
                    vals.add(ph[row, z] + pt[row, t])
                    vals.add(ph[row, z] + c)
        top = sorted(vals, reverse=True)
        gaps.append(top[0] - top[1])
    return np.array(gaps)


def _fd_batch(fn_batch, y, h):
    k = y.size
    E = np.eye(k) * h
    vals = fn_batch(np.vstack([y + E, y - E]))
    return (vals[:k] - vals[k:]) / (2 * h)


def test_c10_subgradient_validity(crit1_inst, acceptance):
    h, tol, reject = 1e-6, 1e-5, 1e-4
    rng = np.random.default_rng(10)
    lines, ok = [], True

    shatter_signed = build_instance(ShatterParams(d1=12, d2=12, B=4, J=4, eps=0.5), seed=5, max_restarts=500)
    for label, inst in (("shatter/basis", crit1_inst), ("shatter/sign", shatter_signed)):
        k = inst.params.k
        worst, kept, rejected = 0.0, 0, 0
        while kept < 1000:
            Y = rng.standard_normal((64, k)) * rng.choice([0.2, 1.0, 3.0], size=(64, 1))
            gaps = _shatter_pieces_gap(inst, Y)
            for y, gap in zip(Y, gaps):
                if kept == 1000:
                    break
                if gap < reject:
                    rejected += 1
                    continue
                fd = _fd_batch(lambda M: eval_loss_batch(inst, M), y, h)
                worst = max(worst, float(np.abs(fd - loss_subgradient(inst, y)).max()))
                kept += 1
        a = rng.standard_normal((10_000, k)) * 2
        b = rng.standard_normal((10_000, k)) * 2
        mid = eval_loss_batch(inst, (a + b) / 2)
        conv = float((mid - (eval_loss_batch(inst, a) + eval_loss_batch(inst, b)) / 2).max())
        cell = worst <= tol and conv <= 1e-9
        ok &= cell
        lines.append(f"{label}: fd err {worst:.1e} ({rejected} ties rejected), midpoint excess {conv:.1e}")

    for name in ("linear", "point_distance", "coordinate_median"):
        sco = sco_library(name, d=6)
        S = sco.sampler(np.random.default_rng(1), 40)
        prob = convert(sco, S, ReductionConfig(n=20))
        k = prob.vvp.k

        def batch(M):
            return np.array([prob.loss(m) for m in M])

        def smooth(y):
            br = np.sort(prob.branches(y))
            if br[-1] - br[-2] < reject:
                return False
            j = int(np.argmax(prob.branches(y)))
            w, z = y[2:], S[j]
            if name == "point_distance":
                return np.linalg.norm(w - z) >= reject
            if name == "coordinate_median":
                return abs(w[0] - z) >= reject
            return True

        worst, kept, rejected = 0.0, 0, 0
        while kept < 1000:
            y = rng.standard_normal(k) * rng.choice([0.3, 1.0, 3.0])
            if not smooth(y):
                rejected += 1
                continue
            fd = _fd_batch(batch, y, h)
            worst = max(worst, float(np.abs(fd - prob.subgradient(y)).max()))
            kept += 1
        a = rng.standard_normal((10_000, k)) * 2
        b = rng.standard_normal((10_000, k)) * 2
        conv = float((batch((a + b) / 2) - (batch(a) + batch(b)) / 2).max())
        cell = worst <= tol and conv <= 1e-9
        ok &= cell
        lines.append(f"reduction/{name}: fd err {worst:.1e} ({rejected} rejected), midpoint excess {conv:.1e}")

    acceptance(10, ok, "1000 points each, fd tol 1e-5, convexity tol 1e-9 on 10^4 segments; " + "; ".join(lines))
    assert ok


def test_c11_scalar_construction(acceptance):
    inst = scalar_instance(0.25)
    dev, lo, hi = inst.verify()
    ok = inst.m == 16 and dev == 0.0 and abs(lo - 1) <= 1e-9 and abs(hi - 1) <= 1e-9
    acceptance(11, ok, f"m={inst.m}, 2^16 labelings, margin deviation {dev:.1e} (exact), "
                       f"||W_y||_F in [{lo:.12f}, {hi:.12f}] (1 +- 1e-9)")
    assert ok
