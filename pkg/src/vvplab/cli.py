"""Command-line harness: ``vvplab <subcommand> [flags]``.

Every command writes its output atomically and drops ``<out>.manifest.json``
next to it. Flags can also come from a JSON ``--config`` file; explicit flags
win over the file.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .adversary import GAP_HEADER, draw_sample, gap_experiment, reference_matrix
from .artifacts import write_csv, write_json, write_manifest
from .bounds import rademacher_estimate, sup_generalization_gap
from .core import ConstructionError, empirical_loss, population_loss
from .learners import SgdConfig, sgd_learner, sgd_train
from .reduction import REDUCTION_HEADER, SCO_LIBRARY, mean_excess, run_reduction, sco_library
from .shatter import (ShatterInstance, ShatterParams, build_instance, random_labelings,
                      verify_shattering)
from .signsets import build_sign_set

SWEEP_KEYS = {"n": int, "eps": str, "J": int, "B": int, "d1": int, "d2": int, "tau": float}


class UsageError(Exception):
    pass


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _default_jobs():
    try:
        return max(1, int(os.environ.get("VVPLAB_JOBS", "1")))
    except ValueError:
        return 1


def _eps(text):
    return text if text == "auto" else float(text)


def _add_instance_flags(p, with_file=True):
    if with_file:
        p.add_argument("--instance", help="shatter instance JSON (overrides construction flags)")
    p.add_argument("--d1", type=_positive_int, default=16)
    p.add_argument("--d2", type=_positive_int, default=16)
    p.add_argument("--B", type=_positive_int, default=4)
    p.add_argument("--J", type=_positive_int, default=4)
    p.add_argument("--eps", type=_eps, default=0.5, help="margin, or 'auto' for 1/sqrt(J)")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--max-restarts", type=_positive_int, default=10)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--config", help="JSON file of flag values")
    common.add_argument("--jobs", type=_positive_int, default=_default_jobs())

    parser = argparse.ArgumentParser(prog="vvplab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("signset", parents=[common], help="build a certified near-orthogonal set")
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--max-restarts", type=_positive_int, default=10)
    p.add_argument("--out", default="signset.json")
    subs["signset"] = p

    p = sub.add_parser("shatter-verify", parents=[common], help="check the margin on every labeling")
    _add_instance_flags(p, with_file=False)
    p.add_argument("--labelings", default="all", help="'all' or 'random:<count>'")
    p.add_argument("--instance-out", help="also save the built instance here")
    p.add_argument("--out", default="report.json")
    subs["shatter-verify"] = p

    p = sub.add_parser("erm-gap", parents=[common], help="excess risk of the adversarial ERM")
    _add_instance_flags(p)
    p.add_argument("--sample-size", type=_positive_int, required=True)
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--out", default="gaps.csv")
    subs["erm-gap"] = p

    p = sub.add_parser("sgd", parents=[common], help="train projected SGD on a sampled training set")
    _add_instance_flags(p)
    p.add_argument("--n", type=_positive_int, help="training-set size (default: the full support once)")
    p.add_argument("--steps", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--out", default="model.json")
    subs["sgd"] = p

    p = sub.add_parser("reduce", parents=[common], help="solve a convex problem through the prediction embedding")
    p.add_argument("--problem", choices=sorted(SCO_LIBRARY), default="linear")
    p.add_argument("--d", type=_positive_int, default=10)
    p.add_argument("--p", type=float, default=0.75)
    p.add_argument("--n", type=_positive_int, default=400)
    p.add_argument("--seeds", type=_positive_int, default=20)
    p.add_argument("--learner", choices=["sgd"], default="sgd")
    p.add_argument("--c", type=float, help="scale of the reference matrix (default 4b/delta)")
    p.add_argument("--mc-samples", type=_positive_int, default=100_000)
    p.add_argument("--out", default="reduction.csv")
    subs["reduce"] = p

    p = sub.add_parser("rademacher", parents=[common], help="Monte Carlo Rademacher complexity of the labeling family")
    _add_instance_flags(p)
    p.add_argument("--n", type=_positive_int, help="sample size drawn with replacement (default: the full support once)")
    p.add_argument("--trials", type=_positive_int, default=10_000)
    p.add_argument("--out", default="rad.json")
    subs["rademacher"] = p

    p = sub.add_parser("sweep", parents=[common], help="erm-gap over a grid of one or two parameters")
    _add_instance_flags(p, with_file=False)
    p.add_argument("--vary", action="append", default=[], help="KEY=v1,v2,...; KEY in " + ",".join(SWEEP_KEYS))
    p.add_argument("--sample-size", type=_positive_int, default=8)
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--out", default="sweep.csv")
    subs["sweep"] = p

    return parser, subs


# helpers ---------------------------------------------------------------------

def _params_from(values) -> ShatterParams:
    eps = values["eps"]
    if eps == "auto":
        eps = 1.0 / math.sqrt(values["J"])
    return ShatterParams(d1=values["d1"], d2=values["d2"], B=values["B"], J=values["J"],
                         eps=float(eps), tau=values["tau"])


def _instance(args) -> ShatterInstance:
    path = getattr(args, "instance", None)
    if path:
        with open(path) as fh:
            return ShatterInstance.from_json(json.load(fh))
    try:
        params = _params_from(vars(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return build_instance(params, seed=args.seed, max_restarts=args.max_restarts)


def _pmap(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# commands --------------------------------------------------------------------

def cmd_signset(args):
    s = build_sign_set(args.d, args.count, args.tau, args.max_restarts, args.seed)
    write_json(args.out, s.to_json())
    return {"certificate": s.certificate, "count": len(s)}


def cmd_shatter_verify(args):
    inst = _instance(args)
    if args.labelings == "all":
        if inst.params.n > 26:
            raise UsageError(f"2^{inst.params.n} labelings is too many; use random:<count>")
        labelings = "all"
    elif args.labelings.startswith("random:"):
        try:
            count = int(args.labelings.split(":", 1)[1])
        except ValueError:
            raise UsageError("--labelings random:<count> needs an integer count") from None
        labelings = random_labelings(inst.params.n, count, args.seed)
    else:
        raise UsageError("--labelings must be 'all' or 'random:<count>'")
    report = verify_shattering(inst, labelings)
    out = report.to_json()
    out["params"] = inst.params.to_json()
    out["k"], out["m"], out["n"] = inst.params.k, inst.params.m, inst.params.n
    write_json(args.out, out)
    if args.instance_out:
        write_json(args.instance_out, inst.to_json())
    return {"pass": report.passed, "worst_violation": report.worst_violation}


def cmd_erm_gap(args):
    inst = _instance(args)
    if args.sample_size > inst.params.n:
        raise UsageError(f"--sample-size {args.sample_size} exceeds the {inst.params.n} examples")
    rows = gap_experiment(inst, args.sample_size, args.trials, args.seed)
    write_csv(args.out, GAP_HEADER, rows)
    return {"mean_excess": float(np.mean([r["excess"] for r in rows])), "eps": inst.eps}


def cmd_sgd(args):
    inst = _instance(args)
    n_sup = inst.params.n
    sample = np.arange(n_sup) if args.n is None else draw_sample(n_sup, args.n, args.seed)
    try:
        cfg = SgdConfig(steps=args.steps, eta=args.eta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    W = sgd_train(inst.vvp, sample, cfg, args.seed)
    write_json(args.out, W.to_json())
    ref = population_loss(inst.vvp, reference_matrix(inst))
    return {
        "population_excess": population_loss(inst.vvp, W) - ref,
        "empirical_loss": empirical_loss(inst.vvp, W, sample),
        "eps": inst.eps,
    }


def cmd_reduce(args):
    try:
        sco = sco_library(args.problem, d=args.d, p=args.p)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    learner = sgd_learner(SgdConfig(), lipschitz=2.0, input_norm=math.sqrt(2.0))
    seeds = [args.seed + s for s in range(args.seeds)]
    chunks = _pmap(lambda s: run_reduction(sco, learner, args.n, [s], c=args.c, mc_samples=args.mc_samples),
                   seeds, args.jobs)
    rows = [r for chunk in chunks for r in chunk]
    write_csv(args.out, REDUCTION_HEADER, [r.csv_row() for r in rows])
    return {
        "mean_excess": mean_excess(rows),
        "bound": rows[0].bound,
        "terms": rows[0].terms,
        "mean_vvp_excess_vs_proof": float(np.mean([r.vvp_excess_vs_proof for r in rows])),
    }


def cmd_rademacher(args):
    inst = _instance(args)
    n_sup = inst.params.n
    sample = np.arange(n_sup) if args.n is None else draw_sample(n_sup, args.n, args.seed)
    est = rademacher_estimate(inst, sample, args.trials, args.seed)
    out = est.to_json()
    out["sup_generalization_gap"] = sup_generalization_gap(inst, sample)
    write_json(args.out, out)
    return {"value": est.value, "bound": est.bound}


def _parse_vary(specs):
    grid = {}
    for spec in specs:
        key, sep, vals = spec.partition("=")
        if not sep or key not in SWEEP_KEYS or not vals:
            raise UsageError(f"bad --vary {spec!r}; expected KEY=v1,v2 with KEY in {sorted(SWEEP_KEYS)}")
        conv = SWEEP_KEYS[key]
        try:
            grid[key] = [conv(v) for v in vals.split(",")]
        except ValueError:
            raise UsageError(f"bad value list in --vary {spec!r}") from None
    if len(grid) > 2:
        raise UsageError("at most two swept variables")
    return grid


def cmd_sweep(args):
    grid = _parse_vary(args.vary)
    keys = list(grid)
    cells = list(itertools.product(*(grid[k] for k in keys)))
    base = vars(args)

    def run_cell(indexed):
        idx, combo = indexed
        values = dict(base)
        values.update(zip(keys, combo))
        if "eps" in keys and values["eps"] != "auto":
            values["eps"] = float(values["eps"])
        size = values.pop("n", None) or args.sample_size
        seed = args.seed + idx
        prefix = [idx, *combo]
        try:
            params = _params_from(values)
            if size > params.n:
                raise ValueError(f"sample size {size} exceeds {params.n} examples")
            inst = build_instance(params, seed=seed, max_restarts=args.max_restarts)
            rows = gap_experiment(inst, size, args.trials, seed)
        except (ValueError, ConstructionError) as exc:
            return [prefix + [f"infeasible: {exc}", "", "", "", ""]]
        return [prefix + ["ok"] + [r[h] for h in GAP_HEADER] for r in rows]

    results = _pmap(run_cell, list(enumerate(cells)), args.jobs)
    header = ["cell", *keys, "status", *GAP_HEADER]
    rows = [row for cell_rows in results for row in cell_rows]
    write_csv(args.out, header, rows)
    return {"cells": len(cells), "rows": len(rows)}


COMMANDS = {
    "signset": cmd_signset,
    "shatter-verify": cmd_shatter_verify,
    "erm-gap": cmd_erm_gap,
    "sgd": cmd_sgd,
    "reduce": cmd_reduce,
    "rademacher": cmd_rademacher,
    "sweep": cmd_sweep,
}


def _parse(argv):
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config and argv and argv[0] in subs:
        with open(known.config) as fh:
            cfg = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
        sub = subs[argv[0]]
        for action in sub._actions:
            if action.dest in cfg:
                action.required = False   # a value from the file satisfies the flag
        sub.set_defaults(**cfg)
    args = parser.parse_args(argv)
    return parser, subs[args.command], args


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.time()
    try:
        parser, sub, args = _parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        results = COMMANDS[args.command](args)
    except UsageError as exc:
        sub.print_usage(sys.stderr)
        print(f"{sub.prog}: error: {exc}", file=sys.stderr)
        return 2
    except ConstructionError as exc:
        print(json.dumps({"error": "construction_failed", "message": str(exc),
                          "best_certificate": exc.best_certificate}), file=sys.stderr)
        return 1
    config = {k: v for k, v in sorted(vars(args).items())}
    write_manifest(args.out, ["vvplab", *argv], config, args.seed, started, results)
    return 0


main = dispatch
