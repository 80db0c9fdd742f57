"""Batch command line: ``python -m qscost <subcommand> ...``.

Exit status 0 on success, 2 on usage errors, 1 on runtime errors.  Every
output starts with the fully resolved configuration (``# key=value`` lines
for CSV, a ``config`` object for JSON).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import algo, expectation, harness, limit
from .cost import parse_cost
from .source import parse_source, symb_tame_params

DEFAULT_SEED = harness.DEFAULT_SEED


def _common(p: argparse.ArgumentParser, seed=True):
    if seed:
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed (default %(default)s)")
    p.add_argument("--out", default="-", help="output file, '-' for stdout")
    p.add_argument("--format", choices=["csv", "json"], default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qscost", description="QuickSelect symbol-cost toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    src = sub.add_parser("source", help="source utilities")
    ssub = src.add_subparsers(dest="action", required=True)
    ins = ssub.add_parser("inspect", help="intervals, conditionals and pi_k of a source")
    ins.add_argument("--source", default="uniform-binary")
    ins.add_argument("--prefix", default="", help="prefix as a digit string, e.g. 0110")
    ins.add_argument("--kmax", type=int, default=8)
    _common(ins, seed=False)

    sim = sub.add_parser("simulate", help="instrumented QuickVal / QuickQuant / QuickSelect runs")
    sim.add_argument("--algo", choices=["quickval", "quickquant", "qs-random"], required=True)
    sim.add_argument("--n", type=int, required=True)
    tgt = sim.add_mutually_exclusive_group()
    tgt.add_argument("--alpha", type=float)
    tgt.add_argument("--m", type=int)
    sim.add_argument("--reps", type=int, default=1)
    sim.add_argument("--source", default="uniform-binary")
    sim.add_argument("--cost", default="key")
    sim.add_argument("--threads", type=int, default=1)
    _common(sim)

    sl = sub.add_parser("sample-limit", help="draws of the limit cost S")
    sl.add_argument("--alpha", type=float, required=True)
    sl.add_argument("--cost", default="key")
    sl.add_argument("--source", default="uniform-binary")
    sl.add_argument("--reps", type=int, default=1000)
    sl.add_argument("--delta", type=float, default=1e-6)
    _common(sl)

    ex = sub.add_parser("expect", help="E S by closed form, series or integral")
    ex.add_argument("mode", nargs="?", choices=["quickrand"])
    ex.add_argument("--method", choices=["auto", "closed", "series", "integral"], default="auto")
    ex.add_argument("--cost", default="key")
    ex.add_argument("--source", default="uniform-binary")
    ex.add_argument("--alpha", type=float)
    ex.add_argument("--tol", type=float, default=None)
    ex.add_argument("--panels", type=int, default=64)
    ex.add_argument("--order", type=int, default=4)
    _common(ex, seed=False)

    cv = sub.add_parser("converge", help="coupled convergence experiment")
    cv.add_argument("--config", required=True)
    cv.add_argument("--threads", type=int, default=None)
    cv.add_argument("--out", default=None, help="output directory (overrides config)")
    cv.add_argument("-v", "--verbose", action="store_true")

    nu = sub.add_parser("nu-check", help="occupation measure of the pivot chain")
    nu.add_argument("--alpha", type=float, required=True)
    nu.add_argument("--rect", required=True, help="x1,x2,y1,y2")
    nu.add_argument("--reps", type=int, default=100_000)
    _common(nu)

    dk = sub.add_parser("dickman", help="draws from the Dickman perpetuity")
    dk.add_argument("--reps", type=int, default=1000)
    dk.add_argument("--delta", type=float, default=1e-12)
    _common(dk)
    return ap


# -- output ---------------------------------------------------------------------

def _emit(args, config: dict, header=None, rows=None, obj=None, default="csv"):
    fmt = args.format or default
    if fmt == "json":
        payload = dict(obj) if obj is not None else {"rows": [dict(zip(header, r)) for r in rows]}
        payload["config"] = config
        text = json.dumps(payload, default=_jsonable) + "\n"
    else:
        if rows is None:
            header = list(obj)
            rows = [[obj[k] for k in header]]
        text = harness._csv(config, header, rows)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("out", "verbose", "threads")}


# -- subcommands ----------------------------------------------------------------

def _cmd_source(args, ap):
    src = parse_source(args.source)
    prefix = [int(c) for c in args.prefix]
    iv = src.refine_interval(prefix)
    obj = {"source": src.describe(), "prefix": args.prefix,
           "a": iv.a, "b": iv.b, "p": iv.p, "mid": iv.mid,
           "conditional": src.conditional_distribution(prefix).tolist(),
           "pi_k": [src.pi_k(k) for k in range(args.kmax + 1)]}
    try:
        t = symb_tame_params(src)
        obj.update(eps=t.eps, c=t.c, tame_warning=t.warning)
    except ValueError as exc:
        obj.update(eps=None, c=None, tame_warning=str(exc))
    _emit(args, _config(args), obj=obj, default="json")


def _cmd_simulate(args, ap):
    if args.algo == "quickval" and args.alpha is None:
        ap.error("simulate --algo quickval requires --alpha")
    if args.algo != "quickval" and args.alpha is None and args.m is None:
        ap.error(f"simulate --algo {args.algo} requires --m or --alpha")
    if args.n < 1 or args.reps < 1:
        ap.error("--n and --reps must be positive")
    src = parse_source(args.source)
    cost = parse_cost(args.cost, src.r)
    if args.alpha is not None and not 0 <= args.alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    m = args.m if args.m is not None else algo.target_rank(args.alpha, args.n)
    target = args.alpha if args.algo == "quickval" else m

    def one(rep):
        seeds = algo.SeedArray.generate(args.n, args.seed, rep)
        if args.algo == "quickval":
            rec = algo.run_quickval(src, cost, seeds, args.alpha)
        elif args.algo == "quickquant":
            rec = algo.run_quickquant(src, cost, seeds, m)
        else:
            rng = np.random.default_rng(np.random.SeedSequence([args.seed, rep, 4]))
            rec = algo.run_quickselect_random_pivot(src, cost, seeds, m, rng)
        return (rep, args.n, target, args.algo, cost.name, rec.total, rec.pivots, int(rec.truncated))

    rows = harness._map(one, range(args.reps), args.threads)
    header = ["rep", "n", "alpha_or_m", "algo", "cost_model", "total_cost", "pivots", "truncation_flag"]
    _emit(args, _config(args), header, rows)


def _cmd_sample_limit(args, ap):
    src = parse_source(args.source)
    cost = parse_cost(args.cost, src.r)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
    policy = limit.TruncationPolicy.for_cost(cost, src, args.delta)
    vals, bounds, depth = limit.sample_S_many(rng, src, cost, args.alpha, policy, args.reps)
    rows = [(i, float(v), float(b), int(d)) for i, (v, b, d) in enumerate(zip(vals, bounds, depth))]
    _emit(args, _config(args), ["rep", "value", "tail_bound", "depth"], rows)


def _cmd_expect(args, ap):
    src = parse_source(args.source)
    cost = parse_cost(args.cost, src.r)
    if args.mode == "quickrand":
        tol = args.tol if args.tol is not None else 1e-3
        res = expectation.expected_quickrand(src, cost, args.panels, args.order, args.method, tol)
    else:
        if args.alpha is None:
            ap.error("expect requires --alpha")
        tol = args.tol if args.tol is not None else 1e-6
        res = expectation.expected_S(src, cost, args.alpha, args.method, tol)
    _emit(args, _config(args), obj=res.as_dict(), default="json")


def _cmd_converge(args, ap):
    cfg = harness.ExperimentConfig.from_file(args.config)
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.out = args.out
    rep = harness.convergence_experiment(cfg)
    paths = rep.write()
    if args.verbose:
        for p in paths:
            print(p, file=sys.stderr)


def _cmd_nu(args, ap):
    try:
        rect = tuple(float(x) for x in args.rect.split(","))
    except ValueError:
        ap.error("--rect expects four comma-separated numbers")
    if len(rect) != 4:
        ap.error("--rect expects x1,x2,y1,y2")
    rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
    closed = limit.nu_closed(args.alpha, rect)
    mean, se = limit.nu_mc(rng, args.alpha, rect, args.reps)
    obj = {"closed": closed, "mc": mean, "stderr": se,
           "z": (mean - closed) / se if se > 0 else 0.0}
    _emit(args, _config(args), obj=obj, default="json")


def _cmd_dickman(args, ap):
    rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
    vals = limit.sample_dickman_many(rng, args.reps, args.delta)
    _emit(args, _config(args), ["rep", "value"], [(i, float(v)) for i, v in enumerate(vals)])


COMMANDS = {"source": _cmd_source, "simulate": _cmd_simulate, "sample-limit": _cmd_sample_limit,
            "expect": _cmd_expect, "converge": _cmd_converge, "nu-check": _cmd_nu,
            "dickman": _cmd_dickman}


def dispatch(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    sub = ap._subparsers._group_actions[0].choices[args.command]
    try:
        COMMANDS[args.command](args, sub)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, ArithmeticError, OSError, RuntimeError) as exc:
        print(f"qscost: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
