"""Command-line interface: ``regdfo solve | bench | profiles``."""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import benchmark, dfolsr, smoothing
from .profiles import compute_Np
from .regularizers import parse_regularizer
from .testbed import NoisyProblem, get_problem, list_problems, parse_noise


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _names(text, universe, what):
    if text in ("all", ""):
        return list(universe)
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in names if t not in universe]
    if bad:
        raise SystemExit(f"unknown {what}: {', '.join(bad)} (choose from {', '.join(universe)})")
    return names


def _load_config(path):
    if path is None:
        return dfolsr.SolverConfig()
    with open(path) as fh:
        return dfolsr.SolverConfig.from_overrides(fh.read().splitlines())


def _add_common(p):
    p.add_argument("--reg", default="l1:1", help="zero | l1:<lambda> | ball:<r> | box:<lo>,<hi>")
    p.add_argument("--noise", default="none", help="none | mult:<sigma> | add:<sigma>")
    p.add_argument("--budget-mult", type=int, default=100,
                   help="evaluation budget is this times (n+1)")
    p.add_argument("--config", help="file of key=value SolverConfig overrides")


def cmd_solve(args):
    problem = get_problem(args.problem)
    h = parse_regularizer(args.reg)
    cfg = _load_config(args.config)
    cfg = dfolsr.SolverConfig(**{**cfg.to_dict(),
                                 "max_evals": args.budget_mult * (problem.n + 1)})
    fun = NoisyProblem(problem, parse_noise(args.noise, seed=args.seed))

    def show(k, x, phi, delta, rho, eta, phase):
        print(f"{k:5d} {phase:12s} phi={phi:.10g} delta={delta:.3e} rho={rho:.3e} "
              f"eta={eta:.3e}")

    cb = None if args.quiet else show
    if args.solver == "dfolsr":
        res = dfolsr.solve(fun, h, cfg, x0=problem.x0, callback=cb)
    else:
        outer = None if args.quiet else (
            lambda j, g, mu: print(f"outer j={j} gamma={g:.3e} mu={mu:.3e}"))
        res = smoothing.solve(fun, h, smoothing.SmoothingConfig(inner=cfg), x0=problem.x0,
                              callback=cb, outer_callback=outer)
    best = problem.f(res.x) + h.value(res.x)
    print(f"solver={args.solver} problem={problem.name} reg={h.spec()} noise={args.noise}")
    print(f"termination={res.termination} evaluations={res.n_evals}")
    print(f"best_phi={best:.12g}")
    print("x=" + np.array2string(res.x, precision=10, max_line_width=120))
    print("phases=" + ", ".join(f"{k}:{v}" for k, v in sorted(res.phase_counts.items())))
    if res.violations:
        print(f"invariant violations: {len(res.violations)}")
        for v in res.violations[:10]:
            print("  " + v)
    return 1 if (args.strict and res.violations) else 0


def cmd_bench(args):
    spec = benchmark.RunSpec(
        solvers=_names(args.solver, benchmark.SOLVERS, "solver"),
        problems=_names(args.problems, list_problems(), "problem"),
        seeds=args.seeds, noise=args.noise, regularizer=args.reg,
        budget_mult=args.budget_mult, config=_load_config(args.config))

    def progress(rec):
        status = "FAILED " + rec.error if rec.error else (
            f"best={min(rec.history):.8g} evals={len(rec.history)} {rec.termination}")
        print(f"{rec.solver:8s} {rec.problem:20s} seed={rec.seed:<3d} {status}", flush=True)

    records = benchmark.run_benchmark(spec, None if args.quiet else progress)
    taus = _floats(args.tau)
    paths = benchmark.write_records(records, args.out, taus)
    failed = [r for r in records if r.error]
    violated = [r for r in records if r.violations]
    for tau in taus:
        table = compute_Np(records, tau)
        for solver in spec.solvers:
            solved = sum(math.isfinite(n) for (s, _), n in table.items() if s == solver)
            total = sum(1 for (s, _) in table if s == solver)
            print(f"tau={tau:g} {solver}: solved {solved}/{total}")
    print(f"wrote {', '.join(paths)}")
    print(f"failed cells: {len(failed)}; runs with invariant violations: {len(violated)}")
    return 1 if (args.strict and (failed or violated)) else 0


def cmd_profiles(args):
    path = args.records
    if os.path.isdir(path):
        path = os.path.join(path, "records.jsonl")
    records = benchmark.read_records(path)
    if not records:
        logging.warning("no records in %s", path)
        return 0
    curves = benchmark.profile_curves(records, _floats(args.tau))
    out = args.out or os.path.dirname(os.path.abspath(path))
    paths = benchmark.write_curves(curves, out)
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="regdfo", description="Derivative-free solvers for regularized least squares.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="single run, prints the trajectory")
    p.add_argument("--solver", choices=benchmark.SOLVERS, default="dfolsr")
    p.add_argument("--problem", "--problems", dest="problem", default="rosenbrock",
                   choices=list_problems())
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", action="store_true", help="summary only")
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero if any invariant violation is recorded")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run the benchmark matrix and write records")
    p.add_argument("--solver", default="all", help="comma list of dfolsr,dfolssr or all")
    p.add_argument("--problems", default="all", help="comma list of problem names or all")
    p.add_argument("--seeds", type=int, default=1, help="seeds 0..k-1 per problem")
    p.add_argument("--tau", default="1e-3,1e-5,1e-7")
    p.add_argument("--out", default="bench_out")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero on any failed cell or invariant violation")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("profiles", help="data/performance profiles from records")
    p.add_argument("--records", default="bench_out",
                   help="records.jsonl file or directory containing it")
    p.add_argument("--tau", default="1e-3,1e-5,1e-7")
    p.add_argument("--out", help="output directory (default: next to the records)")
    p.set_defaults(func=cmd_profiles)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
