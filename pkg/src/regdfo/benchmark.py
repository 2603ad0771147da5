"""Benchmark matrix runner and on-disk artifacts (JSON lines, CSV, SVG)."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dfolsr, smoothing
from .profiles import compute_Np, data_profile, performance_profile
from .regularizers import parse_regularizer
from .testbed import NoisyProblem, get_problem, list_problems, parse_noise

log = logging.getLogger(__name__)

SOLVERS = ("dfolsr", "dfolssr")
DEFAULT_TAUS = (1e-3, 1e-5, 1e-7)


@dataclass
class RunRecord:
    solver: str
    problem: str
    seed: int
    noise: str
    regularizer: str
    n: int
    budget: int
    history: list
    config_hash: str
    termination: str = ""
    violations: list = field(default_factory=list)
    error: str | None = None

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, allow_nan=True)

    @classmethod
    def from_json(cls, line):
        return cls(**json.loads(line))


@dataclass
class RunSpec:
    solvers: list = field(default_factory=lambda: list(SOLVERS))
    problems: list = field(default_factory=list_problems)
    seeds: int = 1
    noise: str = "none"
    regularizer: str = "l1:1"
    budget_mult: int = 100
    config: dfolsr.SolverConfig | None = None
    backend: str = "auto"

    def __post_init__(self):
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown:
            raise ValueError(f"unknown solver(s) {unknown}; choose from {SOLVERS}")
        for name in self.problems:
            get_problem(name)
        parse_noise(self.noise)
        parse_regularizer(self.regularizer)
        if self.seeds < 1 or self.budget_mult < 1:
            raise ValueError("seeds and budget multiplier must be positive")


def run_cell(solver, problem_name, seed, spec):
    """Run one (solver, problem, seed) cell; failures are captured in the record."""
    problem = get_problem(problem_name)
    h = parse_regularizer(spec.regularizer)
    noise = parse_noise(spec.noise, seed=seed)
    budget = spec.budget_mult * (problem.n + 1)
    base = spec.config or dfolsr.SolverConfig()
    cfg = dfolsr.SolverConfig(**{**base.to_dict(), "max_evals": budget})
    record = RunRecord(solver, problem_name, seed, noise.spec(), h.spec(), problem.n, budget,
                       [], cfg.config_hash())
    fun = NoisyProblem(problem, noise)
    try:
        if solver == "dfolsr":
            res = dfolsr.solve(fun, h, cfg, x0=problem.x0, backend=spec.backend)
        else:
            res = smoothing.solve(fun, h, smoothing.SmoothingConfig(inner=cfg), x0=problem.x0,
                                  backend=spec.backend)
        # score on the noiseless objective at the evaluated points
        record.history = [problem.f(x) + h.value(x) for x in res.history_x]
        record.termination = res.termination
        record.violations = list(res.violations)
    except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the matrix
        log.warning("cell %s/%s/%d failed: %s", solver, problem_name, seed, exc)
        record.error = f"{type(exc).__name__}: {exc}"
    return record


def run_benchmark(spec, progress=None):
    records = []
    for name in spec.problems:
        for seed in range(spec.seeds):
            for solver in spec.solvers:
                rec = run_cell(solver, name, seed, spec)
                records.append(rec)
                if progress is not None:
                    progress(rec)
    return records


def profile_curves(records, taus=DEFAULT_TAUS):
    dims = {r.problem: r.n for r in records}
    curves = []
    for tau in taus:
        table = compute_Np(records, tau)
        curves += data_profile(table, dims, tau=tau)
        curves += performance_profile(table, tau=tau)
    return curves


# artifacts --------------------------------------------------------------------

def write_records(records, out_dir, taus=DEFAULT_TAUS, stem="records"):
    os.makedirs(out_dir, exist_ok=True)
    jsonl = os.path.join(out_dir, f"{stem}.jsonl")
    with open(jsonl, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solver", "problem", "seed", "tau", "Np"])
        if records:
            for tau in taus:
                table = compute_Np(records, tau)
                for rec in records:
                    n = table[(rec.solver, (rec.problem, rec.seed))]
                    w.writerow([rec.solver, rec.problem, rec.seed, repr(tau),
                                n if math.isfinite(n) else "inf"])
    return [jsonl, csv_path]


def read_records(path):
    with open(path) as fh:
        return [RunRecord.from_json(line) for line in fh if line.strip()]


def write_curves(curves, out_dir):
    """One SVG per (kind, tau), plus ``curves.json``; nothing when ``curves`` is empty."""
    if not curves:
        log.warning("no profile curves to write")
        return []
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    groups = {}
    for c in curves:
        groups.setdefault((c.kind, c.tau), []).append(c)
    paths = []
    with matplotlib.rc_context({"svg.hashsalt": "regdfo", "svg.fonttype": "none"}):
        for (kind, tau), group in sorted(groups.items()):
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for c in group:
                ax.step(c.alphas, c.values, where="post", label=c.solver)
            if kind == "performance":
                ax.set_xscale("log")
            ax.set_xlabel("budget in simplex gradients" if kind == "data"
                          else "performance ratio")
            ax.set_ylabel("proportion solved")
            ax.set_ylim(-0.02, 1.02)
            ax.set_title(f"{kind} profile, tau={tau:g}")
            ax.legend(loc="lower right")
            path = os.path.join(out_dir, f"{kind}_tau{tau:g}.svg")
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    blob = [{"kind": c.kind, "tau": c.tau, "solver": c.solver,
             "alphas": np.asarray(c.alphas).tolist(), "values": np.asarray(c.values).tolist()}
            for c in curves]
    path = os.path.join(out_dir, "curves.json")
    with open(path, "w") as fh:
        json.dump(blob, fh, sort_keys=True)
    paths.append(path)
    return paths
