"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v`` (or ``python tests/test_acceptance.py``).
"""
import math
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

from oracles import grid_min_composite, grid_moreau_1d  # noqa: E402
from regdfo import benchmark  # noqa: E402
from regdfo.interpolation import (  # noqa: E402
    InterpolationSet,
    build_residual_model,
    gauss_newton_model,
    poisedness,
)
from regdfo.profiles import compute_Np, data_profile, performance_profile  # noqa: E402
from regdfo.regularizers import L1Regularizer, ZeroRegularizer  # noqa: E402
from regdfo.subproblems import SubproblemSpec, estimate_criticality, sfista  # noqa: E402
from regdfo.testbed import list_problems  # noqa: E402


def test_prox_envelope_suite(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    h = L1Regularizer(1.3)
    worst_prox = 0.0
    for _ in range(200):
        mu = rng.uniform(0.01, 2)
        y = rng.normal(scale=3, size=7)
        closed = y - np.clip(y, -mu * 1.3, mu * 1.3)
        worst_prox = max(worst_prox, np.max(np.abs(h.prox(mu, y) - closed)))

    sandwich_bad = 0
    for mu in (1.0, 0.1, 0.01):
        for _ in range(1000):
            x = rng.normal(scale=2, size=4)
            if h.moreau(mu, x).envelope_value > h.value(x) + 1e-15:
                sandwich_bad += 1

    worst_grad = 0.0
    step = 1e-6
    for mu in (1.0, 0.1, 0.01):
        for _ in range(50):
            x = rng.normal(size=4)
            ev = h.moreau(mu, x)
            fd = np.array([(h.moreau(mu, x + step * e).envelope_value
                            - h.moreau(mu, x - step * e).envelope_value) / (2 * step)
                           for e in np.eye(4)])
            worst_grad = max(worst_grad, np.max(np.abs(fd - ev.envelope_gradient)))

    # grid-search envelope against a dense 1-D grid, per coordinate
    x = np.array([0.05, -0.2])
    grid = sum(grid_moreau_1d(1.0, 0.1, xi) for xi in x)
    env_err = abs(L1Regularizer(1.0).moreau(0.1, x).envelope_value - grid)

    dt = time.perf_counter() - t0
    ok = (worst_prox <= 1e-12 and sandwich_bad == 0 and worst_grad <= 1e-6
          and env_err <= 1e-6 and dt < 1.0)
    report("prox/envelope suite", ok,
           f"prox err {worst_prox:.1e}, sandwich violations {sandwich_bad}/3000, "
           f"grad-FD err {worst_grad:.1e}, grid env err {env_err:.1e}, {dt:.2f} s")
    assert ok


def test_sfista_oracle_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    gaps = []
    ok_all = True
    for i in range(25):
        A = rng.normal(size=(2, 2))
        H = A.T @ A * rng.uniform(0, 2)
        g = 2 * rng.normal(size=2)
        x = 0.5 * rng.normal(size=2)
        lam = rng.uniform(0.1, 2)
        r = (1.0, 2.0)[i % 2]
        eps = (1e-2, 1e-4, 1e-6)[i % 3]
        spec = SubproblemSpec(g, H, float(np.linalg.eigvalsh(H)[-1]), x, r,
                              L1Regularizer(lam), eps)
        sol = sfista(spec)
        best, _ = grid_min_composite(g, H, x, lam, r)
        gap = sol.objective_value - best
        gaps.append(gap / eps)
        ok_all &= gap <= eps and np.linalg.norm(sol.d) <= r * (1 + 1e-12)
    dt = time.perf_counter() - t0
    ok = ok_all and dt < 120
    report("S-FISTA oracle equivalence", ok,
           f"max (G(d) - grid min)/eps = {max(gaps):.3f} over 25 instances, {dt:.1f} s")
    assert ok


def test_criticality_reductions(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    acc = 1e-8
    worst_smooth = 0.0
    for _ in range(100):
        g = rng.normal(scale=rng.uniform(0.1, 10), size=rng.integers(1, 8))
        eta, _ = estimate_criticality(g, ZeroRegularizer(), np.zeros(g.size), acc)
        worst_smooth = max(worst_smooth, abs(eta - np.linalg.norm(g)))
    worst_stat = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 8))
        lam = rng.uniform(0.1, 3)
        g = rng.uniform(-lam, lam, size=n)
        eta, _ = estimate_criticality(g, L1Regularizer(lam), np.zeros(n), acc)
        worst_stat = max(worst_stat, eta)
    dt = time.perf_counter() - t0
    ok = worst_smooth <= acc and worst_stat <= acc and dt < 10
    report("criticality reductions", ok,
           f"max |eta - ||g||| = {worst_smooth:.1e}, max eta at stationarity = "
           f"{worst_stat:.1e} (accuracy {acc:g}), {dt:.2f} s")
    assert ok


def _toy_residual(x):
    return np.array([x[0] ** 2 - x[1], np.sin(x[0]) + x[1] - 1, 0.5 * x[0] * x[1]])


def _toy_jacobian(x):
    return np.array([[2 * x[0], -1.0], [np.cos(x[0]), 1.0], [0.5 * x[1], 0.5 * x[0]]])


def test_criticality_perturbation_scaling(report):
    t0 = time.perf_counter()
    x = np.array([0.7, -0.3])
    h = L1Regularizer(0.5)
    acc = 1e-10
    eta, _ = estimate_criticality(_toy_jacobian(x).T @ _toy_residual(x), h, x, acc)
    rng = np.random.default_rng(3)
    ratios, lambdas = [], []
    for delta in (1e-1, 1e-2, 1e-3, 1e-4):
        for _ in range(3):
            Q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
            pts = np.vstack([x, x + delta * Q.T])
            Y = InterpolationSet(pts, [_toy_residual(p) for p in pts], delta)
            lambdas.append(poisedness(Y, x, delta).lambda_value)
            model = gauss_newton_model(build_residual_model(Y))
            psi, _ = estimate_criticality(model.gradient, h, x, acc)
            ratios.append(abs(psi - eta) / delta)
    dt = time.perf_counter() - t0
    # bounded: the ratio does not grow as delta shrinks
    ok = max(ratios) <= 10.0 and max(ratios[-3:]) <= 2 * max(ratios[:3]) + 1e-3 \
        and max(lambdas) <= 100 and dt < 30
    report("criticality perturbation scaling", ok,
           f"|Psi - eta|/Delta in [{min(ratios):.3f}, {max(ratios):.3f}] for Delta 1e-1..1e-4, "
           f"max Lambda {max(lambdas):.2f}, {dt:.2f} s")
    assert ok


def test_solver_invariant_audit(report, noiseless_run, noisy_runs):
    records = list(noiseless_run[0])
    for recs, _ in noisy_runs.values():
        records += recs
    violations = [(r.solver, r.problem, r.seed, r.noise, v) for r in records for v in r.violations]
    failed = [(r.solver, r.problem, r.seed, r.noise, r.error) for r in records if r.error]
    ok = not violations and not failed
    detail = f"{len(records)} runs, {len(violations)} violations, {len(failed)} failed runs"
    if violations:
        detail += f"; first: {violations[0]}"
    if failed:
        detail += f"; first failure: {failed[0]}"
    report("solver invariant audit", ok, detail)
    assert ok


def test_desk_scale_profiles(report, noiseless_run):
    records, seconds = noiseless_run
    n_problems = len(list_problems())
    solved = {}
    for tau in (1e-3, 1e-7):
        table = compute_Np(records, tau)
        for solver in benchmark.SOLVERS:
            solved[solver, tau] = sum(math.isfinite(n) for (s, _), n in table.items()
                                      if s == solver)
    frac = {s: solved[s, 1e-3] / n_problems for s in benchmark.SOLVERS}
    budget_ok = all(len(r.history) <= r.budget for r in records)
    ok = (n_problems >= 12 and all(f >= 0.8 for f in frac.values())
          and solved["dfolsr", 1e-7] >= solved["dfolssr", 1e-7]
          and budget_ok and seconds < 600)
    report("desk-scale profiles", ok,
           f"{n_problems} problems; tau=1e-3 solved LSR {solved['dfolsr', 1e-3]} "
           f"({frac['dfolsr']:.0%}), LSSR {solved['dfolssr', 1e-3]} ({frac['dfolssr']:.0%}); "
           f"tau=1e-7 LSR {solved['dfolsr', 1e-7]} >= LSSR {solved['dfolssr', 1e-7]}; "
           f"{seconds:.0f} s")
    assert ok


def _curves_ok(curves):
    for c in curves:
        v = np.asarray(c.values)
        if v.min() < 0 or v.max() > 1 or np.any(np.diff(v) < 0):
            return False
    return True


def test_noise_protocol(report, noisy_runs):
    lines = []
    ok = True
    for noise, (records, seconds) in noisy_runs.items():
        per_cell = {}
        for r in records:
            per_cell.setdefault((r.solver, r.problem), set()).add(r.seed)
        ten_seeds = all(s == set(range(10)) for s in per_cell.values())
        rerun = benchmark.run_benchmark(benchmark.RunSpec(noise=noise, seeds=10))
        identical = [a.to_json() for a in records] == [b.to_json() for b in rerun]
        curves = benchmark.profile_curves(records)
        shape_ok = _curves_ok(curves) and len(curves) == 2 * 3 * len(benchmark.SOLVERS)
        ok &= ten_seeds and identical and shape_ok
        lines.append(f"{noise}: {len(records)} runs, 10 seeds {ten_seeds}, "
                     f"byte-identical rerun {identical}, curves monotone in [0,1] {shape_ok}")
    report("noise protocol", ok, "; ".join(lines))
    assert ok


class _Rec:
    def __init__(self, solver, problem, history, seed=0, n=1):
        self.solver, self.problem, self.history, self.seed, self.n = (
            solver, problem, history, seed, n)


def test_profile_math(report):
    checks = {}
    t = compute_Np([_Rec("A", "p", [10, 5, 1, 0.1]), _Rec("B", "p", [10, 8, 0])], 1e-1)
    checks["Np synthetic"] = t[("A", ("p", 0))] == 3
    t = compute_Np([_Rec("A", "p", [0, 0]), _Rec("B", "p", [0, 0])], 1e-7)
    checks["Np=1 at optimum"] = t[("A", ("p", 0))] == 1
    t = compute_Np([_Rec("A", "p", [10, 9, 8]), _Rec("B", "p", [10, 0])], 1e-3)
    checks["Np=inf"] = math.isinf(t[("A", ("p", 0))])

    alphas = np.array([0, 1, 1.99, 2, 3, 49.9, 50, 100])
    (c,) = data_profile({("A", "p"): 2 * (1 + 1)}, {"p": 1}, alphas)
    checks["data single"] = np.array_equal(c.values, (alphas >= 2).astype(float))
    (c,) = data_profile({("A", "p"): math.inf}, {"p": 1}, alphas)
    checks["data all inf"] = not c.values.any()
    (c,) = data_profile({("A", "p"): 4, ("A", "q"): 150}, {"p": 1, "q": 2}, alphas)
    checks["data two"] = np.array_equal(
        c.values, np.where(alphas >= 50, 1.0, np.where(alphas >= 2, 0.5, 0.0)))

    palphas = np.array([1, 1.5, 1.99, 2, 4])
    (c,) = performance_profile({("A", "p"): 3, ("A", "q"): math.inf}, palphas)
    checks["perf one solver"] = c.values[0] == 0.5
    ca, cb = performance_profile({("A", "p"): 10, ("B", "p"): 20}, palphas)
    checks["perf A beats B"] = ca.values[0] == 1.0
    checks["perf B step at 2"] = np.array_equal(cb.values, (palphas >= 2).astype(float))
    ok = all(checks.values())
    bad = [k for k, v in checks.items() if not v]
    report("profile math", ok, f"{len(checks) - len(bad)}/{len(checks)} hand examples exact"
           + (f"; failing {bad}" if bad else ""))
    assert ok


if __name__ == "__main__":
    import pytest
    sys.exit(pytest.main([__file__, "-v"]))
