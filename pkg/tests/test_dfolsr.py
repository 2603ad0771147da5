import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regdfo import dfolsr, smoothing
from regdfo.dfolsr import (
    SolverConfig,
    compute_tau,
    criticality_phase,
    radius_update,
    safety_update,
    solve,
    stalled_update,
)
from regdfo.interpolation import InterpolationSet, build_residual_model, gauss_newton_model
from regdfo.subproblems import estimate_criticality
from regdfo.testbed import get_problem

CFG = SolverConfig(gamma_dec=0.5, gamma_inc=2, gamma_inc_bar=4, delta_max=100,
                   beta1=0.1, beta2=0.7)


def test_radius_update_examples():
    assert radius_update(0.9, 1, 1, 0.01, 1, CFG)[:2] == (4, True)
    assert radius_update(0.3, 1, 0.2, 0.01, 1, CFG)[:2] == (0.5, True)
    d, acc, rho, shrink = radius_update(-1, 1, 0.4, 0.01, 0.5, CFG)
    assert d == pytest.approx(0.8) and not acc and rho == 0.01 and not shrink


def test_radius_update_rho_reduction_only_at_floor():
    d, acc, rho, shrink = radius_update(-1, 0.02, 0.001, 0.01, 1.0, CFG)
    assert shrink and rho == CFG.alpha1 * 0.01 and d == CFG.alpha2 * 0.01
    # not poised: model-improvement iteration keeps rho
    d, acc, rho, shrink = radius_update(-1, 0.02, 0.001, 0.01, 1.0, CFG, poised=False)
    assert not shrink and rho == 0.01


def test_radius_update_cap():
    d, *_ = radius_update(0.95, 80, 80, 1e-3, 1, CFG)
    assert d == CFG.delta_max


def test_safety_and_stalled_updates():
    d, rho, shrink = safety_update(1.0, 0.01, CFG)
    assert d == CFG.omega_S and rho == 0.01 and not shrink
    d, rho, shrink = safety_update(0.05, 0.01, CFG)
    assert shrink and rho == CFG.alpha1 * 0.01
    d, rho, shrink = stalled_update(1.0, 0.01, CFG)
    assert d == 0.5 and not shrink


def test_tau():
    assert compute_tau(5.0, 5.0, 0.0) == 1.0
    assert compute_tau(1.0, 1.0, 1.0) == 0.5
    assert compute_tau(0.0, 0.0, 0.0) == 1.0


def test_config_validation_and_overrides():
    with pytest.raises(ValueError):
        SolverConfig(delta_max=0.5)
    with pytest.raises(ValueError):
        SolverConfig(beta1=0.8, beta2=0.7)
    with pytest.raises(ValueError):
        SolverConfig(gamma_S=1.0)
    c = SolverConfig.from_overrides(["beta1 = 0.2", "# note", "max_evals=30"])
    assert c.beta1 == 0.2 and c.max_evals == 30
    with pytest.raises(ValueError):
        SolverConfig.from_overrides(["nope=1"])
    assert SolverConfig().config_hash() == SolverConfig().config_hash()
    assert SolverConfig().config_hash() != c.config_hash()


def test_affine_residual_converges_fast():
    a = np.array([1.0, -2.0, 3.0])
    res = solve(lambda x: x - a, "zero", SolverConfig(max_evals=80), x0=np.zeros(3))
    hits = np.flatnonzero(np.array(res.history_phi) <= 1e-10)
    assert hits.size and hits[0] + 1 <= 20 * (3 + 1)
    assert not res.violations


def test_tau_is_one_without_regularizer():
    res = solve(get_problem("beale"), "zero")
    taus = [rec.tau for rec in res.iterations if rec.eta_bar > 0]
    assert taus and all(t == pytest.approx(1.0, abs=1e-12) for t in taus)


def test_rosenbrock_l1_against_consensus():
    p = get_problem("rosenbrock")
    runs = [solve(p, "l1:1"), smoothing.solve(p, "l1:1")]
    phi_star = min(r.phi for r in runs)
    phi0 = runs[0].history_phi[0]
    assert runs[0].phi <= phi_star + 1e-3 * (phi0 - phi_star)
    assert len(runs[0].history_phi) <= 100 * (p.n + 1)


def test_run_is_deterministic_and_within_budget():
    p = get_problem("helical_valley")
    cfg = SolverConfig(max_evals=150)
    a, b = solve(p, "l1:0.1", cfg), solve(p, "l1:0.1", cfg)
    assert a.history_phi == b.history_phi
    assert len(a.history_phi) <= 150
    assert a.termination in (dfolsr.TERM_BUDGET, dfolsr.TERM_RHO, dfolsr.TERM_CRITICALITY)


def test_callback_and_result_fields():
    seen = []
    res = solve(get_problem("rosenbrock"), "l1:1", callback=lambda *a: seen.append(a))
    assert seen and len(seen[0]) == 7
    assert res.phi == min(res.history_phi)
    assert sum(res.phase_counts.values()) >= len(seen) - res.phase_counts["criticality"]


def test_box_constrained_run_stays_feasible():
    # x0 = (-1.2, 1) sits on the upper face; geometry points may step outside
    res = solve(get_problem("rosenbrock"), "box:-1.5,1.0", SolverConfig(max_evals=200))
    h = dfolsr.parse_regularizer("box:-1.5,1.0")
    assert h.contains(res.x) and h.contains(res.x_final)
    for x, phi in zip(res.history_x, res.history_phi):
        assert h.contains(x) == math.isfinite(phi)
    assert not res.violations


def test_start_outside_domain():
    with pytest.raises(ValueError):
        solve(get_problem("rosenbrock"), "ball:0.5")


def test_evaluation_error_is_reported():
    def bad(x):
        return np.array([np.nan]) if x[0] > 0.05 else x

    with pytest.raises(dfolsr.EvaluationError):
        solve(bad, "zero", x0=np.zeros(2))


def _measure_for(fun, h):
    def measure(Y, accuracy):
        model = gauss_newton_model(build_residual_model(Y))
        eta, d = estimate_criticality(model.gradient, h, Y.base, accuracy)
        return model, eta, d
    return measure


def test_criticality_phase_exits_on_first_pass():
    h = dfolsr.parse_regularizer("zero")

    def fun(x):
        return np.array([x[0] - 5.0, x[1]])

    Y = InterpolationSet.coordinate(np.zeros(2), 0.1, fun)
    out = criticality_phase(Y, 0.1, SolverConfig(), fun, _measure_for(fun, h))
    assert out.passes == 1 and out.delta == 0.1 and not out.capped


def test_criticality_phase_shrinks_at_stationary_point():
    h = dfolsr.parse_regularizer("l1:1")

    def fun(x):
        return np.array([x[0], x[1]])  # origin is stationary for 1/2||x||^2 + ||x||_1

    cfg = SolverConfig(criticality_cap=6)
    Y = InterpolationSet.coordinate(np.zeros(2), 0.5, fun)
    out = criticality_phase(Y, 0.5, cfg, fun, _measure_for(fun, h))
    assert out.capped and out.passes == 6
    assert out.delta == pytest.approx(0.5 * cfg.omega_C ** 5)


def test_criticality_phase_pass_count_bound():
    # smooth 1-D problem: eta ~ |f'(x)| = 2, passes about 1 + log(delta/(mu eta))/|log omega|
    h = dfolsr.parse_regularizer("zero")

    def fun(x):
        return np.array([x[0] + 2.0])

    cfg = SolverConfig(mu_crit=0.01)
    Y = InterpolationSet.coordinate(np.zeros(1), 1.0, fun)
    out = criticality_phase(Y, 1.0, cfg, fun, _measure_for(fun, h))
    bound = 1 + math.log(1.0 / (cfg.mu_crit * 2.0)) / abs(math.log(cfg.omega_C))
    assert out.passes <= math.ceil(bound) and out.delta <= cfg.mu_crit * out.eta_bar


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 3), st.integers(0, 1000))
def test_invariants_on_random_quadratic_residuals(lam, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(4, 3))
    b = rng.normal(size=4)

    def fun(x):
        return A @ x + b + 0.1 * np.sin(x).sum()

    res = solve(fun, f"l1:{lam}", SolverConfig(max_evals=120), x0=rng.normal(size=3))
    assert not res.violations
    phis = [rec.phi for rec in res.iterations]
    assert all(b <= a + 1e-12 * (1 + abs(a)) for a, b in zip(phis, phis[1:]))
    assert all(rec.step_norm <= rec.delta * (1 + 1e-12) for rec in res.iterations)
