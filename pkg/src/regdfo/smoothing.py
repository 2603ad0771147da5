"""Smoothing variant: trust-region runs on ``1/2 ||r||^2 + M_h^mu(gamma)``.

The nonsmooth term is replaced by its Moreau envelope with a parameter
``mu(gamma)`` tied to the current Gauss-Newton Hessian norm.  Each outer
iteration runs the smooth trust-region method on the envelope objective
until the radius drops below ``mu(gamma)^2``, then shrinks ``gamma``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import interpolation as interp
from .dfolsr import (
    TERM_BUDGET,
    TERM_CRITICALITY,
    TERM_RHO,
    BudgetExhausted,
    EvaluationError,
    SolverConfig,
    TrustRegionRun,
    _prepare_start,
    _result,
    default_delta0,
)
from .subproblems import mu_of_gamma, solve_smoothed_trust_region

TERM_OUTER = "max_outer"
TERM_GAMMA = "gamma_floor"
GAMMA_FLOOR = 1e-12


class DelegateToSmoothSolver(ValueError):
    """``h`` has no Lipschitz smoothing to do; use the plain trust-region solver."""


@dataclass
class SmoothingConfig:
    gamma0: float = 0.01
    sigma_shrink: float = 0.1
    ratio_c: float = 1e-2
    ratio_p: float = 1.5
    restart_factor: float = 10.0
    max_outer: int = 30
    inner: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not 0 < self.sigma_shrink < 1:
            raise ValueError("invalid smoothing config: 0 < sigma_shrink < 1")
        if self.ratio_p <= 1 or self.ratio_c < 0:
            raise ValueError("invalid smoothing config: ratio_p > 1, ratio_c >= 0")
        if self.gamma0 <= 0 or self.max_outer < 1:
            raise ValueError("invalid smoothing config: gamma0 > 0, max_outer >= 1")

    @property
    def max_evals(self):
        return self.inner.max_evals

    def gammas(self):
        """The outer sequence ``gamma_j = gamma0 * sigma^j`` down to the floor."""
        out = []
        g = self.gamma0
        while len(out) < self.max_outer and g >= GAMMA_FLOOR:
            out.append(g)
            g *= self.sigma_shrink
        return out

    def to_dict(self):
        return asdict(self)


def smoothed_phi(problem, regularizer, gamma, H_norm, x, L_h=None):
    """``1/2 ||r(x)||^2 + M_h^mu(x)`` with ``mu = mu(gamma, L_h, H_norm)``.

    ``L_h`` defaults to the regularizer's constant in dimension ``len(x)``.
    """
    fun = getattr(problem, "residual", problem)
    x = np.asarray(x, dtype=float)
    r = np.asarray(fun(x), dtype=float)
    if L_h is None:
        L_h = regularizer.lipschitz_constant(x.size)
    mu = mu_of_gamma(gamma, L_h, H_norm)
    return 0.5 * float(r @ r) + regularizer.moreau(mu, x).envelope_value


def modified_ratio(actual, predicted, delta, c, p):
    """``(actual - c * delta^p) / predicted``."""
    if predicted <= 0:
        return -math.inf
    return (actual - c * delta ** p) / predicted


class SmoothedRun(TrustRegionRun):
    """Trust-region run on the envelope objective for one fixed ``gamma``."""

    name = "dfolssr"
    monotone_merit = False  # mu changes with ||H_k||, so only per-step decrease is audited

    def __init__(self, fun, h, config, gamma, smoothing, **kwargs):
        super().__init__(fun, h, config, **kwargs)
        self.gamma = gamma
        self.s = smoothing
        self.mu = None
        self.hessian_norm = 0.0
        self.max_hessian_norm = 0.0

    def prepare(self, model):
        L_h = float(self.h.lipschitz_constant(model.gradient.size))
        self.mu = mu_of_gamma(self.gamma, L_h, model.hessian_norm)
        self.hessian_norm = model.hessian_norm
        self.max_hessian_norm = max(self.max_hessian_norm, model.hessian_norm)

    def merit(self, r, x):
        return 0.5 * float(r @ r) + self.h.moreau(self.mu, x).envelope_value

    def _gradient_measure(self, model, x):
        grad = model.gradient + self.h.moreau(self.mu, x).envelope_gradient
        norm = float(np.linalg.norm(grad))
        d = -grad / norm if norm > 0 else np.zeros_like(grad)
        return norm, d

    def measure(self, Y, accuracy):
        model = self.build_model(Y)
        eta, d = self._gradient_measure(model, Y.base)
        return model, eta, d

    def initial_measure(self, model, x, delta_init):
        return self._gradient_measure(model, x)

    def tau(self, eta, model):
        return 1.0

    def ratio_offset(self, delta):
        return self.s.ratio_c * delta ** self.s.ratio_p

    def stop_radius(self):
        return self.mu ** 2

    def decrease_curvature(self, model):
        # the envelope adds curvature up to 1/mu on top of H_k
        return model.hessian_norm + 1.0 / self.mu

    def step(self, model, x, delta, eta, d):
        sol = solve_smoothed_trust_region(model, self.h, x, delta, self.gamma,
                                          self.c.sfista_cap, self.L_h, self.backend)
        env0 = self.h.moreau(self.mu, x).envelope_value

        def smoothed_model(s):
            return (model.gradient @ s + 0.5 * s @ model.hessian @ s
                    + self.h.moreau(self.mu, x + s).envelope_value)

        best_s, best_val = sol.d, smoothed_model(sol.d)
        if eta > 0:
            # Cauchy safeguard under the curvature bound u.H.u + 1/mu
            curv = float(d @ model.hessian @ d) + 1.0 / self.mu
            for t in {delta, min(delta, eta / curv)}:
                val = smoothed_model(t * d)
                if val < best_val:
                    best_s, best_val = t * d, val
        return best_s, env0 - best_val


def _fresh_set(Y, radius, evaluate):
    return interp.InterpolationSet.coordinate(Y.base, radius, evaluate, r0=Y.residuals[0])


def solve(problem, regularizer="l1:1", config=None, x0=None, callback=None,
          outer_callback=None, backend="auto"):
    """Minimize ``1/2 ||r(x)||^2 + h(x)`` by a sequence of smoothed problems.

    ``outer_callback(j, gamma_j, mu_j)`` fires at the start of each outer
    iteration.  The reported best point and value use the exact ``h``.
    """
    fun, x0, h = _prepare_start(problem, x0, regularizer)
    if h.lipschitz_constant(x0.size) <= 0:
        raise DelegateToSmoothSolver(
            f"regularizer {h.spec()} needs no smoothing; use the dfolsr solver")
    sc = config or SmoothingConfig()
    c = sc.inner
    budget = c.max_evals if c.max_evals is not None else 100 * (x0.size + 1)
    history = ([], [])
    delta0 = default_delta0(x0, c)
    totals = TrustRegionRun(fun, h, c, budget=budget, history=history)
    outer = []
    reason = TERM_OUTER
    run = totals
    try:
        Y = interp.InterpolationSet.coordinate(x0, delta0, totals.evaluate)
        delta = rho = delta0
        L_h = float(h.lipschitz_constant(x0.size))
        hnorm = 0.0
        k = 0
        gammas = sc.gammas()
        for j, gamma in enumerate(gammas):
            run = SmoothedRun(fun, h, c, gamma, sc, callback=callback, backend=backend,
                              budget=budget, history=history)
            run.k = k
            if j > 0:
                mu_next = mu_of_gamma(gamma, L_h, hnorm)
                radius = min(max(delta, sc.restart_factor * mu_next ** 2), c.delta_max)
                Y = _fresh_set(Y, radius, run.evaluate)
                delta = rho = radius
            try:
                run.prepare(run.build_model(Y))
            except interp.SingularDirectionsError:
                pass
            if outer_callback is not None and run.mu is not None:
                outer_callback(j, gamma, run.mu)
            try:
                why, Y, delta, rho = run.iterate(Y, delta, rho)
            finally:
                k = run.k
                _merge(totals, run)
                outer.append({"j": j, "gamma": gamma, "mu": run.mu, "delta_last": delta,
                              "max_hessian_norm": run.max_hessian_norm,
                              "x_last": Y.base.copy()})
            hnorm = run.hessian_norm
            if why in (TERM_RHO, TERM_CRITICALITY):
                # inner run cannot make progress at this gamma: move on to the next one
                continue
            if why == "radius" and not delta < run.mu ** 2 * (1 + 1e-12):
                totals.violations.append(
                    f"j={j}: inner exit radius {delta} not below mu^2={run.mu ** 2}")
        else:
            reason = TERM_GAMMA if len(gammas) < sc.max_outer else TERM_OUTER
    except BudgetExhausted:
        reason = TERM_BUDGET
    if not history[1]:
        raise EvaluationError("no evaluations were possible within the budget")
    totals.Y = run.Y if run.Y is not None else totals.Y
    res = _result(totals, reason)
    res.extra["outer"] = outer
    return res


def _merge(totals, run):
    if run is totals:
        return
    for key, val in run.counts.items():
        totals.counts[key] = totals.counts.get(key, 0) + val
    totals.records.extend(run.records)
    totals.violations.extend(f"[{run.name} gamma={run.gamma:g}] {v}" for v in run.violations)
    run.counts = {key: 0 for key in run.counts}
    run.records, run.violations = [], []
