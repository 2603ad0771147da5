"""Derivative-free trust-region solver for ``1/2 ||r(x)||^2 + h(x)``.

The model is the Gauss-Newton quadratic built from a linear interpolation
model of ``r`` plus the exact regularizer.  Stationarity is tracked with an
inexact criticality measure computed by S-FISTA; small measures trigger a
criticality phase that shrinks the radius and repairs the geometry.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import interpolation as interp
from .regularizers import OutsideDomainError, parse_regularizer
from .subproblems import (
    DEFAULT_CAP,
    estimate_criticality,
    required_decrease,
    solve_trust_region,
)

log = logging.getLogger(__name__)

TERM_BUDGET = "budget"
TERM_RHO = "rho_floor"
TERM_CRITICALITY = "criticality"

_TOL = 1e-12


class BudgetExhausted(Exception):
    pass


class EvaluationError(RuntimeError):
    """The residual function returned non-finite values or failed."""


@dataclass
class SolverConfig:
    delta0_init: float | None = None
    delta_max: float = 100.0
    gamma_dec: float = 0.5
    gamma_inc: float = 2.0
    gamma_inc_bar: float = 4.0
    alpha1: float = 0.1
    alpha2: float = 0.5
    beta1: float = 0.1
    beta2: float = 0.7
    epsilon_C: float = 1e-2
    mu_crit: float = 1.0
    e1: float = 0.9
    e2: float = 1.0
    e3: float = 0.5
    omega_S: float = 0.1
    gamma_S: float | None = None
    omega_C: float = 0.5
    Lambda: float = 100.0
    rho_end: float = 1e-8
    max_evals: int | None = None
    sfista_cap: int = DEFAULT_CAP
    containment: float = 5.0
    criticality_cap: int = 50

    def __post_init__(self):
        if self.gamma_S is None:
            self.gamma_S = 0.5 * self.gamma_S_bound
        self.validate()

    @property
    def c1(self):
        return min(1.0, self.delta_max ** -2) / 2.0

    @property
    def gamma_S_bound(self):
        a = 2.0 * self.e3 * self.c1
        return a / (1.0 + math.sqrt(1.0 + a))

    def validate(self):
        checks = [
            (self.delta_max > 1, "delta_max > 1"),
            (0 < self.gamma_dec < 1 < self.gamma_inc <= self.gamma_inc_bar,
             "0 < gamma_dec < 1 < gamma_inc <= gamma_inc_bar"),
            (0 < self.alpha1 < self.alpha2 < 1, "0 < alpha1 < alpha2 < 1"),
            (0 < self.beta1 <= self.beta2 < 1, "0 < beta1 <= beta2 < 1"),
            (self.epsilon_C > 0 and self.mu_crit > 0, "epsilon_C, mu_crit > 0"),
            (0 < self.e1 < 1 and self.e2 > 0 and 0 < self.e3 < 1, "accuracy levels e1, e2, e3"),
            (0 < self.omega_S < 1 and 0 < self.omega_C < 1, "0 < omega_S, omega_C < 1"),
            (0 < self.gamma_S < self.gamma_S_bound, "0 < gamma_S < bound"),
            (self.Lambda >= 1, "Lambda >= 1"),
            (self.rho_end > 0, "rho_end > 0"),
            (self.delta0_init is None or 0 < self.delta0_init <= self.delta_max,
             "0 < delta0_init <= delta_max"),
            (self.max_evals is None or self.max_evals >= 1, "max_evals >= 1"),
            (self.sfista_cap >= 1 and self.criticality_cap >= 1, "iteration caps >= 1"),
            (self.containment >= 1, "containment >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"invalid solver config: {msg}")

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_overrides(cls, overrides=None, **kwargs):
        """Build from ``key=value`` strings (or a dict) on top of keyword defaults."""
        values = dict(kwargs)
        names = {f for f in cls.__dataclass_fields__}
        items = overrides.items() if isinstance(overrides, dict) else (
            line.split("=", 1) for line in (overrides or []) if line.strip()
            and not line.strip().startswith("#"))
        for key, val in items:
            key = key.strip()
            if key not in names:
                raise ValueError(f"unknown solver option {key!r}")
            if isinstance(val, str):
                val = val.strip()
                val = None if val.lower() == "none" else (
                    int(val) if key in ("max_evals", "sfista_cap", "criticality_cap") else float(val))
            values[key] = val
        return cls(**values)


@dataclass
class IterationRecord:
    k: int
    phase: str
    phi: float
    delta: float
    rho: float
    eta_bar: float
    tau: float
    step_norm: float
    model_decrease: float
    required_decrease: float
    ratio: float
    hessian_norm: float


@dataclass
class SolveResult:
    x: np.ndarray
    phi: float
    history_x: list
    history_phi: list
    termination: str
    phase_counts: dict
    x_final: np.ndarray
    iterations: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def n_evals(self):
        return len(self.history_phi)


def radius_update(R, delta, s_norm, rho, tau, config, poised=True):
    """Accept/reject decision and next ``(Delta^init, rho^init)``.

    Returns ``(delta_next, accepted, rho_next, shrink)`` where ``shrink``
    reports that the unsuccessful branch reduced ``rho``.  ``poised`` tells
    whether the set was Lambda-poised; if not, a rejected step is a
    model-improvement iteration and ``rho`` is kept.
    """
    c = config
    if R >= c.beta2:
        delta_next = min(max(c.gamma_inc * delta, c.gamma_inc_bar * s_norm), c.delta_max)
    elif R >= c.beta1:
        delta_next = max(c.gamma_dec * delta, s_norm, rho)
    else:
        delta_next = max(min(c.gamma_dec * delta, s_norm) / tau, rho)
    accepted = R >= c.beta1
    if accepted or not poised or delta_next != rho:
        return delta_next, accepted, rho, False
    return c.alpha2 * rho, False, c.alpha1 * rho, True


def stalled_update(delta, rho, config):
    """Radius after an unsuccessful step that would not shrink the radius.

    With the set unchanged and ``Delta`` not reduced, the next iteration
    would recompute the same rejected step.  Shrink by ``gamma_dec`` instead,
    with the usual ``rho`` reduction when the floor is hit.
    """
    delta_next = max(config.gamma_dec * delta, rho)
    if delta_next == rho:
        return config.alpha2 * rho, config.alpha1 * rho, True
    return delta_next, rho, False


def safety_update(delta, rho, config):
    """Radius after a safety step: ``(Delta^init_next, rho^init_next, shrink)``."""
    delta_next = max(rho, config.omega_S * delta)
    if delta_next == rho:
        return config.alpha2 * rho, config.alpha1 * rho, True
    return delta_next, rho, False


def compute_tau(eta_bar, g_norm, L_h):
    denom = g_norm + L_h
    if denom <= 0:
        return 1.0
    return min(eta_bar / denom, 1.0)


@dataclass
class CriticalityOutcome:
    Y: interp.InterpolationSet
    delta: float
    eta_bar: float
    direction: np.ndarray
    model: interp.QuadraticModel
    passes: int
    capped: bool


def criticality_phase(Y, delta_init, config, evaluator, measure, floor=0.0):
    """Shrink the radius until it is below ``mu_crit`` times the criticality estimate.

    ``measure(Y, accuracy)`` returns ``(model, eta_bar, direction)``.  The
    loop stops early (``capped=True``) after ``config.criticality_cap``
    passes or once the radius falls below ``floor``.
    """
    c = config
    out = None
    for i in range(1, c.criticality_cap + 1):
        delta = c.omega_C ** (i - 1) * delta_init
        Y = interp.improve_geometry(Y, Y.base, delta, c.Lambda, evaluator, c.containment)
        model, eta, d = measure(Y, c.e2 * delta)
        out = CriticalityOutcome(Y, delta, eta, d, model, i, False)
        if delta <= c.mu_crit * eta:
            return out
        if delta < floor:
            break
    out.capped = True
    return out


class TrustRegionRun:
    """One run of the regularized trust-region method.

    Subclasses change the merit function, criticality measure and step
    computation (see :mod:`regdfo.smoothing`).
    """

    name = "dfolsr"
    monotone_merit = True
    audit_decrease = True

    def __init__(self, fun, h, config, callback=None, backend="auto", budget=None,
                 history=None):
        self.fun = fun
        self.h = h
        self.c = config
        self.callback = callback
        self.backend = backend
        self.budget = budget
        self.history_x = [] if history is None else history[0]
        self.history_phi = [] if history is None else history[1]
        self.records = []
        self.violations = []
        self.counts = {"successful": 0, "unsuccessful": 0, "model_improving": 0,
                       "safety": 0, "criticality": 0}
        self.k = 0
        self.Y = None
        self.L_h = 0.0

    # evaluation ---------------------------------------------------------
    def evaluate(self, x):
        if self.budget is not None and len(self.history_phi) >= self.budget:
            raise BudgetExhausted
        try:
            r = np.asarray(self.fun(x), dtype=float).ravel()
        except BudgetExhausted:
            raise
        except Exception as exc:
            raise EvaluationError(f"residual evaluation failed at {x}: {exc}") from exc
        if not np.all(np.isfinite(r)):
            raise EvaluationError(f"non-finite residual at {x}")
        self.history_x.append(np.array(x, dtype=float))
        # geometry points may leave dom h; they only feed the residual model
        hx = self.h.value(x) if self.h.contains(x) else math.inf
        self.history_phi.append(0.5 * float(r @ r) + hx)
        return r

    # hooks --------------------------------------------------------------
    def prepare(self, model):
        """Called whenever a new model is built."""

    def merit(self, r, x):
        return 0.5 * float(r @ r) + self.h.value(x)

    def measure(self, Y, accuracy):
        model = self.build_model(Y)
        eta, d = estimate_criticality(model.gradient, self.h, Y.base, accuracy,
                                      self.c.sfista_cap, self.backend)
        return model, eta, d

    def step(self, model, x, delta, eta, d):
        sol = solve_trust_region(model, self.h, x, delta, eta, self.c.e3, self.c.c1,
                                 self.c.sfista_cap, crit_direction=d, L_h=self.L_h,
                                 backend=self.backend)
        base = self.h.value(x)
        return sol.d, base - sol.objective_value

    def tau(self, eta, model):
        return compute_tau(eta, float(np.linalg.norm(model.gradient)), self.L_h)

    def ratio_offset(self, delta):
        return 0.0

    def stop_radius(self):
        """Radius below which the run returns (0 disables)."""
        return 0.0

    def decrease_curvature(self, model):
        """Curvature constant used by the sufficient-decrease audit."""
        return model.hessian_norm

    def initial_measure(self, model, x, delta_init):
        c = self.c
        return estimate_criticality(model.gradient, self.h, x,
                                    min((1 - c.e1) * c.epsilon_C, c.e2 * delta_init),
                                    c.sfista_cap, self.backend)

    # machinery ----------------------------------------------------------
    def build_model(self, Y):
        rm = interp.build_residual_model(Y)
        model = interp.gauss_newton_model(rm)
        self.prepare(model)
        return model

    def _model_with_repair(self, Y, delta):
        try:
            return Y, self.build_model(Y)
        except interp.SingularDirectionsError:
            Y = interp.improve_geometry(Y, Y.base, delta, self.c.Lambda, self.evaluate,
                                        self.c.containment)
            return Y, self.build_model(Y)

    def _violation(self, msg):
        self.violations.append(f"k={self.k}: {msg}")
        log.debug("invariant violation: %s", msg)

    def _poised(self, Y, delta):
        try:
            rep = interp.poisedness(Y, Y.base, delta)
        except interp.SingularDirectionsError:
            return False
        return rep.is_poised(self.c.Lambda, self.c.containment)

    def iterate(self, Y, delta_init, rho_init):
        """Run iterations from the set ``Y``; returns ``(reason, Y, delta, rho)``."""
        c = self.c
        self.L_h = float(self.h.lipschitz_constant(Y.n))
        phi_prev = None
        while True:
            self.Y = Y
            x = Y.base.copy()
            Y, model = self._model_with_repair(Y, delta_init)
            self.Y = Y
            stop_delta = self.stop_radius()
            floor = max(c.rho_end, stop_delta)
            eta, d = self.initial_measure(model, x, delta_init)
            phase = "main"
            if eta <= c.e1 * c.epsilon_C:
                self.counts["criticality"] += 1
                out = criticality_phase(Y, delta_init, c, self.evaluate, self.measure, floor)
                Y, delta, eta, d, model = out.Y, out.delta, out.eta_bar, out.direction, out.model
                self.Y = Y
                rho = min(rho_init, delta)
                phase = "criticality"
                if out.capped:
                    return (self._stop_reason(delta, stop_delta), Y, delta, rho)
            else:
                delta, rho = delta_init, rho_init
            if stop_delta and delta < stop_delta:
                return ("radius", Y, delta, rho)
            phi_k = self.merit(Y.residuals[0], x)
            if self.monotone_merit and phi_prev is not None \
                    and phi_k > phi_prev + _TOL * (1 + abs(phi_prev)):
                self._violation(f"objective increased {phi_prev} -> {phi_k}")
            phi_prev = phi_k
            if not (rho <= delta * (1 + _TOL) and delta <= c.delta_max * (1 + _TOL)):
                self._violation(f"radius bounds rho={rho} delta={delta}")

            s, pred = self.step(model, x, delta, eta, d)
            s_norm = float(np.linalg.norm(s))
            tau = self.tau(eta, model)
            req = required_decrease(eta, delta, self.decrease_curvature(model), c.c1, c.e3)
            if eta > 0 and not (0 < tau <= 1):
                self._violation(f"tau={tau} outside (0, 1]")
            if s_norm > delta * (1 + _TOL):
                self._violation(f"step {s_norm} outside trust region {delta}")
            if self.callback is not None:
                self.callback(self.k, x, phi_k, delta, rho, eta, phase)

            if s_norm < tau * c.gamma_S * rho:
                self.counts["safety"] += 1
                Y = interp.improve_geometry(Y, x, max(rho, c.omega_S * delta), c.Lambda,
                                            self.evaluate, c.containment)
                delta_next, rho_next, _ = safety_update(delta, rho, c)
                self._record(phase + "/safety", phi_k, delta, rho, eta, tau, s_norm, pred,
                             req, math.nan, model)
            else:
                if self.audit_decrease and pred < req - _TOL * (1 + abs(req)):
                    self._violation(f"sufficient decrease {pred} < {req}")
                if pred < -_TOL:
                    self._violation(f"model increased by {-pred}")
                x_new = x + s
                r_new = self.evaluate(x_new)
                actual = phi_k - self.merit(r_new, x_new)
                offset = self.ratio_offset(delta)
                R = (actual - offset) / pred if pred > 0 else -math.inf
                poised = self._poised(Y, delta)
                delta_next, accepted, rho_next, _ = radius_update(
                    R, delta, s_norm, rho, tau, c, poised=poised)
                if not accepted and delta_next > delta:
                    # dividing by a small tau must not enlarge the radius after a rejection
                    delta_next = delta
                if accepted:
                    if actual - offset < c.beta1 * pred - _TOL * (1 + abs(phi_k)) or actual <= 0:
                        self._violation(f"accepted step without decrease ({actual})")
                    self.counts["successful"] += 1
                    t = interp.replacement_index(Y, x_new)
                    Y = Y.copy()
                    Y.replace(t, x_new, r_new)
                    Y.rebase(t)
                    label = "successful"
                elif not poised:
                    self.counts["model_improving"] += 1
                    Y = interp.improve_geometry(Y, x, delta_next, c.Lambda, self.evaluate,
                                                c.containment)
                    label = "model_improving"
                else:
                    self.counts["unsuccessful"] += 1
                    label = "unsuccessful"
                    if delta_next >= delta * (1 - _TOL):
                        delta_next, rho_next, _ = stalled_update(delta, rho, c)
                        label = "unsuccessful_stalled"
                delta_next = min(delta_next, c.delta_max)
                self._record(phase + "/" + label, phi_k, delta, rho, eta, tau, s_norm, pred,
                             req, R, model)
            if rho_next > rho * (1 + _TOL):
                self._violation(f"rho increased {rho} -> {rho_next}")
            delta_init, rho_init = delta_next, rho_next
            self.k += 1
            self.Y = Y
            if rho_init <= c.rho_end:
                return (TERM_RHO, Y, delta_init, rho_init)
            stop_delta = self.stop_radius()
            if stop_delta and delta_init < stop_delta:
                return ("radius", Y, delta_init, rho_init)

    def _stop_reason(self, delta, stop_delta):
        if stop_delta and delta < stop_delta:
            return "radius"
        return TERM_CRITICALITY

    def _record(self, phase, phi, delta, rho, eta, tau, s_norm, pred, req, R, model):
        self.records.append(IterationRecord(self.k, phase, phi, delta, rho, eta, tau, s_norm,
                                            pred, req, R, model.hessian_norm))


def _prepare_start(problem_or_fun, x0, h):
    fun = getattr(problem_or_fun, "residual", problem_or_fun)
    if x0 is None:
        x0 = getattr(problem_or_fun, "x0", None)
    if x0 is None:
        raise ValueError("a starting point is required")
    x0 = np.array(x0, dtype=float).ravel()
    h = parse_regularizer(h)
    if not h.contains(x0):
        raise OutsideDomainError("starting point outside dom h")
    return fun, x0, h


def default_delta0(x0, config):
    d0 = config.delta0_init
    if d0 is None:
        d0 = 0.1 * max(float(np.max(np.abs(x0))), 1.0)
    return min(d0, config.delta_max)


def _result(run, reason):
    Y = run.Y
    phis = np.asarray(run.history_phi)
    best = int(np.argmin(phis))
    return SolveResult(
        x=run.history_x[best].copy(), phi=float(phis[best]),
        history_x=run.history_x, history_phi=[float(p) for p in run.history_phi],
        termination=reason, phase_counts=dict(run.counts),
        x_final=Y.base.copy() if Y is not None else run.history_x[0].copy(),
        iterations=run.records, violations=run.violations)


def solve(problem, regularizer="zero", config=None, x0=None, callback=None, backend="auto"):
    """Minimize ``1/2 ||r(x)||^2 + h(x)`` without derivatives.

    ``problem`` is a residual callable or an object with ``residual`` and
    ``x0`` attributes.  ``callback(k, x_k, phi_k, delta_k, rho_k, eta_bar,
    phase)`` is called once per iteration.
    """
    fun, x0, h = _prepare_start(problem, x0, regularizer)
    c = config or SolverConfig()
    budget = c.max_evals if c.max_evals is not None else 100 * (x0.size + 1)
    run = TrustRegionRun(fun, h, c, callback, backend, budget)
    delta0 = default_delta0(x0, c)
    try:
        Y = interp.InterpolationSet.coordinate(x0, delta0, run.evaluate)
        reason = run.iterate(Y, delta0, delta0)[0]
    except BudgetExhausted:
        reason = TERM_BUDGET
    if not run.history_phi:
        raise EvaluationError("no evaluations were possible within the budget")
    return _result(run, reason)
