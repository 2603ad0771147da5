"""Ball-constrained composite subproblems solved by S-FISTA.

All three subproblems of the solvers share the form

    minimize  G(d) = g.d + d.H.d/2 + h(x + d)   subject to ||d|| <= r

with ``H`` positive semidefinite.  :func:`sfista` smooths ``h`` by its
Moreau envelope and runs FISTA with the accuracy-driven smoothing
parameter and iteration count; the three wrappers choose ``g``, ``H``,
``r`` and the accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .interpolation import QuadraticModel

DEFAULT_CAP = 500
EPS_FLOOR = 1e-14
CONTINUATION_START = 0.1
CONTINUATION_FACTOR = 1e-2


@dataclass
class SubproblemSpec:
    gradient: np.ndarray
    hessian: np.ndarray
    hessian_norm: float
    anchor: np.ndarray
    ball_radius: float
    regularizer: object
    epsilon: float
    iteration_cap: int = DEFAULT_CAP
    lipschitz: float | None = None

    def __post_init__(self):
        self.gradient = np.asarray(self.gradient, dtype=float)
        n = self.gradient.size
        self.hessian = np.zeros((n, n)) if self.hessian is None else np.asarray(self.hessian, float)
        self.anchor = np.asarray(self.anchor, dtype=float)
        if self.epsilon <= 0 or self.ball_radius <= 0:
            raise ValueError("epsilon and ball_radius must be positive")
        if self.lipschitz is None:
            self.lipschitz = float(self.regularizer.lipschitz_constant(n))


@dataclass
class SubproblemSolution:
    d: np.ndarray
    objective_value: float
    iterations_used: int
    mu_used: float
    iterations_required: int = 0


def mu_of_gamma(gamma, L_h, H_norm):
    """Smoothing parameter delivering accuracy ``gamma``."""
    if L_h <= 0:
        raise ValueError("mu(gamma) needs L_h > 0; use the envelope-free path")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    # sqrt(2 H gamma) factored so huge model curvature cannot overflow
    root = math.hypot(L_h, math.sqrt(2.0 * H_norm) * math.sqrt(gamma))
    return 2.0 * gamma / (L_h * (L_h + root))


def sfista_parameters(eps, L_h, H_norm, r, g_norm=0.0):
    """Return ``(mu, K, L)``: smoothing, iteration count and step constant.

    For ``L_h == 0`` there is nothing to smooth: ``mu`` is ``inf`` and ``K``
    follows the plain FISTA bound ``2 L r^2 / (K + 1)^2 <= eps``.
    """
    if L_h > 0:
        mu = mu_of_gamma(eps, L_h, H_norm)
        K = r * (2.0 * L_h / eps + math.sqrt(2.0 * H_norm / eps))
        return mu, _ceil(K), H_norm + 1.0 / mu
    L = H_norm if H_norm > 0 else g_norm / r
    if L <= 0:
        return math.inf, 0, 1.0
    return math.inf, _ceil(r * math.sqrt(2.0 * L / eps)), L


def _ceil(k):
    # iteration counts beyond any cap are reported saturated
    return math.ceil(min(k, 1e18))


def objective(g, H, x, h, d):
    return float(g @ d + 0.5 * d @ H @ d + h.value(x + d))


def _project_python(v, r, x, h):
    def ball(u):
        nu = np.linalg.norm(u)
        return u * (r / nu) if nu > r else u.copy()

    if not h.is_indicator:
        return ball(v)
    z, p, q = v.copy(), np.zeros_like(v), np.zeros_like(v)
    for _ in range(_kernels._DYKSTRA_ITERS):
        yb = ball(z + p)
        p = z + p - yb
        znew = h.prox(1.0, x + yb + q) - x
        q = yb + q - znew
        done = np.linalg.norm(znew - z) <= 1e-15 * (1.0 + r)
        z = znew
        if done:
            break
    return ball(h.prox(1.0, x + z) - x)


def fista_python(g, H, x, r, L, n_iter, mu, h, env_objective=False, d0=None):
    """Reference (uncompiled) version of the FISTA loop."""
    smooth = np.isfinite(mu) and not h.is_indicator and h.lipschitz_constant(g.size) > 0

    def hval(z):
        if env_objective and smooth:
            return h.moreau(mu, z).envelope_value
        return h.value(z)

    d = np.zeros_like(g) if d0 is None else np.array(d0, dtype=float)
    y = d.copy()
    t = 1.0
    best_d, best_val = np.zeros_like(g), hval(x)
    val0 = g @ d + 0.5 * d @ H @ d + hval(x + d)
    if val0 < best_val:
        best_d, best_val = d.copy(), val0
    for _ in range(n_iter):
        grad = g + H @ y
        if smooth:
            grad = grad + h.moreau(mu, x + y).envelope_gradient
        d_new = _project_python(y - grad / L, r, x, h)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = d_new + ((t - 1.0) / t_new) * (d_new - d)
        d, t = d_new, t_new
        val = g @ d + 0.5 * d @ H @ d + hval(x + d)
        if val < best_val:
            best_d, best_val = d.copy(), val
    return best_d, best_val


def _run(g, H, x, r, L, K, mu, h, env_objective, backend, d0=None):
    d0 = np.zeros_like(g) if d0 is None else d0
    use_kernel = backend == "kernel" or (backend == "auto" and h.kernel_kind >= 0)
    if use_kernel:
        if h.kernel_kind < 0:
            raise ValueError("regularizer has no compiled kernel")
        lam, lo, hi, center, radius = h.kernel_params(g.size)
        return _kernels.fista_ball(
            np.ascontiguousarray(g, dtype=float), np.ascontiguousarray(H, dtype=float),
            np.ascontiguousarray(x, dtype=float), float(r), float(L), int(K),
            float(mu) if np.isfinite(mu) else 0.0, int(h.kernel_kind), float(lam),
            np.ascontiguousarray(lo, float), np.ascontiguousarray(hi, float),
            np.ascontiguousarray(center, float), float(radius), bool(env_objective),
            np.ascontiguousarray(d0, dtype=float))
    return fista_python(g, H, x, r, L, K, mu, h, env_objective, d0)


def accuracy_schedule(eps, r, g_norm, L_h, H_norm, factor=CONTINUATION_FACTOR):
    """Decreasing accuracies ending at ``eps``, starting near the scale of ``G``."""
    top = r * (g_norm + L_h + 0.5 * H_norm * r)
    levels = []
    e = CONTINUATION_START * top
    while e > eps:
        levels.append(e)
        e *= factor
    return levels + [eps]


def sfista(spec, backend="auto", continuation=True):
    """S-FISTA for ``min G(d)`` over ``||d|| <= r``; returns the best iterate.

    With ``continuation`` the method is run for a decreasing sequence of
    accuracies, each stage warm-started from the best point so far and
    using that stage's smoothing parameter and iteration count (capped).
    The last stage uses the requested accuracy.  Without it a single cold
    run is made, which stalls once the cap is far below the theoretical
    count.  ``backend`` is ``"auto"`` (compiled kernel when the regularizer
    has one), ``"kernel"`` or ``"python"``.
    """
    g, H, x, r, h = spec.gradient, spec.hessian, spec.anchor, spec.ball_radius, spec.regularizer
    g_norm = float(np.linalg.norm(g))
    levels = [spec.epsilon]
    if continuation:
        levels = accuracy_schedule(spec.epsilon, r, g_norm, spec.lipschitz, spec.hessian_norm)
    d = np.zeros_like(g)
    used = 0
    for eps in levels:
        mu, K, L = sfista_parameters(eps, spec.lipschitz, spec.hessian_norm, r, g_norm)
        n_iter = min(K, spec.iteration_cap)
        d, _ = _run(g, H, x, r, L, n_iter, mu, h, False, backend, d)
        used += n_iter
    return SubproblemSolution(d, objective(g, H, x, h, d), used, mu, K)


def estimate_criticality(g, h, x_k, accuracy, cap=DEFAULT_CAP, backend="auto"):
    """Inexact criticality measure ``eta_bar`` and its minimizing direction.

    ``eta_bar = h(x) - min_{||d|| <= 1} (g.d + h(x + d))``, computed from a
    feasible ``d`` so it never exceeds the exact value.
    """
    g = np.asarray(g, dtype=float)
    x_k = np.asarray(x_k, dtype=float)
    spec = SubproblemSpec(g, None, 0.0, x_k, 1.0, h, max(accuracy, EPS_FLOOR), cap)
    sol = sfista(spec, backend)
    eta = h.value(x_k) - sol.objective_value
    return max(eta, 0.0), sol.d


def required_decrease(eta_bar, delta, H_norm, c1, e3=1.0):
    return e3 * c1 * eta_bar * min(delta, eta_bar / max(1.0, H_norm))


def solve_trust_region(model: QuadraticModel, h, x_k, delta, eta_bar, e3, c1,
                       cap=DEFAULT_CAP, crit_direction=None, L_h=None, backend="auto"):
    """Approximate minimizer of the regularized Gauss-Newton model in ``B(0, delta)``.

    The best S-FISTA iterate competes with ``d = 0`` and, when
    ``crit_direction`` is given, with scaled steps along it; the latter
    certify the sufficient-decrease bound even when the iteration cap cuts
    S-FISTA short.
    """
    g, H, hn = model.gradient, model.hessian, model.hessian_norm
    x_k = np.asarray(x_k, dtype=float)
    eps = max((1.0 - e3) * required_decrease(eta_bar, delta, hn, c1), EPS_FLOOR)
    spec = SubproblemSpec(g, H, hn, x_k, delta, h, eps, cap, L_h)
    sol = sfista(spec, backend)
    if crit_direction is not None and eta_bar > 0:
        scale = min(1.0, delta)
        u = scale * np.asarray(crit_direction, dtype=float)
        # maximizer of theta*scale*eta - theta^2 * u.H.u / 2 on [0, 1]
        curv = float(u @ H @ u)
        thetas = {1.0}
        if curv > 0:
            thetas.add(min(1.0, scale * eta_bar / curv))
        for theta in thetas:
            cand = theta * u
            if np.linalg.norm(cand) > delta:
                cand *= delta / np.linalg.norm(cand)
            val = objective(g, H, x_k, h, cand)
            if val < sol.objective_value:
                sol = SubproblemSolution(cand, val, sol.iterations_used, sol.mu_used,
                                         sol.iterations_required)
    return sol


def solve_smoothed_trust_region(model: QuadraticModel, h, x_k, delta, gamma,
                                cap=DEFAULT_CAP, L_h=None, backend="auto"):
    """Minimize ``g.s + s.H.s/2 + M_h^{mu(gamma)}(x + s)`` over ``||s|| <= delta``.

    ``objective_value`` is measured on the smoothed objective.  With
    ``L_h == 0`` this is the plain smooth trust-region step.
    """
    g, H, hn = model.gradient, model.hessian, model.hessian_norm
    x_k = np.asarray(x_k, dtype=float)
    L_h = float(h.lipschitz_constant(g.size)) if L_h is None else L_h
    if L_h == 0:
        spec = SubproblemSpec(g, H, hn, x_k, delta, h, gamma, cap, 0.0)
        return sfista(spec, backend)
    mu, K, L = sfista_parameters(gamma, L_h, hn, delta)
    n_iter = min(K, cap)
    d, val = _run(g, H, x_k, delta, L, n_iter, mu, h, True, backend)
    return SubproblemSolution(d, float(val), n_iter, mu, K)
