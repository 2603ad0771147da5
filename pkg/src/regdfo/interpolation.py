"""Linear interpolation models of the residual map and their geometry.

The interpolation set holds ``n + 1`` points ``y_0, ..., y_n`` with
``y_0`` the current iterate.  A linear residual model
``m(x_k + s) = r(x_k) + J s`` is fitted exactly through these points and
turned into a Gauss-Newton quadratic ``p(x_k + s) = 1/2 ||m(x_k + s)||^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

COND_LIMIT = 1e14


class SingularDirectionsError(np.linalg.LinAlgError):
    """The interpolation directions are (numerically) linearly dependent."""


class InterpolationSet:
    """Points and residual values; row 0 is the base point ``x_k``."""

    def __init__(self, points, residuals, radius=None):
        self.points = np.array(points, dtype=float)
        self.residuals = np.array(residuals, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] != self.points.shape[1] + 1:
            raise ValueError("need n+1 points in R^n")
        if self.residuals.shape[0] != self.points.shape[0]:
            raise ValueError("one residual vector per point")
        self.radius = radius

    @classmethod
    def coordinate(cls, x0, delta, evaluator, r0=None):
        """Build ``{x0, x0 + delta e_1, ..., x0 + delta e_n}``."""
        x0 = np.asarray(x0, dtype=float)
        n = x0.size
        pts = np.vstack([x0, x0 + delta * np.eye(n)])
        first = np.asarray(evaluator(x0) if r0 is None else r0, dtype=float)
        res = [first] + [np.asarray(evaluator(p), dtype=float) for p in pts[1:]]
        return cls(pts, np.vstack(res), delta)

    @property
    def n(self):
        return self.points.shape[1]

    @property
    def base(self):
        return self.points[0]

    def directions(self):
        return self.points[1:] - self.points[0]

    def distances(self, center=None):
        c = self.base if center is None else center
        return np.linalg.norm(self.points - c, axis=1)

    def copy(self):
        return InterpolationSet(self.points, self.residuals, self.radius)

    def replace(self, t, y, r):
        self.points[t] = y
        self.residuals[t] = r

    def rebase(self, t):
        """Make point ``t`` the base point (swap with row 0)."""
        if t != 0:
            self.points[[0, t]] = self.points[[t, 0]]
            self.residuals[[0, t]] = self.residuals[[t, 0]]

    def __len__(self):
        return self.points.shape[0]


@dataclass
class ResidualModel:
    residual_at_base: np.ndarray
    jacobian: np.ndarray

    def __call__(self, s):
        return self.residual_at_base + self.jacobian @ s


@dataclass
class QuadraticModel:
    constant: float
    gradient: np.ndarray
    hessian: np.ndarray
    hessian_norm: float

    def __call__(self, s):
        return self.constant + self.gradient @ s + 0.5 * s @ self.hessian @ s


@dataclass
class PoisednessReport:
    lambda_value: float
    worst_index: int
    max_distance: float
    radius: float

    def is_poised(self, lambda_target, containment=1.0):
        return (self.lambda_value <= lambda_target
                and self.max_distance <= containment * self.radius * (1 + 1e-12))


def _check_conditioning(D):
    if not np.all(np.isfinite(D)):
        raise SingularDirectionsError("non-finite interpolation directions")
    sv = np.linalg.svd(D, compute_uv=False)
    if sv[-1] == 0 or sv[0] / sv[-1] > COND_LIMIT:
        raise SingularDirectionsError("interpolation directions are singular")


def build_residual_model(Y, r_values=None):
    """Fit ``J`` so the linear model reproduces ``r`` at every point of ``Y``."""
    R = Y.residuals if r_values is None else np.asarray(r_values, dtype=float)
    if R.shape[0] != len(Y):
        raise ValueError("need one residual vector per interpolation point")
    D = Y.directions()
    _check_conditioning(D)
    # D J^T = R_t - R_0, solved by pivoted QR
    Q, Rf, piv = scipy.linalg.qr(D, pivoting=True)
    rhs = Q.T @ (R[1:] - R[0])
    z = scipy.linalg.solve_triangular(Rf, rhs)
    JT = np.empty_like(z)
    JT[piv] = z
    return ResidualModel(R[0].copy(), JT.T.copy())


def gauss_newton_model(rm, f_at_base=None):
    r0, J = rm.residual_at_base, rm.jacobian
    f0 = 0.5 * float(r0 @ r0) if f_at_base is None else float(f_at_base)
    H = J.T @ J
    H = 0.5 * (H + H.T)
    hnorm = float(max(np.linalg.eigvalsh(H)[-1], 0.0)) if H.size else 0.0
    return QuadraticModel(f0, J.T @ r0, H, hnorm)


def lagrange_polynomials(Y):
    """Affine Lagrange basis as ``(constant, gradient)`` pairs in absolute coordinates.

    ``Lambda_t(y) = constant_t + gradient_t @ y``.
    """
    D = Y.directions()
    _check_conditioning(D)
    W = np.linalg.solve(D, np.eye(Y.n)).T  # row t-1 is grad of Lambda_t, t >= 1
    x0 = Y.base
    grads = np.vstack([-W.sum(axis=0), W])
    consts = np.concatenate([[1.0 + W.sum(axis=0) @ x0], -W @ x0])
    return list(zip(consts, grads))


def _lagrange_arrays(Y):
    polys = lagrange_polynomials(Y)
    c = np.array([p[0] for p in polys])
    G = np.vstack([p[1] for p in polys])
    return c, G


def poisedness(Y, center=None, delta=None):
    """Closed-form ``max_t max_{y in B(center, delta)} |Lambda_t(y)|``."""
    center = Y.base if center is None else np.asarray(center, dtype=float)
    delta = Y.radius if delta is None else delta
    c, G = _lagrange_arrays(Y)
    vals = np.abs(c + G @ center) + delta * np.linalg.norm(G, axis=1)
    t = int(np.argmax(vals))
    return PoisednessReport(float(vals[t]), t, float(Y.distances(center).max()), float(delta))


def _maximizer(c, grad, center, delta):
    ng = np.linalg.norm(grad)
    if ng == 0:
        return center.copy()
    u = grad / ng
    plus, minus = center + delta * u, center - delta * u
    if abs(c + grad @ plus) >= abs(c + grad @ minus):
        return plus
    return minus


def _span_repair(Y, center, delta, evaluator):
    """Replace dependent directions by orthogonal ones; returns #evaluations."""
    n = Y.n
    D = Y.directions()
    basis = []
    bad = []
    scale = max(delta, 1e-300)
    resid = np.zeros(n)
    for t in range(n):
        w = D[t] / scale
        for b in basis:
            w -= (w @ b) * b
        # new component measured in units of delta, so tiny directions count as dependent
        resid[t] = np.linalg.norm(w)
        if resid[t] > 1e-7:
            basis.append(w / resid[t])
        else:
            bad.append(t + 1)
    if not bad:
        # ill-conditioned but no clear culprit: drop the weakest direction
        t = int(np.argmin(resid))
        basis = [b for i, b in enumerate(basis) if i != t]
        bad = [t + 1]
    evals = 0
    for t in bad:
        # complete the basis with a standard vector outside the current span
        best, best_norm = None, -1.0
        for i in range(n):
            w = np.zeros(n)
            w[i] = 1.0
            for b in basis:
                w -= (w @ b) * b
            if np.linalg.norm(w) > best_norm:
                best, best_norm = w, np.linalg.norm(w)
        u = best / best_norm
        basis.append(u)
        y = center + delta * u
        Y.replace(t, y, evaluator(y))
        evals += 1
    return evals


def improve_geometry(Y, center, delta, lambda_target, evaluator, containment=1.0,
                     max_replacements=None):
    """Return a copy of ``Y`` that is Lambda-poised in ``B(center, delta)``.

    Points farther than ``containment * delta`` from the base are moved first;
    afterwards the point with the largest Lagrange maximum is moved to the
    maximizer of its (affine) Lagrange polynomial on the ball.  The base point
    is never moved.  ``evaluator`` is called once per replacement.
    """
    if lambda_target < 1:
        raise ValueError("lambda_target must be >= 1")
    Y = Y.copy()
    center = np.asarray(center, dtype=float)
    n = Y.n
    cap = 4 * (n + 1) if max_replacements is None else max_replacements
    done = 0
    while done < cap:
        try:
            c, G = _lagrange_arrays(Y)
        except SingularDirectionsError:
            done += _span_repair(Y, center, delta, evaluator)
            continue
        dist = Y.distances(center)
        dist[0] = 0.0
        far = int(np.argmax(dist))
        if dist[far] > containment * delta * (1 + 1e-12):
            t = far
        else:
            vals = np.abs(c + G @ center) + delta * np.linalg.norm(G, axis=1)
            if vals.max() <= lambda_target:
                break
            t = int(np.argmax(vals))
            if t == 0:
                # base point fixed: move the point with the steepest Lagrange polynomial
                t = 1 + int(np.argmax(np.linalg.norm(G[1:], axis=1)))
        y = _maximizer(c[t], G[t], center, delta)
        Y.replace(t, y, evaluator(y))
        done += 1
    Y.radius = delta
    return Y


def replacement_index(Y, x_new):
    """Index to drop when ``x_new`` joins ``Y``: max ``||y_t - x_new|| * |Lambda_t(x_new)|``."""
    c, G = _lagrange_arrays(Y)
    lag = np.abs(c + G @ x_new)
    dist = np.linalg.norm(Y.points - x_new, axis=1)
    return int(np.argmax(dist * lag))
