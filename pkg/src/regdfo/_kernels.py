"""Compiled inner loop for (smoothed) FISTA over a Euclidean ball.

Regularizer kinds: 0 zero, 1 l1, 2 box indicator, 3 ball indicator.
"""
import numpy as np
from numba import njit

_DYKSTRA_ITERS = 200


@njit(cache=True)
def _proj_ball(v, r):
    nv = np.sqrt(np.sum(v * v))
    if nv > r:
        return v * (r / nv)
    return v.copy()


@njit(cache=True)
def _proj_dom(v, x, kind, lo, hi, center, radius):
    # projection of v onto dom(h) - x
    if kind == 2:
        return np.minimum(np.maximum(x + v, lo), hi) - x
    if kind == 3:
        w = x + v - center
        nw = np.sqrt(np.sum(w * w))
        if nw > radius:
            w = w * (radius / nw)
        return center + w - x
    return v.copy()


@njit(cache=True)
def _project_feasible(v, r, x, kind, lo, hi, center, radius):
    """Projection onto B(0, r) intersected with dom(h) - x, exactly feasible output."""
    if kind != 2 and kind != 3:
        return _proj_ball(v, r)
    # Dykstra alternating projections
    z = v.copy()
    p = np.zeros_like(v)
    q = np.zeros_like(v)
    for _ in range(_DYKSTRA_ITERS):
        yb = _proj_ball(z + p, r)
        p = z + p - yb
        znew = _proj_dom(yb + q, x, kind, lo, hi, center, radius)
        q = yb + q - znew
        diff = np.sqrt(np.sum((znew - z) ** 2))
        z = znew
        if diff <= 1e-15 * (1.0 + r):
            break
    # repair: into dom(h) - x, then shrink toward 0 (feasible since x in dom h)
    z = _proj_dom(z, x, kind, lo, hi, center, radius)
    return _proj_ball(z, r)


@njit(cache=True)
def _h_value(z, kind, lam):
    if kind == 1:
        return lam * np.sum(np.abs(z))
    return 0.0


@njit(cache=True)
def _l1_env(z, lam, mu):
    # Moreau envelope of lam*||.||_1 (Huber) and its gradient
    val = 0.0
    grad = np.empty_like(z)
    t = mu * lam
    for i in range(z.size):
        a = abs(z[i])
        if a <= t:
            val += z[i] * z[i] / (2.0 * mu)
            grad[i] = z[i] / mu
        else:
            val += lam * (a - 0.5 * t)
            grad[i] = lam if z[i] > 0 else -lam
    return val, grad


@njit(cache=True)
def _objective(g, H, x, d, kind, lam, mu, env_objective):
    n = d.size
    val = 0.0
    for i in range(n):
        hd = 0.0
        for j in range(n):
            hd += H[i, j] * d[j]
        val += d[i] * (g[i] + 0.5 * hd)
    if kind == 1:
        t = mu * lam
        for i in range(n):
            z = x[i] + d[i]
            a = abs(z)
            if env_objective and a <= t:
                val += z * z / (2.0 * mu)
            elif env_objective:
                val += lam * (a - 0.5 * t)
            else:
                val += lam * a
    return val


@njit(cache=True)
def fista_ball(g, H, x, r, L, n_iter, mu, kind, lam, lo, hi, center, radius, env_objective, d0):
    """Run ``n_iter`` FISTA steps on ``g.d + d.H.d/2 + h_mu(x + d)`` over ``||d|| <= r``.

    ``mu > 0`` smooths an l1 term by its Moreau envelope.  The iteration
    starts at the feasible point ``d0``.  Returns the best iterate
    (``d = 0`` and ``d0`` included) under the exact objective, or under the
    envelope objective when ``env_objective`` is set.
    """
    n = g.size
    d = d0.copy()
    y = d0.copy()
    v = np.empty(n)
    t = 1.0
    best_d = np.zeros(n)
    best_val = _objective(g, H, x, best_d, kind, lam, mu, env_objective)
    val0 = _objective(g, H, x, d, kind, lam, mu, env_objective)
    if val0 < best_val:
        best_val = val0
        best_d[:] = d
    smooth_l1 = kind == 1 and mu > 0.0
    thresh = mu * lam
    for _ in range(n_iter):
        # gradient step from y into v
        for i in range(n):
            gi = g[i]
            for j in range(n):
                gi += H[i, j] * y[j]
            if smooth_l1:
                z = x[i] + y[i]
                if z > thresh:
                    gi += lam
                elif z < -thresh:
                    gi -= lam
                else:
                    gi += z / mu
            v[i] = y[i] - gi / L
        if kind == 2 or kind == 3:
            d_new = _project_feasible(v, r, x, kind, lo, hi, center, radius)
        else:
            nv = 0.0
            for i in range(n):
                nv += v[i] * v[i]
            nv = np.sqrt(nv)
            scale = r / nv if nv > r else 1.0
            d_new = v * scale
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        for i in range(n):
            y[i] = d_new[i] + beta * (d_new[i] - d[i])
            d[i] = d_new[i]
        t = t_new
        val = _objective(g, H, x, d, kind, lam, mu, env_objective)
        if val < best_val:
            best_val = val
            best_d[:] = d
    return best_d, best_val
