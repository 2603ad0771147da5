"""Data and performance profiles from evaluation histories."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

N_G = 100.0


@dataclass
class ProfileCurve:
    kind: str
    tau: float
    solver: str
    alphas: np.ndarray
    values: np.ndarray


def first_solved_index(history, phi_star, phi0, tau):
    """1-based index of the first ``phi <= phi_star + tau (phi0 - phi_star)``; ``inf`` if none."""
    target = phi_star + tau * (phi0 - phi_star)
    hits = np.flatnonzero(np.asarray(history, dtype=float) <= target)
    return int(hits[0]) + 1 if hits.size else math.inf


def compute_Np(records, tau):
    """``{(solver, instance): N_p}`` for one tolerance.

    An instance is ``(problem, seed)``.  ``Phi*`` per problem is the smallest
    value in any record of that problem, and ``Phi(x0)`` is the first entry
    of each history.
    """
    records = list(records)
    if not records:
        raise ValueError("compute_Np needs at least one record")
    phi_star = {}
    for rec in records:
        if rec.history:
            low = min(rec.history)
            phi_star[rec.problem] = min(phi_star.get(rec.problem, math.inf), low)
    table = {}
    for rec in records:
        key = (rec.solver, (rec.problem, rec.seed))
        if not rec.history:
            table[key] = math.inf
            continue
        table[key] = first_solved_index(rec.history, phi_star[rec.problem], rec.history[0], tau)
    return table


def _by_solver(table):
    out = defaultdict(dict)
    for (solver, inst), n in table.items():
        out[solver][inst] = n
    return out


def default_alphas(kind, upper=None):
    if kind == "data":
        return np.linspace(0.0, N_G if upper is None else upper, 1001)
    return np.logspace(0.0, math.log10(upper or 1e3), 1001)


def data_profile(table, dims, alphas=None, tau=math.nan):
    """``d(alpha) = |{p: N_p <= alpha (n_p + 1)}| / |P|`` per solver.

    ``dims`` maps an instance (or its problem name) to ``n_p``.
    """
    alphas = default_alphas("data") if alphas is None else np.asarray(alphas, dtype=float)
    curves = []
    for solver, row in sorted(_by_solver(table).items()):
        insts = sorted(row, key=repr)
        scaled = np.array([row[p] / (_dim(dims, p) + 1) for p in insts])
        vals = (scaled[None, :] <= alphas[:, None]).mean(axis=1)
        curves.append(ProfileCurve("data", tau, solver, alphas, vals))
    return curves


def performance_profile(table, alphas=None, tau=math.nan):
    """``pi(alpha) = |{p: N_p <= alpha N_p*}| / |P|`` with ``N_p*`` the best solver's count."""
    alphas = default_alphas("performance") if alphas is None else np.asarray(alphas, float)
    rows = _by_solver(table)
    insts = sorted({p for row in rows.values() for p in row}, key=repr)
    best = {p: min(row.get(p, math.inf) for row in rows.values()) for p in insts}
    curves = []
    for solver, row in sorted(rows.items()):
        ratios = []
        for p in insts:
            n = row.get(p, math.inf)
            ratios.append(n / best[p] if math.isfinite(n) else math.inf)
        ratios = np.array(ratios)
        vals = (ratios[None, :] <= alphas[:, None]).mean(axis=1)
        curves.append(ProfileCurve("performance", tau, solver, alphas, vals))
    return curves


def _dim(dims, inst):
    if inst in dims:
        return dims[inst]
    if isinstance(inst, tuple) and inst[0] in dims:
        return dims[inst[0]]
    raise KeyError(f"no dimension for {inst!r}")
