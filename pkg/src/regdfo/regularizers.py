"""Convex regularizers with proximal maps and Moreau envelopes.

Every regularizer exposes ``value``, ``prox`` and ``moreau``.  Indicator
regularizers (``BallIndicator``, ``BoxIndicator``) raise
:class:`OutsideDomainError` when evaluated outside their set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class OutsideDomainError(ValueError):
    """Raised when an indicator regularizer is evaluated outside its set."""


@dataclass(frozen=True)
class MoreauEvaluation:
    envelope_value: float
    envelope_gradient: np.ndarray
    prox_point: np.ndarray
    mu: float


class Regularizer:
    """Base class for the convex term ``h``.

    Subclasses implement ``value`` and ``prox``; the Moreau envelope is
    derived from the proximal point.
    """

    lower_bound = 0.0
    is_indicator = False
    # integer tag understood by the compiled subproblem kernel, -1 = unsupported
    kernel_kind = -1

    def value(self, x):
        raise NotImplementedError

    def prox(self, mu, y):
        raise NotImplementedError

    def lipschitz_constant(self, n):
        raise NotImplementedError

    def contains(self, x):
        return True

    def moreau(self, mu, x):
        if mu <= 0:
            raise ValueError("mu must be positive")
        x = np.asarray(x, dtype=float)
        p = self.prox(mu, x)
        diff = x - p
        env = self.value(p) + diff @ diff / (2.0 * mu)
        return MoreauEvaluation(float(env), diff / mu, p, float(mu))

    def kernel_params(self, n):
        """Return ``(lam, lo, hi, center, radius)`` arrays for the kernel."""
        z = np.zeros(n)
        return 0.0, z, z, z, 0.0

    def spec(self):
        raise NotImplementedError


class ZeroRegularizer(Regularizer):
    kernel_kind = 0

    def value(self, x):
        return 0.0

    def prox(self, mu, y):
        if mu <= 0:
            raise ValueError("mu must be positive")
        return np.array(y, dtype=float)

    def lipschitz_constant(self, n):
        return 0.0

    def spec(self):
        return "zero"

    def __repr__(self):
        return "ZeroRegularizer()"


class L1Regularizer(Regularizer):
    """``h(x) = lam * ||x||_1``."""

    kernel_kind = 1

    def __init__(self, lam=1.0):
        if lam < 0:
            raise ValueError("l1 weight must be nonnegative")
        self.lam = float(lam)

    def value(self, x):
        return self.lam * float(np.abs(x).sum())

    def prox(self, mu, y):
        if mu <= 0:
            raise ValueError("mu must be positive")
        y = np.asarray(y, dtype=float)
        return np.sign(y) * np.maximum(np.abs(y) - mu * self.lam, 0.0)

    def lipschitz_constant(self, n):
        # tight Euclidean constant: ||sign vector||_2 = sqrt(n)
        return self.lam * np.sqrt(n)

    def kernel_params(self, n):
        z = np.zeros(n)
        return self.lam, z, z, z, 0.0

    def spec(self):
        return f"l1:{self.lam!r}"

    def __repr__(self):
        return f"L1Regularizer(lam={self.lam!r})"


class BallIndicator(Regularizer):
    """Indicator of the closed Euclidean ball ``B(center, radius)``."""

    is_indicator = True
    kernel_kind = 3

    def __init__(self, radius, center=None):
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        self.radius = float(radius)
        self.center = None if center is None else np.asarray(center, dtype=float)

    def _center(self, n):
        return np.zeros(n) if self.center is None else self.center

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self._center(x.size)) <= self.radius * (1 + tol) + tol

    def value(self, x):
        if not self.contains(x):
            raise OutsideDomainError("point outside ball")
        return 0.0

    def prox(self, mu, y):
        if mu <= 0:
            raise ValueError("mu must be positive")
        y = np.asarray(y, dtype=float)
        c = self._center(y.size)
        v = y - c
        nv = np.linalg.norm(v)
        if nv <= self.radius:
            return y.copy()
        return c + v * (self.radius / nv)

    def lipschitz_constant(self, n):
        return 0.0

    def kernel_params(self, n):
        z = np.zeros(n)
        return 0.0, z, z, self._center(n).astype(float), self.radius

    def spec(self):
        return f"ball:{self.radius!r}"

    def __repr__(self):
        return f"BallIndicator(radius={self.radius!r})"


class BoxIndicator(Regularizer):
    """Indicator of the box ``lo <= x <= hi`` (scalars broadcast)."""

    is_indicator = True
    kernel_kind = 2

    def __init__(self, lo, hi):
        lo_a, hi_a = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        if np.any(lo_a > hi_a):
            raise ValueError("box requires lo <= hi")
        self.lo, self.hi = lo_a, hi_a

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def value(self, x):
        if not self.contains(x):
            raise OutsideDomainError("point outside box")
        return 0.0

    def prox(self, mu, y):
        if mu <= 0:
            raise ValueError("mu must be positive")
        return np.clip(np.asarray(y, dtype=float), self.lo, self.hi)

    def lipschitz_constant(self, n):
        return 0.0

    def kernel_params(self, n):
        z = np.zeros(n)
        lo = np.broadcast_to(self.lo, (n,)).astype(float)
        hi = np.broadcast_to(self.hi, (n,)).astype(float)
        return 0.0, lo, hi, z, 0.0

    def spec(self):
        return f"box:{float(np.min(self.lo))!r},{float(np.max(self.hi))!r}"

    def __repr__(self):
        return f"BoxIndicator(lo={self.lo!r}, hi={self.hi!r})"


# Functional aliases


def value(h, x):
    return h.value(x)


def prox(h, mu, y):
    return h.prox(mu, y)


def moreau(h, mu, x):
    return h.moreau(mu, x)


def parse_regularizer(text):
    """Parse ``zero``, ``l1:<lambda>``, ``ball:<radius>`` or ``box:<lo>,<hi>``."""
    if isinstance(text, Regularizer):
        return text
    kind, _, arg = str(text).strip().partition(":")
    kind = kind.lower()
    try:
        if kind == "zero":
            return ZeroRegularizer()
        if kind == "l1":
            return L1Regularizer(float(arg) if arg else 1.0)
        if kind == "ball":
            return BallIndicator(float(arg))
        if kind == "box":
            lo, hi = arg.split(",")
            return BoxIndicator(float(lo), float(hi))
    except ValueError as exc:
        raise ValueError(f"bad regularizer spec {text!r}: {exc}") from None
    raise ValueError(f"unknown regularizer {text!r}")
