"""Classic nonlinear least-squares test problems and residual noise models.

Residuals follow the Moré-Garbow-Hillstrom definitions with the standard
starting points.  Noise is either multiplicative ``r_i (1 + e_i)`` or
additive ``r_i + e_i`` with ``e_i ~ N(0, sigma^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UnknownProblemError(KeyError):
    pass


class EvaluationFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Problem:
    name: str
    n: int
    m: int
    residual_fn: object
    x0: np.ndarray
    f_star: float | None = None

    def residual(self, x):
        return np.asarray(self.residual_fn(np.asarray(x, dtype=float)), dtype=float)

    def __call__(self, x):
        return self.residual(x)

    def f(self, x):
        r = self.residual(x)
        return 0.5 * float(r @ r)


# data tables ----------------------------------------------------------------

_BARD_Y = np.array([0.14, 0.18, 0.22, 0.25, 0.29, 0.32, 0.35, 0.39, 0.37, 0.58,
                    0.73, 0.96, 1.34, 2.10, 4.39])
_GAUSS_Y = np.array([0.0009, 0.0044, 0.0175, 0.0540, 0.1295, 0.2420, 0.3521, 0.3989,
                     0.3521, 0.2420, 0.1295, 0.0540, 0.0175, 0.0044, 0.0009])
_KOWALIK_U = np.array([4.0, 2.0, 1.0, 0.5, 0.25, 0.167, 0.125, 0.1, 0.0833, 0.0714, 0.0625])
_KOWALIK_Y = np.array([0.1957, 0.1947, 0.1735, 0.1600, 0.0844, 0.0627, 0.0456, 0.0342,
                       0.0323, 0.0235, 0.0246])
_OSB1_Y = np.array([0.844, 0.908, 0.932, 0.936, 0.925, 0.908, 0.881, 0.850, 0.818, 0.784,
                    0.751, 0.718, 0.685, 0.658, 0.628, 0.603, 0.580, 0.558, 0.538, 0.522,
                    0.506, 0.490, 0.478, 0.467, 0.457, 0.448, 0.438, 0.431, 0.424, 0.420,
                    0.414, 0.411, 0.406])
_OSB2_Y = np.array([1.366, 1.191, 1.112, 1.013, 0.991, 0.885, 0.831, 0.847, 0.786, 0.725,
                    0.746, 0.679, 0.608, 0.655, 0.616, 0.606, 0.602, 0.626, 0.651, 0.724,
                    0.649, 0.649, 0.694, 0.644, 0.624, 0.661, 0.612, 0.558, 0.533, 0.495,
                    0.500, 0.423, 0.395, 0.375, 0.372, 0.391, 0.396, 0.405, 0.428, 0.429,
                    0.523, 0.562, 0.607, 0.653, 0.672, 0.708, 0.633, 0.668, 0.645, 0.632,
                    0.591, 0.559, 0.597, 0.625, 0.739, 0.710, 0.729, 0.720, 0.636, 0.581,
                    0.428, 0.292, 0.162, 0.098, 0.054])


# residual maps --------------------------------------------------------------

def rosenbrock(x):
    return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])


def powell_singular(x):
    return np.array([x[0] + 10.0 * x[1],
                     np.sqrt(5.0) * (x[2] - x[3]),
                     (x[1] - 2.0 * x[2]) ** 2,
                     np.sqrt(10.0) * (x[0] - x[3]) ** 2])


def freudenstein_roth(x):
    return np.array([-13.0 + x[0] + ((5.0 - x[1]) * x[1] - 2.0) * x[1],
                     -29.0 + x[0] + ((x[1] + 1.0) * x[1] - 14.0) * x[1]])


def beale(x):
    i = np.arange(1, 4)
    return np.array([1.5, 2.25, 2.625]) - x[0] * (1.0 - x[1] ** i)


def helical_valley(x):
    theta = np.arctan2(x[1], x[0]) / (2.0 * np.pi)
    if x[0] == 0.0:
        theta = 0.25 * np.sign(x[1])
    elif x[0] < 0:
        # MGH branch: atan(x2/x1)/(2 pi) + 1/2 for x1 < 0
        theta = np.arctan(x[1] / x[0]) / (2.0 * np.pi) + 0.5
    return np.array([10.0 * (x[2] - 10.0 * theta),
                     10.0 * (np.hypot(x[0], x[1]) - 1.0),
                     x[2]])


def bard(x):
    u = np.arange(1, 16)
    v = 16 - u
    w = np.minimum(u, v)
    return _BARD_Y - (x[0] + u / (v * x[1] + w * x[2]))


def gaussian(x):
    t = (8 - np.arange(1, 16)) / 2.0
    return x[0] * np.exp(-0.5 * x[1] * (t - x[2]) ** 2) - _GAUSS_Y


def box_3d(x):
    t = 0.1 * np.arange(1, 11)
    return (np.exp(-t * x[0]) - np.exp(-t * x[1])
            - x[2] * (np.exp(-t) - np.exp(-10.0 * t)))


def brown_badly_scaled(x):
    return np.array([x[0] - 1e6, x[1] - 2e-6, x[0] * x[1] - 2.0])


def wood(x):
    return np.array([10.0 * (x[1] - x[0] ** 2),
                     1.0 - x[0],
                     np.sqrt(90.0) * (x[3] - x[2] ** 2),
                     1.0 - x[2],
                     np.sqrt(10.0) * (x[1] + x[3] - 2.0),
                     (x[1] - x[3]) / np.sqrt(10.0)])


def brown_dennis(x):
    t = np.arange(1, 21) / 5.0
    a = x[0] + t * x[1] - np.exp(t)
    b = x[2] + x[3] * np.sin(t) - np.cos(t)
    return a ** 2 + b ** 2


def osborne_1(x):
    t = 10.0 * np.arange(33)
    return _OSB1_Y - (x[0] + x[1] * np.exp(-x[3] * t) + x[2] * np.exp(-x[4] * t))


def jennrich_sampson(x):
    i = np.arange(1, 11)
    return 2.0 + 2.0 * i - (np.exp(i * x[0]) + np.exp(i * x[1]))


def kowalik_osborne(x):
    u = _KOWALIK_U
    return _KOWALIK_Y - x[0] * (u * u + x[1] * u) / (u * u + x[2] * u + x[3])


def osborne_2(x):
    t = np.arange(65) / 10.0
    model = (x[0] * np.exp(-t * x[4])
             + x[1] * np.exp(-(t - x[8]) ** 2 * x[5])
             + x[2] * np.exp(-(t - x[9]) ** 2 * x[6])
             + x[3] * np.exp(-(t - x[10]) ** 2 * x[7]))
    return _OSB2_Y - model


def watson(x):
    n = x.size
    t = np.arange(1, 30) / 29.0
    powers = t[:, None] ** np.arange(n)[None, :]
    s1 = powers[:, : n - 1] @ (np.arange(1, n) * x[1:])
    s2 = powers @ x
    return np.concatenate([s1 - s2 ** 2 - 1.0, [x[0], x[1] - x[0] ** 2 - 1.0]])


def linear_full_rank(x, m=45):
    out = np.full(m, -2.0 * x.sum() / m - 1.0)
    out[: x.size] += x
    return out


_REGISTRY = {}


def _register(name, fn, x0, m, f_star=None):
    x0 = np.asarray(x0, dtype=float)
    x0.setflags(write=False)
    _REGISTRY[name] = Problem(name, x0.size, m, fn, x0, f_star)


_register("rosenbrock", rosenbrock, [-1.2, 1.0], 2, 0.0)
_register("powell_singular", powell_singular, [3.0, -1.0, 0.0, 1.0], 4, 0.0)
_register("freudenstein_roth", freudenstein_roth, [0.5, -2.0], 2, 0.5 * 48.9842536792400)
_register("beale", beale, [1.0, 1.0], 3, 0.0)
_register("helical_valley", helical_valley, [-1.0, 0.0, 0.0], 3, 0.0)
_register("bard", bard, [1.0, 1.0, 1.0], 15, 0.5 * 8.21487730657897e-3)
_register("gaussian", gaussian, [0.4, 1.0, 0.0], 15, 0.5 * 1.12793276961912e-8)
_register("box_3d", box_3d, [0.0, 10.0, 20.0], 10, 0.0)
_register("brown_badly_scaled", brown_badly_scaled, [1.0, 1.0], 3, 0.0)
_register("wood", wood, [-3.0, -1.0, -3.0, -1.0], 6, 0.0)
_register("brown_dennis", brown_dennis, [25.0, 5.0, -5.0, -1.0], 20, 0.5 * 85822.2016263563)
_register("osborne_1", osborne_1, [0.5, 1.5, -1.0, 0.01, 0.02], 33, 0.5 * 5.46489469748e-5)
_register("jennrich_sampson", jennrich_sampson, [0.3, 0.4], 10, 0.5 * 124.362182355615)
_register("kowalik_osborne", kowalik_osborne, [0.25, 0.39, 0.415, 0.39], 11,
          0.5 * 3.07505603849e-4)
_register("osborne_2", osborne_2,
          [1.3, 0.65, 0.65, 0.7, 0.6, 3.0, 5.0, 7.0, 2.0, 4.5, 5.5], 65,
          0.5 * 4.01377362935e-2)
_register("watson_12", watson, 0.5 * np.ones(12), 31, 0.5 * 4.72238e-10)
_register("linear_full_rank", linear_full_rank, np.ones(9), 45, 0.5 * 36.0)


def list_problems():
    return list(_REGISTRY)


def get_problem(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownProblemError(
            f"unknown problem {name!r}; choose from {', '.join(_REGISTRY)}") from None


# noise ----------------------------------------------------------------------

NOISE_KINDS = ("none", "multiplicative", "additive")


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}")
        if not self.sigma >= 0:
            raise ValueError("noise sigma must be nonnegative")

    def draws(self, index, m):
        """Standard normal draws for evaluation ``index``; entry ``i`` is component ``i``."""
        # counter-based stream keyed by (seed, index): evaluation order never matters
        bits = np.random.Philox(np.random.SeedSequence([self.seed, index]))
        return np.random.Generator(bits).standard_normal(m)

    def apply(self, r, index):
        r = np.asarray(r, dtype=float)
        if self.kind == "none" or self.sigma == 0:
            return r.copy()
        eps = self.sigma * self.draws(index, r.size)
        if self.kind == "multiplicative":
            return r * (1.0 + eps)
        return r + eps

    def spec(self):
        if self.kind == "none":
            return "none"
        return f"{'mult' if self.kind == 'multiplicative' else 'add'}:{self.sigma!r}"


def parse_noise(text, seed=0):
    """Parse ``none``, ``mult:<sigma>`` or ``add:<sigma>``."""
    if isinstance(text, NoiseModel):
        return text
    kind, _, arg = str(text).strip().partition(":")
    kind = {"none": "none", "mult": "multiplicative", "multiplicative": "multiplicative",
            "add": "additive", "additive": "additive"}.get(kind.lower())
    if kind is None:
        raise ValueError(f"bad noise spec {text!r}; use none, mult:<sigma> or add:<sigma>")
    if kind == "none":
        return NoiseModel("none", 0.0, seed)
    try:
        sigma = float(arg)
    except ValueError:
        raise ValueError(f"bad noise level in {text!r}") from None
    return NoiseModel(kind, sigma, seed)


class EvaluationStream:
    """Counts evaluations so each call draws fresh, reproducible noise."""

    def __init__(self):
        self.index = 0

    def next(self):
        i = self.index
        self.index += 1
        return i


def evaluate(problem, x, noise=None, stream=None):
    """Residual at ``x``, perturbed by ``noise`` using the next index of ``stream``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise EvaluationFailure("non-finite point")
    with np.errstate(all="ignore"):
        r = problem.residual(x)
    if not np.all(np.isfinite(r)):
        raise EvaluationFailure(f"non-finite residual for {problem.name}")
    if noise is None or noise.kind == "none":
        return r
    stream = stream if stream is not None else EvaluationStream()
    return noise.apply(r, stream.next())


class NoisyProblem:
    """Residual callable with a private evaluation stream (one per solver run)."""

    def __init__(self, problem, noise=None):
        self.problem = problem
        self.noise = noise or NoiseModel()
        self.stream = EvaluationStream()
        self.x0 = problem.x0
        self.name = problem.name

    def residual(self, x):
        return evaluate(self.problem, x, self.noise, self.stream)

    __call__ = residual
