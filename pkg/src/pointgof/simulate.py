"""Reproducible samplers for null models and power-study alternatives.

Every realization is drawn from its own counter-based generator (Philox) whose
key is derived from ``(seed, stream)``.  A stream index is a tuple of
non-negative integers, so nested Monte Carlo loops can address e.g.
``(outer, inner)`` substreams without any shared generator state; batches
therefore give identical results whatever order or process they run in.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numba
import numpy as np

from .errors import InvalidSpec, SSIFailure
from .pattern import PointPattern, Window

__all__ = [
    "RngSeed",
    "make_rng",
    "Binomial",
    "Poisson",
    "MaternCluster",
    "Thomas",
    "Strauss",
    "SSI",
    "InhomPoisson",
    "ModelSpec",
    "simulate",
    "simulate_many",
    "condition_on_count",
    "MODEL_NAMES",
    "model_from_params",
    "STRAUSS_STEPS",
    "SSI_MAX_REJECTIONS",
]

STRAUSS_STEPS = 100_000
SSI_MAX_REJECTIONS = 10_000
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSeed:
    """Master seed plus a substream address."""

    seed: int
    stream: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _MASK64:
            raise InvalidSpec("seed must be an unsigned 64-bit integer")
        stream = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        if any(int(s) < 0 for s in stream):
            raise InvalidSpec("stream indices must be non-negative")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream", tuple(int(s) for s in stream))

    def child(self, *index) -> "RngSeed":
        return RngSeed(self.seed, self.stream + tuple(index))


def make_rng(rng: RngSeed | int) -> np.random.Generator:
    if not isinstance(rng, RngSeed):
        rng = RngSeed(int(rng))
    ss = np.random.SeedSequence(rng.seed, spawn_key=rng.stream)
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# model specifications


def _nonneg(name, value):
    if not (math.isfinite(value) and value >= 0):
        raise InvalidSpec(f"{name} must be finite and >= 0, got {value}")


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise InvalidSpec(f"{name} must be finite and > 0, got {value}")


@dataclass(frozen=True)
class Binomial:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise InvalidSpec(f"binomial point count must be a non-negative integer, got {self.n}")


@dataclass(frozen=True)
class Poisson:
    lam: float

    def __post_init__(self):
        _nonneg("lambda", self.lam)


@dataclass(frozen=True)
class MaternCluster:
    kappa: float
    radius: float
    mu: float

    def __post_init__(self):
        _nonneg("kappa", self.kappa)
        _positive("radius", self.radius)
        _nonneg("mu", self.mu)


@dataclass(frozen=True)
class Thomas:
    kappa: float
    sigma: float
    mu: float

    def __post_init__(self):
        _nonneg("kappa", self.kappa)
        _positive("sigma", self.sigma)
        _nonneg("mu", self.mu)


@dataclass(frozen=True)
class Strauss:
    beta: float
    gamma: float
    radius: float

    def __post_init__(self):
        _nonneg("beta", self.beta)
        _positive("radius", self.radius)
        if not (0.0 <= self.gamma <= 1.0):
            raise InvalidSpec(f"Strauss gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class SSI:
    n: int
    r_inhibit: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise InvalidSpec(f"SSI point count must be a non-negative integer, got {self.n}")
        _positive("r_inhibit", self.r_inhibit)


@dataclass(frozen=True)
class InhomPoisson:
    """Poisson process with intensity ``intensity_fn(x, y)`` bounded by ``rho_max``.

    ``intensity_fn`` receives coordinate arrays and must return values in
    ``[0, rho_max]``.
    """

    rho_max: float
    intensity_fn: Callable

    def __post_init__(self):
        _nonneg("rho_max", self.rho_max)
        if not callable(self.intensity_fn):
            raise InvalidSpec("intensity_fn must be callable")


ModelSpec = Union[Binomial, Poisson, MaternCluster, Thomas, Strauss, SSI, InhomPoisson]


# --------------------------------------------------------------------------
# samplers


def _uniform(gen, window: Window, k: int) -> np.ndarray:
    u = gen.random((k, 2))
    u[:, 0] = window.x_min + u[:, 0] * window.width
    u[:, 1] = window.y_min + u[:, 1] * window.height
    return u


def _cluster(gen, window, kappa, mu, reach, offsets) -> np.ndarray:
    outer = window.dilate(reach)
    n_par = gen.poisson(kappa * outer.area)
    parents = _uniform(gen, outer, n_par)
    counts = gen.poisson(mu, size=n_par)
    total = int(counts.sum())
    centres = np.repeat(parents, counts, axis=0)
    pts = centres + offsets(gen, total)
    return pts[window.contains(pts)]


def _disc_offsets(radius):
    def draw(gen, k):
        rr = radius * np.sqrt(gen.random(k))
        th = 2 * np.pi * gen.random(k)
        return np.column_stack([rr * np.cos(th), rr * np.sin(th)])

    return draw


def _gauss_offsets(sigma):
    def draw(gen, k):
        return gen.normal(0.0, sigma, size=(k, 2))

    return draw


@numba.njit(cache=True)
def _strauss_chain(x0, y0, beta_area, gamma, r2, move, ux, uy, uacc, upick, cap):
    xs = np.empty(cap)
    ys = np.empty(cap)
    n = x0.size
    for i in range(n):
        xs[i] = x0[i]
        ys[i] = y0[i]
    for step in range(move.size):
        if move[step] < 0.5:
            # birth at (ux, uy)
            if n >= cap:
                continue
            t = 0
            for j in range(n):
                dx = xs[j] - ux[step]
                dy = ys[j] - uy[step]
                if dx * dx + dy * dy <= r2:
                    t += 1
            if t > 0 and gamma == 0.0:
                continue
            ratio = beta_area * gamma**t / (n + 1)
            if uacc[step] < ratio:
                xs[n] = ux[step]
                ys[n] = uy[step]
                n += 1
        else:
            if n == 0:
                continue
            k = int(upick[step] * n)
            if k >= n:
                k = n - 1
            t = 0
            for j in range(n):
                if j == k:
                    continue
                dx = xs[j] - xs[k]
                dy = ys[j] - ys[k]
                if dx * dx + dy * dy <= r2:
                    t += 1
            denom = beta_area * gamma**t
            if denom <= 0.0 or uacc[step] < n / denom:
                n -= 1
                xs[k] = xs[n]
                ys[k] = ys[n]
    return xs[:n].copy(), ys[:n].copy()


def _strauss(gen, window: Window, spec: Strauss, steps: int) -> np.ndarray:
    beta_area = spec.beta * window.area
    if beta_area == 0:
        return np.zeros((0, 2))
    move = gen.random(steps)
    births = _uniform(gen, window, steps)
    uacc = gen.random(steps)
    upick = gen.random(steps)
    # generous cap: Poisson(beta |W|) upper tail plus slack
    cap = int(beta_area + 12 * math.sqrt(beta_area) + 64)
    xs, ys = _strauss_chain(
        np.zeros(0), np.zeros(0), beta_area, float(spec.gamma), spec.radius**2,
        move, births[:, 0].copy(), births[:, 1].copy(), uacc, upick, cap,
    )
    return np.column_stack([xs, ys])


def _ssi(gen, window: Window, spec: SSI) -> np.ndarray:
    r2 = spec.r_inhibit**2
    pts = np.empty((spec.n, 2))
    k = 0
    rejections = 0
    batch = 256
    while k < spec.n:
        cand = _uniform(gen, window, batch)
        for c in cand:
            if k and np.min(np.sum((pts[:k] - c) ** 2, axis=1)) < r2:
                rejections += 1
                if rejections >= SSI_MAX_REJECTIONS:
                    raise SSIFailure(
                        f"placed {k} of {spec.n} points before {SSI_MAX_REJECTIONS} "
                        "consecutive rejections"
                    )
                continue
            pts[k] = c
            k += 1
            rejections = 0
            if k == spec.n:
                break
    return pts


def simulate(spec: ModelSpec, window: Window, rng: RngSeed | int, *, strauss_steps: int = STRAUSS_STEPS) -> PointPattern:
    """Draw one realization of ``spec`` in ``window``.

    The result depends only on ``(spec, window, rng)``.
    """
    gen = make_rng(rng)
    if isinstance(spec, Binomial):
        pts = _uniform(gen, window, int(spec.n))
    elif isinstance(spec, Poisson):
        pts = _uniform(gen, window, gen.poisson(spec.lam * window.area))
    elif isinstance(spec, MaternCluster):
        pts = _cluster(gen, window, spec.kappa, spec.mu, spec.radius, _disc_offsets(spec.radius))
    elif isinstance(spec, Thomas):
        pts = _cluster(gen, window, spec.kappa, spec.mu, 4 * spec.sigma, _gauss_offsets(spec.sigma))
    elif isinstance(spec, Strauss):
        pts = _strauss(gen, window, spec, strauss_steps)
    elif isinstance(spec, SSI):
        pts = _ssi(gen, window, spec)
    elif isinstance(spec, InhomPoisson):
        prop = _uniform(gen, window, gen.poisson(spec.rho_max * window.area))
        if len(prop):
            rho = np.asarray(spec.intensity_fn(prop[:, 0], prop[:, 1]), dtype=float)
            if np.any(rho < 0) or np.any(rho > spec.rho_max * (1 + 1e-12)):
                raise InvalidSpec("intensity_fn values must lie in [0, rho_max]")
            keep = gen.random(len(prop)) * spec.rho_max < rho
            prop = prop[keep]
        pts = prop
    else:
        raise InvalidSpec(f"unknown model specification {spec!r}")
    return PointPattern(pts, window)


def simulate_many(spec: ModelSpec, window: Window, rng: RngSeed, count: int, start: int = 1):
    """Realizations on substreams ``rng.child(start) ... rng.child(start + count - 1)``."""
    return [simulate(spec, window, rng.child(start + i)) for i in range(count)]


def condition_on_count(spec: ModelSpec, observed_n: int) -> ModelSpec:
    """Turn a homogeneous Poisson null into the binomial process with ``observed_n`` points.

    The point count is sufficient for the intensity, so the conditioned null is
    simple.  Other models are returned unchanged with a warning.
    """
    if isinstance(spec, Poisson):
        return Binomial(int(observed_n))
    warnings.warn(
        f"condition_on_count only applies to Poisson nulls; {type(spec).__name__} left unchanged",
        stacklevel=2,
    )
    return spec


MODEL_NAMES = ("binomial", "poisson", "matclust", "matern", "thomas", "strauss", "ssi")
_MODEL_KEYS = {
    "binomial": ("n",),
    "poisson": ("lambda",),
    "matclust": ("kappa", "radius", "mu"),
    "thomas": ("kappa", "sigma", "mu"),
    "strauss": ("beta", "gamma", "radius"),
    "ssi": ("n", "r_inhibit"),
}


def model_from_params(name: str, params: dict) -> ModelSpec:
    """Build a model from its name and a flat parameter mapping (missing keys are errors)."""
    name = str(name).lower()
    if name == "matern":
        name = "matclust"
    if name not in _MODEL_KEYS:
        raise InvalidSpec(f"unknown model {name!r}; choose from {MODEL_NAMES}")
    missing = [k for k in _MODEL_KEYS[name] if params.get(k) is None]
    if missing:
        raise InvalidSpec(f"model {name!r} needs {', '.join(missing)}")
    try:
        v = {k: float(params[k]) for k in _MODEL_KEYS[name]}
    except (TypeError, ValueError) as exc:
        raise InvalidSpec(f"non-numeric parameter for model {name!r}: {exc}") from None
    if name == "binomial":
        return Binomial(int(v["n"]) if v["n"] == int(v["n"]) else v["n"])
    if name == "poisson":
        return Poisson(v["lambda"])
    if name == "matclust":
        return MaternCluster(v["kappa"], v["radius"], v["mu"])
    if name == "thomas":
        return Thomas(v["kappa"], v["sigma"], v["mu"])
    if name == "strauss":
        return Strauss(v["beta"], v["gamma"], v["radius"])
    return SSI(int(v["n"]) if v["n"] == int(v["n"]) else v["n"], v["r_inhibit"])
