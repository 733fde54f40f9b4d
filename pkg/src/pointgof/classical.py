"""Nonparametric estimators of the classical functional summary statistics.

K, L and the pair correlation function use translation edge correction by
default; F and G (and hence G-star and J) use the border (reduced-sample)
correction.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import BandwidthNonpositive, ConfigError, NoValidTestLocations, TooFewPoints
from .pattern import (
    EvalGrid,
    PointPattern,
    SummaryCurve,
    empty_space_distances,
    nn_distances,
    lattice_locations,
)

__all__ = [
    "EDGE_CORRECTIONS",
    "intensity",
    "estimate_K",
    "estimate_L",
    "estimate_pcf",
    "estimate_F",
    "estimate_G",
    "estimate_G_star",
    "estimate_J",
    "default_bandwidth",
    "DEFAULT_TEST_GRID_SIDE",
]

EDGE_CORRECTIONS = ("translation", "border", "none")
DEFAULT_TEST_GRID_SIDE = 128


def intensity(p: PointPattern) -> float:
    return p.n / p.window.area


def _check_corr(corr: str) -> str:
    corr = corr.lower()
    if corr not in EDGE_CORRECTIONS:
        raise ConfigError(f"unknown edge correction {corr!r}; choose from {EDGE_CORRECTIONS}")
    return corr


def _pairs(p: PointPattern, r_cut: float):
    """Unordered pairs i < j within ``r_cut``: indices, distances and absolute offsets."""
    tree = cKDTree(p.points)
    ij = tree.query_pairs(r_cut, output_type="ndarray")
    if ij.size == 0:
        z = np.zeros(0)
        return np.zeros(0, int), np.zeros(0, int), z, z, z
    i, j = ij[:, 0], ij[:, 1]
    delta = p.points[i] - p.points[j]
    d = np.hypot(delta[:, 0], delta[:, 1])
    return i, j, d, np.abs(delta[:, 0]), np.abs(delta[:, 1])


def _squared_intensity(p: PointPattern) -> float:
    # n(n-1)/|W|^2 makes the estimators ratio-unbiased under the binomial null
    n = p.n
    return n * (n - 1) / p.window.area**2


def _translation_weights(p, adx, ady):
    w = p.window
    return w.area / ((w.width - adx) * (w.height - ady))


def _check_n(p, k=2):
    if p.n < k:
        raise TooFewPoints(f"need at least {k} points, got {p.n}")


def estimate_K(p: PointPattern, grid: EvalGrid, corr: str = "translation") -> SummaryCurve:
    """Ripley's K function."""
    _check_n(p)
    corr = _check_corr(corr)
    r = grid.r_values
    i, j, d, adx, ady = _pairs(p, grid.r_max)
    area = p.window.area
    if corr == "border":
        # outer sum restricted to points at least r from the boundary
        b = p.window.boundary_distance(p.points)
        n_ret = (b[None, :] >= r[:, None]).sum(axis=1)
        src = np.concatenate([i, j])
        dd = np.concatenate([d, d])
        bsrc = b[src]
        counts = np.array([np.count_nonzero((dd <= rk) & (bsrc >= rk)) for rk in r], dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            K = counts / (np.maximum(n_ret, 1) * (p.n / area))
        return SummaryCurve(grid, K, "K", defined=n_ret > 0)
    wts = _translation_weights(p, adx, ady) if corr == "translation" else np.ones_like(d)
    order = np.argsort(d)
    cum = np.concatenate([[0.0], np.cumsum(wts[order])])
    idx = np.searchsorted(d[order], r, side="right")
    # each unordered pair counts twice in the ordered sum
    K = 2.0 * cum[idx] / (_squared_intensity(p) * area)
    return SummaryCurve(grid, K, "K")


def estimate_L(p: PointPattern, grid: EvalGrid, corr: str = "translation") -> SummaryCurve:
    """Besag's L function, ``sqrt(K / pi)``."""
    K = estimate_K(p, grid, corr)
    L = np.sqrt(np.maximum(K.values, 0.0))
    L = L / np.sqrt(np.pi)
    return SummaryCurve(grid, L, "L", defined=K.defined)


def default_bandwidth(p: PointPattern) -> float:
    return 0.15 / np.sqrt(intensity(p))


def _epanechnikov(u, b):
    return np.where(np.abs(u) <= b, 0.75 / b * (1.0 - (u / b) ** 2), 0.0)


def estimate_pcf(p: PointPattern, grid: EvalGrid, corr: str = "translation", bandwidth: float | None = None) -> SummaryCurve:
    """Kernel estimate of the pair correlation function (Epanechnikov kernel).

    The estimate is undefined at ``r = 0``.
    """
    _check_n(p)
    corr = _check_corr(corr)
    if corr == "border":
        raise ConfigError("pcf supports 'translation' or 'none' edge correction")
    b = default_bandwidth(p) if bandwidth is None else float(bandwidth)
    if not b > 0:
        raise BandwidthNonpositive(f"bandwidth must be positive, got {b}")
    r = grid.r_values
    i, j, d, adx, ady = _pairs(p, grid.r_max + b)
    wts = _translation_weights(p, adx, ady) if corr == "translation" else np.ones_like(d)
    vals = np.zeros(len(r))
    if d.size:
        order = np.argsort(d)
        d_s, w_s = d[order], wts[order]
        lo = np.searchsorted(d_s, r - b, side="left")
        hi = np.searchsorted(d_s, r + b, side="right")
        for k in range(len(r)):
            if hi[k] > lo[k]:
                seg = slice(lo[k], hi[k])
                vals[k] = np.dot(w_s[seg], _epanechnikov(r[k] - d_s[seg], b))
    positive = r > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        g = 2.0 * vals / (2 * np.pi * r * _squared_intensity(p) * p.window.area)
    return SummaryCurve(grid, np.where(positive, g, np.nan), "pcf", defined=positive)


def _border_cdf(dist, bdist, r):
    """Reduced-sample estimate of P(dist <= r) among locations with bdist >= r."""
    order = np.argsort(bdist)
    b_s = bdist[order]
    d_s = dist[order]
    vals = np.full(len(r), np.nan)
    counts = np.empty(len(r), dtype=int)
    for k, rk in enumerate(r):
        sub = d_s[np.searchsorted(b_s, rk, side="left"):]
        counts[k] = sub.size
        if sub.size:
            vals[k] = np.count_nonzero(sub <= rk) / sub.size
    return vals, counts


def estimate_F(p: PointPattern, grid: EvalGrid, test_grid_side: int = DEFAULT_TEST_GRID_SIDE) -> SummaryCurve:
    """Empty-space function from a regular lattice of test locations."""
    locs = lattice_locations(p.window, test_grid_side)
    e = empty_space_distances(p, locations=locs)
    bd = p.window.boundary_distance(locs)
    vals, counts = _border_cdf(e, bd, grid.r_values)
    if np.any(counts == 0):
        r_bad = grid.r_values[np.argmax(counts == 0)]
        raise NoValidTestLocations(f"no test location is at least r={r_bad:g} from the window boundary")
    return SummaryCurve(grid, vals, "F")


def estimate_G(p: PointPattern, grid: EvalGrid) -> SummaryCurve:
    """Nearest-neighbour distance distribution function."""
    _check_n(p)
    nnd = nn_distances(p)
    bd = p.window.boundary_distance(p.points)
    vals, counts = _border_cdf(nnd, bd, grid.r_values)
    return SummaryCurve(grid, vals, "G", defined=counts > 0)


def estimate_G_star(p: PointPattern, grid: EvalGrid) -> SummaryCurve:
    """Variance-stabilised G: ``arcsin(sqrt(G))``."""
    G = estimate_G(p, grid)
    with np.errstate(invalid="ignore"):
        vals = np.arcsin(np.sqrt(np.clip(G.values, 0.0, 1.0)))
    return SummaryCurve(grid, vals, "Gstar", defined=G.defined)


def estimate_J(p: PointPattern, grid: EvalGrid, test_grid_side: int = DEFAULT_TEST_GRID_SIDE) -> SummaryCurve:
    """``(1 - G) / (1 - F)``, undefined from the first scale where F reaches one."""
    G = estimate_G(p, grid)
    F = estimate_F(p, grid, test_grid_side)
    ok = F.values < 1.0
    # once F hits one the remainder of the curve is undefined
    ok = np.logical_and.accumulate(ok) & G.defined
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (1.0 - G.values) / (1.0 - F.values)
    return SummaryCurve(grid, np.where(ok, vals, np.nan), "J", defined=ok)
