"""Test statistics computed from a matrix of summary curves.

Row 0 of a :class:`CurveMatrix` belongs to the observed pattern and rows
``1..m`` to simulations.  Every statistic treats all ``m + 1`` rows the same
way (each row in turn plays the observation, the remaining rows the reference
sample), so the vectorised ``*_all`` functions return one value per row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, IndexOutOfGrid, TooFewSimulations
from .pattern import EvalGrid

__all__ = [
    "LARGE_ONLY",
    "TWO_SIDED",
    "VECTOR_DEPTH",
    "DEVIATION_VARIANTS",
    "QDIR_LEVELS",
    "CurveMatrix",
    "StatValue",
    "reference_mean",
    "deviation_statistic",
    "deviation_statistics_all",
    "crps_statistic",
    "crps_pointwise_all",
    "pointwise_score",
    "point_statistic",
    "integral_statistic",
    "functional_statistic",
]

LARGE_ONLY = "LargeOnly"
TWO_SIDED = "TwoSided"
VECTOR_DEPTH = "VectorDepth"
DEVIATION_VARIANTS = ("MAD", "DCLF", "ST", "QDIR", "ST_DCLF", "QDIR_DCLF")
QDIR_LEVELS = (0.025, 0.975)


@dataclass(frozen=True, eq=False)
class CurveMatrix:
    """Summary curves on a common grid; row 0 is the observed pattern."""

    grid: EvalGrid
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != len(self.grid.r_values):
            raise ConfigError(f"curve matrix must have {len(self.grid.r_values)} columns, got shape {rows.shape}")
        if rows.shape[0] < 2:
            raise TooFewSimulations("a curve matrix needs the observed row and at least one simulation")
        if not np.all(np.isfinite(rows)):
            raise ConfigError("curve matrix contains undefined values; drop those grid columns first")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return self.rows.shape[0] - 1

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    def scaled(self, c: float) -> "CurveMatrix":
        return CurveMatrix(self.grid, self.rows * c)


@dataclass(frozen=True, eq=False)
class StatValue:
    """A scalar or vector statistic with the direction in which it is extreme."""

    value: float | np.ndarray
    tag: str

    @property
    def is_vector(self) -> bool:
        return np.ndim(self.value) > 0


def _check_row(cm: CurveMatrix, i: int) -> int:
    if not 0 <= i <= cm.m:
        raise IndexError(f"row {i} outside 0..{cm.m}")
    return int(i)


def _loo_deviations(rows: np.ndarray) -> np.ndarray:
    """``T_i - mean_{j != i} T_j`` for every row, via the overall mean."""
    m = rows.shape[0] - 1
    return (m + 1) / m * (rows - rows.mean(axis=0))


def reference_mean(cm: CurveMatrix, i: int) -> np.ndarray:
    """Leave-one-out mean curve: the average of all rows except ``i``."""
    i = _check_row(cm, i)
    return cm.rows[i] - _loo_deviations(cm.rows)[i]


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # 0/0 contributes nothing; a deviation against a zero scale is infinitely extreme
    out = np.zeros(np.broadcast(num, den).shape)
    den = np.broadcast_to(den, out.shape)
    num = np.broadcast_to(num, out.shape)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    out[~ok & (num != 0)] = np.inf
    return out


def _weights(cm: CurveMatrix, weight_fn):
    if weight_fn is None:
        return None
    w = np.asarray(weight_fn(cm.grid.r_values), dtype=float)
    if w.shape != (cm.n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigError("weight function must return finite non-negative values on the grid")
    return w


def deviation_statistics_all(
    cm: CurveMatrix, variant: str, weight_fn: Callable | None = None
) -> np.ndarray:
    """Deviation statistic for every row (each row against its leave-one-out mean)."""
    variant = variant.upper()
    if variant not in DEVIATION_VARIANTS:
        raise ConfigError(f"unknown deviation statistic {variant!r}")
    if variant != "MAD" and variant != "DCLF" and cm.m < 10:
        raise TooFewSimulations(f"{variant} needs m >= 10 to estimate pointwise scales, got m={cm.m}")
    rows = cm.rows
    dev = _loo_deviations(rows)
    if variant in ("MAD", "DCLF"):
        point = np.abs(dev)
    elif variant in ("ST", "ST_DCLF"):
        point = _safe_ratio(np.abs(dev), rows.std(axis=0, ddof=1))
    else:
        ref = rows - dev
        q_lo, q_hi = np.quantile(rows, QDIR_LEVELS, axis=0)
        above = _safe_ratio(dev, np.abs(q_hi - ref))
        below = _safe_ratio(-dev, np.abs(q_lo - ref))
        point = np.where(dev >= 0, above, below)
    squared = variant in ("DCLF", "ST_DCLF", "QDIR_DCLF")
    if squared:
        point = point**2
    w = _weights(cm, weight_fn)
    if w is not None:
        # keep 0 * inf at zero weight from turning into nan
        point = np.where(w > 0, point * w, 0.0)
    if squared:
        rw = cm.grid.riemann_weights()
        with np.errstate(invalid="ignore"):
            return np.where(rw > 0, point * rw, 0.0).sum(axis=1)
    return point.max(axis=1)


def deviation_statistic(cm: CurveMatrix, i: int, variant: str, weight_fn: Callable | None = None) -> StatValue:
    """One of MAD, DCLF, ST, QDIR, ST_DCLF, QDIR_DCLF for row ``i``; large values are extreme."""
    i = _check_row(cm, i)
    return StatValue(float(deviation_statistics_all(cm, variant, weight_fn)[i]), LARGE_ONLY)


def crps_pointwise_all(cm: CurveMatrix) -> np.ndarray:
    """Fair CRPS at every grid point, each row scored against the other ``m`` rows."""
    m = cm.m
    if m < 2:
        raise TooFewSimulations(f"the fair CRPS estimator needs m >= 2, got m={m}")
    x = np.sort(cm.rows, axis=0)
    order = np.argsort(cm.rows, axis=0, kind="stable")
    k = np.arange(m + 1)[:, None]
    # A_i = sum_j |x_i - x_j| from sorted prefix sums
    csum = np.cumsum(x, axis=0)
    total = csum[-1]
    a_sorted = k * x - (csum - x) + (total - csum) - (m - k) * x
    A = np.empty_like(a_sorted)
    np.put_along_axis(A, order, a_sorted, axis=0)
    S = A.sum(axis=0)
    return A / m - (S - 2 * A) / (2 * m * (m - 1))


def crps_statistic(cm: CurveMatrix, i: int) -> StatValue:
    """Integrated fair CRPS of row ``i``; large values are extreme."""
    i = _check_row(cm, i)
    val = crps_pointwise_all(cm)[i] @ cm.grid.riemann_weights()
    return StatValue(float(val), LARGE_ONLY)


def pointwise_score(cm: CurveMatrix, i: int) -> StatValue:
    """Vector of pointwise fair CRPS values of row ``i``; large values are extreme."""
    i = _check_row(cm, i)
    return StatValue(crps_pointwise_all(cm)[i], LARGE_ONLY)


def point_statistic(cm: CurveMatrix, i: int, r_index: int) -> StatValue:
    """The curve of row ``i`` at a single grid index fixed in advance."""
    i = _check_row(cm, i)
    if not 0 <= r_index < cm.n:
        raise IndexOutOfGrid(f"r index {r_index} outside 0..{cm.n - 1}")
    return StatValue(float(cm.rows[i, r_index]), TWO_SIDED)


def integral_statistic(cm: CurveMatrix, i: int) -> StatValue:
    """Riemann integral of row ``i`` over the grid."""
    i = _check_row(cm, i)
    return StatValue(float(cm.rows[i] @ cm.grid.riemann_weights()), TWO_SIDED)


def functional_statistic(cm: CurveMatrix, i: int) -> StatValue:
    """Row ``i`` itself, ordered through a depth measure."""
    i = _check_row(cm, i)
    return StatValue(cm.rows[i].copy(), VECTOR_DEPTH)
