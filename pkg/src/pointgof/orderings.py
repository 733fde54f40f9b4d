"""Pointwise ranks, continuous ranks and depth measures for Monte Carlo ordering.

All functions take the ``(m + 1) x n`` layout of :class:`CurveMatrix` rows.
Depth values are scaled to ``(0, 1]`` so that small values are extreme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, MixedTags
from .statistics import LARGE_ONLY, TWO_SIDED, StatValue

__all__ = [
    "MEASURES",
    "RankMatrix",
    "DepthValue",
    "raw_ranks",
    "pointwise_ranks",
    "raw_continuous_ranks",
    "continuous_ranks",
    "rank_matrix",
    "depths_all",
    "depth",
    "order_scalars",
    "mc_p_value",
]

MEASURES = ("RANK", "ERL", "CONT", "AREA")


def _as_matrix(values) -> tuple[np.ndarray, bool]:
    a = np.asarray(values, dtype=float)
    if a.ndim == 1:
        return a[:, None], True
    if a.ndim != 2:
        raise ConfigError("ranks need a column or an (m+1) x n matrix")
    return a, False


def _check_side(sidedness: str) -> str:
    if sidedness not in (LARGE_ONLY, TWO_SIDED):
        raise ConfigError(f"sidedness must be {LARGE_ONLY!r} or {TWO_SIDED!r}, got {sidedness!r}")
    return sidedness


def raw_ranks(values) -> np.ndarray:
    """``1 + #{D_j < D_i} + #{j != i: D_j = D_i} / 2`` down each column."""
    a, col = _as_matrix(values)
    r = rankdata(a, method="average", axis=0)
    return r[:, 0] if col else r


def pointwise_ranks(values, sidedness: str) -> np.ndarray:
    """Ranks in which 1 is the most extreme value."""
    _check_side(sidedness)
    r = raw_ranks(values)
    top = np.shape(values)[0] + 1
    return top - r if sidedness == LARGE_ONLY else np.minimum(r, top - r)


def raw_continuous_ranks(values) -> np.ndarray:
    """Continuous ranks that interpolate between neighbouring order statistics."""
    a, col = _as_matrix(values)
    m = a.shape[0] - 1
    order = np.argsort(a, axis=0, kind="stable")
    x = np.take_along_axis(a, order, axis=0)
    idx = np.broadcast_to(np.arange(m + 1)[:, None], x.shape)
    # extent [k, l] of the tie group holding each sorted position
    new_run = np.ones(x.shape, dtype=bool)
    new_run[1:] = x[1:] != x[:-1]
    k = np.maximum.accumulate(np.where(new_run, idx, 0), axis=0)
    end_run = np.ones(x.shape, dtype=bool)
    end_run[:-1] = x[:-1] != x[1:]
    l = np.flip(np.minimum.accumulate(np.flip(np.where(end_run, idx, m), axis=0), axis=0), axis=0)
    c = np.empty(x.shape)
    if m >= 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            gap = x[1:-1]
            c[1:-1] = idx[1:-1] + (gap - x[:-2]) / (x[2:] - x[:-2])
            lo_ok = x[1] < x[m]
            c[0] = np.where(lo_ok, np.exp(-(x[1] - x[0]) / (x[m] - x[1])), 0.0)
            hi_ok = x[0] < x[m - 1]
            c[m] = np.where(hi_ok, m + 1 - np.exp(-(x[m] - x[m - 1]) / (x[m - 1] - x[0])), m + 1)
    else:
        c[:] = 0.5
    tied = k != l
    c = np.where(tied, (k + l + 1) / 2.0, c)
    out = np.empty_like(c)
    np.put_along_axis(out, order, c, axis=0)
    return out[:, 0] if col else out


def continuous_ranks(values, sidedness: str) -> np.ndarray:
    """Continuous pointwise ranks; they satisfy ``R - 1 <= C <= R``."""
    _check_side(sidedness)
    c = raw_continuous_ranks(values)
    top = np.shape(values)[0]
    return top - c if sidedness == LARGE_ONLY else np.minimum(c, top - c)


@dataclass(frozen=True, eq=False)
class RankMatrix:
    """Pointwise ranks ``R`` and continuous ranks ``C`` of a set of vectors."""

    R: np.ndarray
    C: np.ndarray
    sidedness: str

    @property
    def m(self) -> int:
        return self.R.shape[0] - 1


def rank_matrix(values, sidedness: str) -> RankMatrix:
    a, _ = _as_matrix(values)
    return RankMatrix(pointwise_ranks(a, sidedness), continuous_ranks(a, sidedness), sidedness)


@dataclass(frozen=True, eq=False)
class DepthValue:
    measure: str
    value: float
    sorted_ranks: np.ndarray | None = None


def _erl_counts(R: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = np.sort(R, axis=1)
    order = np.lexsort(s.T[::-1])
    ss = s[order]
    same = np.zeros(len(ss), dtype=bool)
    same[1:] = np.all(ss[1:] == ss[:-1], axis=1)
    group = np.cumsum(~same) - 1
    # rows at most lexicographically equal: everything up to the end of the own group
    last = np.flatnonzero(np.append(~same[1:], True))
    counts = np.empty(len(ss))
    counts[order] = last[group] + 1
    return counts, s


def depths_all(measure: str, rm: RankMatrix) -> np.ndarray:
    """Depth of every row under ``measure`` (one of RANK, ERL, CONT, AREA)."""
    measure = measure.upper()
    top = rm.m + 1
    if measure == "RANK":
        return rm.R.min(axis=1) / top
    if measure == "CONT":
        return rm.C.min(axis=1) / top
    if measure == "ERL":
        return _erl_counts(rm.R)[0] / top
    if measure == "AREA":
        r1 = rm.R.min(axis=1, keepdims=True)
        gap = np.where(rm.C < r1, r1 - rm.C, 0.0).mean(axis=1)
        return (r1[:, 0] - gap) / top
    raise ConfigError(f"unknown depth measure {measure!r}; choose from {MEASURES}")


def depth(measure: str, rm: RankMatrix, i: int) -> DepthValue:
    """Depth of row ``i``; for ERL the sorted rank vector is attached for auditing ties."""
    vals = depths_all(measure, rm)
    srt = np.sort(rm.R[i]) if measure.upper() == "ERL" else None
    return DepthValue(measure.upper(), float(vals[i]), srt)


def order_scalars(values: list[StatValue]) -> np.ndarray:
    """Ranks of scalar statistics with 1 the most extreme."""
    tags = {v.tag for v in values}
    if len(tags) != 1:
        raise MixedTags(f"cannot order statistics with different extremeness tags {sorted(tags)}")
    if any(v.is_vector for v in values):
        raise ConfigError("order_scalars needs scalar statistics")
    return pointwise_ranks(np.array([v.value for v in values], dtype=float), tags.pop())


def mc_p_value(scores) -> float:
    """``(1 + #{i >= 1: score_i <= score_0}) / (m + 1)`` where small scores are extreme."""
    s = np.asarray(scores, dtype=float)
    return float((1 + np.count_nonzero(s[1:] <= s[0])) / len(s))
