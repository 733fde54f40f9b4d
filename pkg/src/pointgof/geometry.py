"""Robust planar predicates and Delaunay triangulation.

``orient2d`` and ``incircle`` evaluate in floating point first and fall back to
exact rational arithmetic when the result is within the forward error bound
(the static filters of Shewchuk's adaptive predicates).  Cocircular
configurations are resolved by simulation of simplicity: each point's lifted
height ``x^2 + y^2`` is perturbed by an infinitesimal that grows with the point
index, which singles out one Delaunay triangulation deterministically.

The triangulation starts from Qhull's output when that output passes an exact
validity check, otherwise from a sweep-line triangulation; either way it is then
made Delaunay by Lawson edge flips using the exact perturbed predicate.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.spatial import Delaunay as _QhullDelaunay
from scipy.spatial import QhullError

__all__ = [
    "orient2d",
    "incircle",
    "incircle_sos",
    "Triangulation",
    "delaunay",
    "is_delaunay",
]

_EPS = 2.0**-53
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


def _orient_exact(ax, ay, bx, by, cx, cy) -> int:
    ax, ay, bx, by, cx, cy = map(Fraction, (ax, ay, bx, by, cx, cy))
    det = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx)
    return (det > 0) - (det < 0)


def orient2d(a, b, c) -> int:
    """Sign of the signed area of triangle ``abc``: +1 counter-clockwise, -1 clockwise, 0 collinear."""
    ax, ay = a
    bx, by = b
    cx, cy = c
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    bound = _CCW_BOUND * (abs(detleft) + abs(detright))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return _orient_exact(ax, ay, bx, by, cx, cy)


def _incircle_exact(a, b, c, d) -> int:
    ax, ay, bx, by, cx, cy, dx, dy = map(Fraction, (*a, *b, *c, *d))
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = (
        alift * (bdx * cdy - cdx * bdy)
        + blift * (cdx * ady - adx * cdy)
        + clift * (adx * bdy - bdx * ady)
    )
    return (det > 0) - (det < 0)


def incircle(a, b, c, d) -> int:
    """+1 if ``d`` lies inside the circle through ``a, b, c`` (given counter-clockwise), -1 outside, 0 on it."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    bdxcdy, cdxbdy = bdx * cdy, cdx * bdy
    cdxady, adxcdy = cdx * ady, adx * cdy
    adxbdy, bdxady = adx * bdy, bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady)
    permanent = (
        (abs(bdxcdy) + abs(cdxbdy)) * alift
        + (abs(cdxady) + abs(adxcdy)) * blift
        + (abs(adxbdy) + abs(bdxady)) * clift
    )
    bound = _ICC_BOUND * permanent
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return _incircle_exact(a, b, c, d)


def incircle_sos(pts, ia: int, ib: int, ic: int, id_: int) -> int:
    """Perturbed in-circle sign for point indices; never returns 0 for four distinct cocircular points.

    The determinant ``det[x, y, x^2+y^2, 1]`` over rows (a, b, c, d) equals the
    in-circle determinant.  Raising the lifted height of the row with the
    largest index by an infinitesimal adds that row's cofactor, which is an
    orientation of the other three points.
    """
    s = incircle(pts[ia], pts[ib], pts[ic], pts[id_])
    if s:
        return s
    rows = (ia, ib, ic, id_)
    for pos in sorted(range(4), key=lambda k: -rows[k]):
        others = [rows[k] for k in range(4) if k != pos]
        minor = orient2d(pts[others[0]], pts[others[1]], pts[others[2]])
        if minor:
            # cofactor sign (-1)^(row + column) with column 3 (1-based)
            return minor if (pos + 1 + 3) % 2 == 0 else -minor
    return 0


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Delaunay triangulation: counter-clockwise triangles and unique sorted edges."""

    points: np.ndarray
    triangles: np.ndarray  # (T, 3) vertex indices, counter-clockwise
    edges: np.ndarray  # (E, 2) with edges[:, 0] < edges[:, 1]

    @property
    def n_vertices(self) -> int:
        return self.points.shape[0]


def _edges_from_triangles(tris: np.ndarray) -> np.ndarray:
    if tris.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def _collinear_chain(pts, order):
    return np.column_stack([order[:-1], order[1:]]).astype(np.int64)


def _orient_many(pts, a, b, c) -> np.ndarray:
    """Vectorised orient2d signs for index arrays ``a, b, c``."""
    A, B, C = pts[a], pts[b], pts[c]
    detleft = (A[:, 0] - C[:, 0]) * (B[:, 1] - C[:, 1])
    detright = (A[:, 1] - C[:, 1]) * (B[:, 0] - C[:, 0])
    det = detleft - detright
    bound = _CCW_BOUND * (np.abs(detleft) + np.abs(detright))
    sign = np.where(det > bound, 1, np.where(-det > bound, -1, 0))
    for k in np.flatnonzero(sign == 0):
        sign[k] = _orient_exact(*A[k], *B[k], *C[k])
    return sign


def _incircle_many(pts, a, b, c, d) -> np.ndarray:
    """Vectorised float in-circle with uncertain entries reported as 0."""
    A, B, C, D = pts[a], pts[b], pts[c], pts[d]
    adx, ady = A[:, 0] - D[:, 0], A[:, 1] - D[:, 1]
    bdx, bdy = B[:, 0] - D[:, 0], B[:, 1] - D[:, 1]
    cdx, cdy = C[:, 0] - D[:, 0], C[:, 1] - D[:, 1]
    bdxcdy, cdxbdy = bdx * cdy, cdx * bdy
    cdxady, adxcdy = cdx * ady, adx * cdy
    adxbdy, bdxady = adx * bdy, bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady)
    permanent = (
        (np.abs(bdxcdy) + np.abs(cdxbdy)) * alift
        + (np.abs(cdxady) + np.abs(adxcdy)) * blift
        + (np.abs(adxbdy) + np.abs(bdxady)) * clift
    )
    bound = _ICC_BOUND * permanent
    return np.where(det > bound, 1, np.where(-det > bound, -1, 0))


def _all_collinear(pts) -> bool:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    n = len(pts)
    s = _orient_many(pts, np.full(n, order[0]), np.full(n, order[-1]), np.arange(n))
    return not np.any(s)


def _qhull_start(pts):
    """Qhull triangulation (counter-clockwise), or None if it fails exact validation."""
    try:
        tri = _QhullDelaunay(pts)
    except (QhullError, ValueError):
        return None
    if len(tri.coplanar):
        return None
    tris = np.asarray(tri.simplices, dtype=np.int64).copy()
    s = _orient_many(pts, tris[:, 0], tris[:, 1], tris[:, 2])
    if np.any(s == 0):
        return None
    flip = s < 0
    tris[flip, 1], tris[flip, 2] = tris[flip, 2].copy(), tris[flip, 1].copy()
    if len(np.unique(tris)) != len(pts):
        return None
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = directed[:, 0] * len(pts) + directed[:, 1]
    if len(np.unique(key)) != len(key):
        return None
    rkey = directed[:, 1] * len(pts) + directed[:, 0]
    bmask = ~np.isin(rkey, key)
    n_edges = (len(key) + bmask.sum()) // 2
    if len(pts) - n_edges + len(tris) != 1:
        return None
    bd = directed[bmask]
    nxt = dict(zip(bd[:, 0].tolist(), bd[:, 1].tolist()))
    if len(nxt) != len(bd):
        return None
    u = bd[:, 0]
    v = bd[:, 1]
    w = np.array([nxt.get(int(x), -1) for x in v])
    if np.any(w < 0) or np.any(_orient_many(pts, u, v, w) < 0):
        return None
    return tris


def _locally_delaunay(pts, tris) -> bool:
    """True if no interior edge is flippable under the perturbed predicate."""
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    apex = np.concatenate([tris[:, 2], tris[:, 0], tris[:, 1]])
    n = len(pts)
    key = directed[:, 0] * n + directed[:, 1]
    rkey = directed[:, 1] * n + directed[:, 0]
    order = np.argsort(key)
    pos = np.searchsorted(key[order], rkey)
    pos = np.minimum(pos, len(key) - 1)
    hit = key[order][pos] == rkey
    sel = np.flatnonzero(hit & (directed[:, 0] < directed[:, 1]))
    other = order[pos[sel]]
    u, v, c = directed[sel, 0], directed[sel, 1], apex[sel]
    d = apex[other]
    s = _incircle_many(pts, u, v, c, d)
    if np.any(s > 0):
        return False
    P = [tuple(p) for p in pts] if np.any(s == 0) else None
    for k in np.flatnonzero(s == 0):
        if incircle_sos(P, int(u[k]), int(v[k]), int(c[k]), int(d[k])) > 0:
            return False
    return True


def _sweep_start(pts):
    """Any triangulation of the point set, built by a left-to-right sweep."""
    order = [int(k) for k in np.lexsort((pts[:, 1], pts[:, 0]))]
    P = [tuple(p) for p in pts]
    chain = [order[0], order[1]]
    k = 2
    while k < len(order) and orient2d(P[chain[0]], P[chain[-1]], P[order[k]]) == 0:
        chain.append(order[k])
        k += 1
    if k == len(order):
        return np.zeros((0, 3), dtype=np.int64)
    p = order[k]
    tris = []
    left = orient2d(P[chain[0]], P[chain[-1]], P[p]) > 0
    for u, v in zip(chain[:-1], chain[1:]):
        tris.append((u, v, p) if left else (v, u, p))
    hull = chain + [p] if left else chain[::-1] + [p]
    for p in order[k + 1:]:
        h = len(hull)
        vis = [orient2d(P[hull[i]], P[hull[(i + 1) % h]], P[p]) < 0 for i in range(h)]
        # visible edges form one contiguous cyclic run
        start = next(i for i in range(h) if vis[i] and not vis[i - 1])
        i = start
        run = []
        while vis[i % h]:
            run.append(i % h)
            i += 1
        for e in run:
            u, v = hull[e], hull[(e + 1) % h]
            tris.append((v, u, p))
        first = hull[run[0]]
        last = hull[(run[-1] + 1) % h]
        # new hull: ... first, p, last ...
        rotated = hull[run[0]:] + hull[:run[0]]
        keep_after = rotated.index(last)
        hull = [first, p] + rotated[keep_after:]
    return np.asarray(tris, dtype=np.int64)


def _lawson(pts, tris: np.ndarray) -> np.ndarray:
    P = [tuple(p) for p in pts]
    T = [list(t) for t in tris]
    owner = {}
    for k, (a, b, c) in enumerate(T):
        owner[(a, b)] = k
        owner[(b, c)] = k
        owner[(c, a)] = k

    def apex(k, u, v):
        a, b, c = T[k]
        if (a, b) == (u, v):
            return c
        if (b, c) == (u, v):
            return a
        return b

    stack = [e for e in owner if e[0] < e[1]]
    while stack:
        u, v = stack.pop()
        k1 = owner.get((u, v))
        k2 = owner.get((v, u))
        if k1 is None or k2 is None:
            continue
        c = apex(k1, u, v)
        d = apex(k2, v, u)
        if incircle_sos(P, u, v, c, d) <= 0:
            continue
        # flip (u, v) -> (c, d): quad u, d, v, c is counter-clockwise
        for key in ((u, v), (v, u), (v, c), (c, u), (u, d), (d, v)):
            owner.pop(key, None)
        T[k1] = [u, d, c]
        T[k2] = [d, v, c]
        for k in (k1, k2):
            a, b, cc = T[k]
            owner[(a, b)] = k
            owner[(b, cc)] = k
            owner[(cc, a)] = k
        stack.extend([(u, d), (d, v), (v, c), (c, u)])
    return np.asarray(T, dtype=np.int64).reshape(-1, 3)


def delaunay(points) -> Triangulation:
    """Delaunay triangulation of distinct planar points.

    Collinear inputs (and fewer than three points) give the path through the
    points in lexicographic order and no triangles.
    """
    pts = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 3 or _all_collinear(pts):
        if n < 2:
            return Triangulation(pts, np.zeros((0, 3), np.int64), np.zeros((0, 2), np.int64))
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        e = _collinear_chain(pts, order)
        e.sort(axis=1)
        e = e[np.lexsort((e[:, 1], e[:, 0]))]
        return Triangulation(pts, np.zeros((0, 3), np.int64), e)
    tris = _qhull_start(pts)
    if tris is None:
        tris = _lawson(pts, _sweep_start(pts))
    elif not _locally_delaunay(pts, tris):
        tris = _lawson(pts, tris)
    return Triangulation(pts, tris, _edges_from_triangles(tris))


def is_delaunay(pts, triangles) -> bool:
    """Brute-force empty-circumcircle check (strict interior, counter-clockwise triangles)."""
    P = [tuple(p) for p in np.asarray(pts, dtype=float)]
    for a, b, c in triangles:
        for k in range(len(P)):
            if k in (a, b, c):
                continue
            if incircle(P[a], P[b], P[c], P[k]) > 0:
                return False
    return True
