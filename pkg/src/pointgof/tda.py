"""Alpha-complex filtration, persistent homology and topological summary curves.

Scales are ball radii ``r`` throughout (a simplex enters when the restricted
balls of radius ``r`` around its vertices have a common point).  Tools that
report squared alpha values relate to these by ``alpha^2 = r^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np

from .errors import InvalidArgs
from .geometry import delaunay
from .pattern import EvalGrid, PointPattern, SummaryCurve

__all__ = [
    "Filtration",
    "PersistenceDiagram",
    "alpha_filtration",
    "persistence",
    "rank_function",
    "betti_curve",
    "apf",
    "nd0",
    "euler_curve",
    "diagram_of",
    "write_diagram_csv",
]


@dataclass(frozen=True, eq=False)
class Filtration:
    """Alpha filtration of a planar pattern.

    ``edges``/``triangles`` hold vertex indices; the matching ``*_values`` are
    entry radii.  Within each dimension simplices are sorted by
    ``(value, index)``; the global order is ``(value, dimension, index)``.
    """

    n_vertices: int
    edges: np.ndarray
    edge_values: np.ndarray
    triangles: np.ndarray
    triangle_values: np.ndarray

    def simplices(self):
        """All simplices as ``(vertices, dim, value)`` in filtration order."""
        out = [((v,), 0, 0.0) for v in range(self.n_vertices)]
        out += [(tuple(map(int, e)), 1, float(x)) for e, x in zip(self.edges, self.edge_values)]
        out += [(tuple(map(int, t)), 2, float(x)) for t, x in zip(self.triangles, self.triangle_values)]
        out.sort(key=lambda s: (s[2], s[1]))
        return out

    def check_monotone(self) -> bool:
        ev = {tuple(sorted(map(int, e))): x for e, x in zip(self.edges, self.edge_values)}
        for t, x in zip(self.triangles, self.triangle_values):
            a, b, c = sorted(map(int, t))
            if max(ev[(a, b)], ev[(a, c)], ev[(b, c)]) > x:
                return False
        return bool(np.all(self.edge_values >= 0))


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """Multiset of ``(dim, birth, death)``; ``death`` is ``inf`` for features that never die."""

    dims: np.ndarray
    births: np.ndarray
    deaths: np.ndarray
    n_points: int

    def dim(self, p: int):
        m = self.dims == p
        return self.births[m], self.deaths[m]

    def finite_deaths(self, p: int) -> np.ndarray:
        _, d = self.dim(p)
        return d[np.isfinite(d)]

    def __len__(self):
        return self.dims.size


def _obtuse_exact(a, b, c) -> bool:
    fa = [Fraction(float(t)) for t in (*a, *b, *c)]
    dot = (fa[0] - fa[4]) * (fa[2] - fa[4]) + (fa[1] - fa[5]) * (fa[3] - fa[5])
    return dot < 0


def _obtuse_many(A, B, C) -> np.ndarray:
    """Strictly obtuse angle at ``C`` in each triangle ``(A, B, C)``."""
    U, V = A - C, B - C
    prod = U * V
    dot = prod[:, 0] + prod[:, 1]
    scale = np.abs(prod[:, 0]) + np.abs(prod[:, 1])
    out = dot < 0
    for k in np.flatnonzero(np.abs(dot) <= 1e-12 * scale):
        out[k] = _obtuse_exact(A[k], B[k], C[k])
    return out


def _circumradii(A, B, C) -> np.ndarray:
    ab = np.hypot(*(A - B).T)
    bc = np.hypot(*(B - C).T)
    ca = np.hypot(*(C - A).T)
    cross = np.abs((B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1]) - (B[:, 1] - A[:, 1]) * (C[:, 0] - A[:, 0]))
    return ab * bc * ca / (2.0 * cross)


def alpha_filtration(p: PointPattern | np.ndarray) -> Filtration:
    """Alpha filtration from the Delaunay triangulation of ``p``.

    Triangles enter at their circumradius.  An edge enters at half its length
    when its diametral disc contains no other point, otherwise together with its
    first incident triangle.  Face values never exceed coface values.
    """
    pts = p.points if isinstance(p, PointPattern) else np.asarray(p, dtype=float).reshape(-1, 2)
    tri = delaunay(pts)
    P = tri.points
    edges = tri.edges
    tris = tri.triangles
    n = len(P)
    half = 0.5 * np.hypot(*(P[edges[:, 0]] - P[edges[:, 1]]).T) if len(edges) else np.zeros(0)
    if len(tris) == 0:
        evals = half
        tvals = np.zeros(0)
    else:
        # slot j of triangle k is the edge opposite vertex j
        u = np.concatenate([tris[:, 1], tris[:, 2], tris[:, 0]])
        v = np.concatenate([tris[:, 2], tris[:, 0], tris[:, 1]])
        w = np.concatenate([tris[:, 0], tris[:, 1], tris[:, 2]])
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        eid = np.searchsorted(edges[:, 0] * n + edges[:, 1], lo * n + hi)
        R = _circumradii(P[tris[:, 0]], P[tris[:, 1]], P[tris[:, 2]])
        attached = np.full(len(edges), np.inf)
        np.minimum.at(attached, eid, np.tile(R, 3))
        blocked = np.zeros(len(edges), dtype=bool)
        blocked[eid[_obtuse_many(P[u], P[v], P[w])]] = True
        evals = np.where(blocked, attached, half)
        tvals = np.maximum(R, evals[eid].reshape(3, -1).max(axis=0))
    eorder = np.lexsort((np.arange(len(edges)), evals))
    torder = np.lexsort((np.arange(len(tvals)), tvals))
    return Filtration(
        n_vertices=n,
        edges=edges[eorder],
        edge_values=evals[eorder],
        triangles=tris[torder],
        triangle_values=tvals[torder],
    )


@numba.njit(cache=True)
def _components(n, edges):
    """Union-find over edges in order; returns the negative (merging) edges."""
    parent = np.arange(n)
    merge = np.zeros(edges.shape[0], dtype=np.bool_)
    for k in range(edges.shape[0]):
        a = edges[k, 0]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = edges[k, 1]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a == b:
            continue
        if a > b:
            a, b = b, a
        parent[b] = a
        merge[k] = True
    return merge


@numba.njit(cache=True)
def _reduce(tri_edges, n_edges):
    """GF(2) reduction of triangle boundary columns; pivot[e] = triangle paired with edge e."""
    n_tri = tri_edges.shape[0]
    pivot = np.full(n_edges, -1)
    # reduced columns as sorted index lists in one growing buffer
    start = np.zeros(n_tri + 1, dtype=np.int64)
    buf = np.empty(max(16, 4 * n_tri), dtype=np.int64)
    used = 0
    col = np.empty(n_edges, dtype=np.int64)
    tmp = np.empty(n_edges, dtype=np.int64)
    for t in range(n_tri):
        c = np.sort(tri_edges[t])
        m = 3
        for q in range(3):
            col[q] = c[q]
        while m > 0:
            low = col[m - 1]
            o = pivot[low]
            if o < 0:
                break
            # symmetric difference of two sorted lists
            i = 0
            j = start[o]
            je = start[o + 1]
            k = 0
            while i < m and j < je:
                if col[i] < buf[j]:
                    tmp[k] = col[i]
                    i += 1
                    k += 1
                elif col[i] > buf[j]:
                    tmp[k] = buf[j]
                    j += 1
                    k += 1
                else:
                    i += 1
                    j += 1
            while i < m:
                tmp[k] = col[i]
                i += 1
                k += 1
            while j < je:
                tmp[k] = buf[j]
                j += 1
                k += 1
            m = k
            for q in range(m):
                col[q] = tmp[q]
        if m > 0:
            pivot[col[m - 1]] = t
            if used + m > buf.size:
                nb = np.empty(2 * (used + m), dtype=np.int64)
                nb[:used] = buf[:used]
                buf = nb
            buf[used:used + m] = col[:m]
            used += m
        start[t + 1] = used
    return pivot


def persistence(f: Filtration) -> PersistenceDiagram:
    """Persistence pairs in dimensions 0 and 1.

    Components are tracked with union-find over the edges in filtration order
    (every component is born at 0, so a merge kills the component whose root
    has the larger index).  Loops come from reducing the triangle boundary
    matrix over GF(2); each pivot pairs a cycle-creating edge with the triangle
    that fills it.  Pairs with zero persistence are dropped.
    """
    n = f.n_vertices
    E = len(f.edges)
    edges = np.ascontiguousarray(f.edges, dtype=np.int64).reshape(-1, 2)
    merge = _components(n, edges) if E else np.zeros(0, dtype=bool)
    d0 = f.edge_values[merge]
    dims = [np.zeros(d0.size + (1 if n else 0), dtype=np.int64)]
    births = [np.zeros(dims[0].size)]
    deaths = [np.concatenate([d0, [math.inf]]) if n else d0]
    if len(f.triangles):
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        key = lo * n + hi
        order = np.argsort(key)
        T = f.triangles.astype(np.int64)
        ids = []
        for a, b in ((0, 1), (1, 2), (0, 2)):
            x, y = np.minimum(T[:, a], T[:, b]), np.maximum(T[:, a], T[:, b])
            ids.append(order[np.searchsorted(key[order], x * n + y)])
        pivot = _reduce(np.column_stack(ids), E)
    else:
        pivot = np.full(E, -1)
    paired = pivot >= 0
    bv = f.edge_values[paired]
    dv = f.triangle_values[pivot[paired]]
    keep = dv > bv
    essential = ~merge & ~paired
    dims.append(np.ones(int(keep.sum()) + int(essential.sum()), dtype=np.int64))
    births.append(np.concatenate([bv[keep], f.edge_values[essential]]))
    deaths.append(np.concatenate([dv[keep], np.full(int(essential.sum()), math.inf)]))
    return PersistenceDiagram(np.concatenate(dims), np.concatenate(births), np.concatenate(deaths), n)


def diagram_of(p: PointPattern) -> PersistenceDiagram:
    return persistence(alpha_filtration(p))


def rank_function(pd: PersistenceDiagram, b: float, d: float, p: int) -> int:
    """Persistent Betti number: features of dimension ``p`` born by ``b`` and alive after ``d``."""
    if b > d:
        raise InvalidArgs(f"rank function needs b <= d, got b={b}, d={d}")
    births, deaths = pd.dim(p)
    return int(np.count_nonzero((births <= b) & (deaths > d)))


def betti_curve(pd: PersistenceDiagram, grid: EvalGrid, p: int) -> SummaryCurve:
    """Rank function on the diagonal ``(r, r)``."""
    births, deaths = pd.dim(p)
    r = grid.r_values
    born = np.searchsorted(np.sort(births), r, side="right")
    dead = np.searchsorted(np.sort(deaths), r, side="right")
    # born-by-r minus died-by-r; a feature cannot die before it is born
    vals = born - dead
    return SummaryCurve(grid, vals.astype(float), f"betti{p}")


def apf(pd: PersistenceDiagram, grid: EvalGrid, p: int) -> SummaryCurve:
    """Accumulated persistence: dim-0 lifetimes indexed by death, dim-1 by birth."""
    births, deaths = pd.dim(p)
    fin = np.isfinite(deaths)
    births, deaths = births[fin], deaths[fin]
    key = deaths if p == 0 else births
    life = deaths - births
    order = np.argsort(key)
    cum = np.concatenate([[0.0], np.cumsum(life[order])])
    idx = np.searchsorted(key[order], grid.r_values, side="right")
    return SummaryCurve(grid, cum[idx], f"apf{p}")


def nd0(pd: PersistenceDiagram, grid: EvalGrid) -> SummaryCurve:
    """Number of component deaths up to each scale."""
    d = np.sort(pd.finite_deaths(0))
    return SummaryCurve(grid, np.searchsorted(d, grid.r_values, side="right").astype(float), "nd0")


def euler_curve(f: Filtration, grid: EvalGrid) -> SummaryCurve:
    """Euler characteristic of the complex at each scale."""
    r = grid.r_values
    ne = np.searchsorted(np.sort(f.edge_values), r, side="right")
    nt = np.searchsorted(np.sort(f.triangle_values), r, side="right")
    return SummaryCurve(grid, (f.n_vertices - ne + nt).astype(float), "euler")


def write_diagram_csv(pd: PersistenceDiagram, path) -> None:
    """Export with columns ``dim,birth,death`` (``inf`` for unpaired features)."""
    from .pattern import _write_text

    lines = ["dim,birth,death"]
    order = np.lexsort((pd.deaths, pd.births, pd.dims))
    for k in order:
        d = pd.deaths[k]
        lines.append(f"{int(pd.dims[k])},{float(pd.births[k])!r},{'inf' if math.isinf(d) else repr(float(d))}")
    _write_text(path, "\n".join(lines) + "\n")
