"""Point patterns, observation windows, evaluation grids and summary curves."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform

from .errors import (
    DuplicatePoint,
    EmptyPattern,
    InvalidGrid,
    InvalidWindow,
    OutOfWindow,
    TooFewPoints,
    ConfigError,
)

__all__ = [
    "Window",
    "PointPattern",
    "EvalGrid",
    "SummaryCurve",
    "new_pattern",
    "unit_square",
    "pairwise_distances",
    "nn_distances",
    "empty_space_distances",
    "lattice_locations",
    "default_grid",
    "read_pattern_csv",
    "write_pattern_csv",
    "write_curve_csv",
]


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle ``[x_min, x_max] x [y_min, y_max]``."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        vals = tuple(float(v) for v in (self.x_min, self.x_max, self.y_min, self.y_max))
        for name, v in zip(("x_min", "x_max", "y_min", "y_max"), vals):
            object.__setattr__(self, name, v)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidWindow(f"window bounds must be finite, got {vals}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidWindow(f"degenerate window {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def inradius(self) -> float:
        return 0.5 * min(self.width, self.height)

    def dilate(self, r: float) -> "Window":
        return Window(self.x_min - r, self.x_max + r, self.y_min - r, self.y_max + r)

    def contains(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return (
            (xy[:, 0] >= self.x_min)
            & (xy[:, 0] <= self.x_max)
            & (xy[:, 1] >= self.y_min)
            & (xy[:, 1] <= self.y_max)
        )

    def boundary_distance(self, xy) -> np.ndarray:
        """Distance from each location to the window boundary."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return np.minimum.reduce(
            [
                xy[:, 0] - self.x_min,
                self.x_max - xy[:, 0],
                xy[:, 1] - self.y_min,
                self.y_max - xy[:, 1],
            ]
        )

    def as_tuple(self):
        return (self.x_min, self.x_max, self.y_min, self.y_max)


def unit_square() -> Window:
    return Window(0.0, 1.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A finite simple point pattern observed in a rectangular window.

    Build instances with :func:`new_pattern`, which validates the points; the
    constructor itself trusts its input (simulators use it directly).
    """

    points: np.ndarray
    window: Window

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def intensity(self) -> float:
        """Natural intensity estimate ``n / |W|``."""
        return self.n / self.window.area

    def __repr__(self):
        return f"PointPattern(n={self.n}, window={self.window.as_tuple()})"


def new_pattern(points, window: Window) -> PointPattern:
    """Validate ``points`` against ``window`` and return a :class:`PointPattern`.

    Raises :class:`OutOfWindow` for points outside the closed window and
    :class:`DuplicatePoint` if two points coincide exactly.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        pts = pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ConfigError(f"points must have shape (n, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ConfigError("point coordinates must be finite")
    inside = window.contains(pts)
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise OutOfWindow(f"point {bad} at {tuple(pts[bad])} lies outside {window.as_tuple()}")
    if len(pts) > 1:
        uniq = np.unique(pts, axis=0)
        if len(uniq) != len(pts):
            raise DuplicatePoint("pattern contains exactly coincident points")
    return PointPattern(pts, window)


def pairwise_distances(p: PointPattern) -> np.ndarray:
    """Symmetric matrix of Euclidean inter-point distances."""
    if p.n == 0:
        return np.zeros((0, 0))
    if p.n == 1:
        return np.zeros((1, 1))
    return squareform(pdist(p.points))


def nn_distances(p: PointPattern) -> np.ndarray:
    """Distance from each point to its nearest other point."""
    if p.n < 2:
        raise TooFewPoints(f"nearest-neighbour distances need >= 2 points, got {p.n}")
    d, _ = cKDTree(p.points).query(p.points, k=2)
    return d[:, 1]


def lattice_locations(window: Window, side: int) -> np.ndarray:
    """Cell centres of a ``side x side`` lattice covering ``window``."""
    if side < 1:
        raise ConfigError("test_grid_side must be >= 1")
    xs = window.x_min + (np.arange(side) + 0.5) * window.width / side
    ys = window.y_min + (np.arange(side) + 0.5) * window.height / side
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([gx.ravel(), gy.ravel()])


def empty_space_distances(p: PointPattern, test_grid_side: int = 128, locations=None) -> np.ndarray:
    """Distance from each lattice test location to the nearest pattern point.

    ``locations`` overrides the lattice with explicit test points.
    """
    if p.n == 0:
        raise EmptyPattern("empty-space distances are undefined for an empty pattern")
    if locations is None:
        locations = lattice_locations(p.window, test_grid_side)
    d, _ = cKDTree(p.points).query(np.asarray(locations, dtype=float).reshape(-1, 2), k=1)
    return np.atleast_1d(d)


@dataclass(frozen=True, eq=False)
class EvalGrid:
    """Equidistant, strictly increasing grid of non-negative scales."""

    r_values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r_values, dtype=float).ravel()
        if r.size < 2:
            raise InvalidGrid("evaluation grid needs at least 2 points")
        if not np.all(np.isfinite(r)) or r[0] < 0:
            raise InvalidGrid("grid values must be finite and non-negative")
        steps = np.diff(r)
        if np.any(steps <= 0):
            raise InvalidGrid("grid must be strictly increasing")
        dr = (r[-1] - r[0]) / (r.size - 1)
        if np.max(np.abs(steps - dr)) > 1e-9 * max(dr, 1e-300) + 1e-15:
            raise InvalidGrid("grid must be equidistant")
        r.setflags(write=False)
        object.__setattr__(self, "r_values", r)

    @classmethod
    def linspace(cls, r_min: float, r_max: float, n: int) -> "EvalGrid":
        if n < 2 or not r_max > r_min:
            raise InvalidGrid(f"invalid grid spec r_min={r_min}, r_max={r_max}, n={n}")
        return cls(np.linspace(r_min, r_max, n))

    def __len__(self):
        return self.r_values.size

    @property
    def r_min(self) -> float:
        return float(self.r_values[0])

    @property
    def r_max(self) -> float:
        return float(self.r_values[-1])

    @property
    def step(self) -> float:
        return (self.r_max - self.r_min) / (len(self) - 1)

    def riemann_weights(self) -> np.ndarray:
        """Left Riemann-sum weights: ``r[t+1] - r[t]`` for all but the last point."""
        w = np.empty(len(self))
        w[:-1] = np.diff(self.r_values)
        w[-1] = 0.0
        return w

    def subset(self, mask) -> np.ndarray:
        return self.r_values[np.asarray(mask, dtype=bool)]


def default_grid(window: Window, n: int = 513, r_min: float = 0.0) -> EvalGrid:
    """``n`` equidistant scales on ``[r_min, 0.25 * shorter window side]``."""
    r_max = 0.25 * min(window.width, window.height)
    return EvalGrid.linspace(r_min, r_max, n)


@dataclass(frozen=True, eq=False)
class SummaryCurve:
    """Values of one functional summary statistic on an :class:`EvalGrid`.

    ``defined`` marks grid points where the estimator exists (e.g. the J
    function once the empty-space estimate reaches one); undefined entries hold
    ``nan``.
    """

    grid: EvalGrid
    values: np.ndarray
    label: str
    defined: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != len(self.grid):
            raise InvalidGrid(f"{self.label}: {v.size} values for a grid of {len(self.grid)}")
        if self.defined is None:
            d = np.isfinite(v)
        else:
            d = np.asarray(self.defined, dtype=bool).ravel() & np.isfinite(v)
        v = np.where(d, v, np.nan)
        v.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "defined", d)

    @property
    def r(self) -> np.ndarray:
        return self.grid.r_values

    def __len__(self):
        return self.values.size


# --------------------------------------------------------------------------
# file formats


def read_pattern_csv(path_or_buffer, window: Window | None = None) -> PointPattern:
    """Read the ``x,y`` CSV pattern format.

    Lines starting with ``#`` are comments; ``# window x_min x_max y_min y_max``
    supplies the window when ``window`` is not given.
    """
    if hasattr(path_or_buffer, "read"):
        text = path_or_buffer.read()
    else:
        with open(path_or_buffer, "r", encoding="utf-8") as fh:
            text = fh.read()
    file_window = None
    rows = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0].lower() == "window":
                if len(parts) != 5:
                    raise ConfigError(f"line {lineno}: window comment needs 4 numbers")
                try:
                    file_window = Window(*map(float, parts[1:]))
                except ValueError as exc:
                    raise ConfigError(f"line {lineno}: {exc}") from None
            continue
        if not header_seen:
            cols = [c.strip().lower() for c in line.split(",")]
            if cols != ["x", "y"]:
                raise ConfigError(f"line {lineno}: expected header 'x,y', got {line!r}")
            header_seen = True
            continue
        try:
            x, y = (float(c) for c in line.split(","))
        except ValueError:
            raise ConfigError(f"line {lineno}: cannot parse {line!r} as 'x,y'") from None
        rows.append((x, y))
    if not header_seen:
        raise ConfigError("missing 'x,y' header")
    win = window if window is not None else file_window
    if win is None:
        raise ConfigError("no window given and no '# window' line in the file")
    return new_pattern(np.array(rows, dtype=float).reshape(-1, 2), win)


def write_pattern_csv(p: PointPattern, path) -> None:
    buf = io.StringIO()
    w = p.window
    buf.write(f"# window {w.x_min!r} {w.x_max!r} {w.y_min!r} {w.y_max!r}\n")
    buf.write("x,y\n")
    for x, y in p.points:
        buf.write(f"{float(x)!r},{float(y)!r}\n")
    _write_text(path, buf.getvalue())


def write_curve_csv(curve: SummaryCurve, path) -> None:
    """Curve export with columns ``r,value,defined``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["r", "value", "defined"])
    for r, v, d in zip(curve.r, curve.values, curve.defined):
        writer.writerow([repr(float(r)), repr(float(v)) if d else "nan", int(d)])
    _write_text(path, buf.getvalue())


def _write_text(path, text: str) -> None:
    if hasattr(path, "write"):
        path.write(text)
        return
    dirname = os.path.dirname(os.fspath(path))
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
