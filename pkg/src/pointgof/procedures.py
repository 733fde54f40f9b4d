"""Monte Carlo tests, the balanced two-stage test, global envelopes and combined tests."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from . import classical, tda
from .errors import (
    AlphaTooSmall,
    ConfigError,
    EstimatorFailure,
    IndexOutOfGrid,
    InsufficientSimulations,
    MismatchedShapes,
    MixedDirections,
    NumericError,
    PointGofError,
)
from .orderings import MEASURES, depths_all, mc_p_value, pointwise_ranks, rank_matrix
from .pattern import EvalGrid, PointPattern, SummaryCurve, Window, _write_text, default_grid
from .simulate import Binomial, ModelSpec, Poisson, RngSeed, make_rng, simulate
from .statistics import (
    DEVIATION_VARIANTS,
    LARGE_ONLY,
    QDIR_LEVELS,
    TWO_SIDED,
    CurveMatrix,
    crps_pointwise_all,
    deviation_statistics_all,
)

__all__ = [
    "SUMMARIES",
    "STATISTICS",
    "DEPTH",
    "TestConfig",
    "TestReport",
    "Envelope",
    "compute_summaries",
    "curve_matrix",
    "score_rows",
    "default_m",
    "monte_carlo_test",
    "bits_test",
    "adjusted_p_value",
    "run_test",
    "global_envelope",
    "mad_family_envelope",
    "analytic_envelope",
    "simulation_pointwise_envelope",
    "combine_one_step",
    "combine_two_step",
    "write_envelope_csv",
]

CLASSICAL = ("K", "L", "pcf", "F", "G", "Gstar", "J")
TOPOLOGICAL = ("betti0", "betti1", "apf0", "apf1", "nd0", "euler")
SUMMARIES = CLASSICAL + TOPOLOGICAL
STATISTICS = DEVIATION_VARIANTS + ("CRPS", "POINT", "INT", "FUN", "SCORE")
VECTOR_STATISTICS = ("FUN", "SCORE")
# direction tag for stage-one depth values, where small values are extreme
DEPTH = "Depth"
_Z95 = 1.959963984540054


# --------------------------------------------------------------------------
# summaries and curve matrices


def _summary_name(name: str) -> str:
    for s in SUMMARIES:
        if s.lower() == name.lower():
            return s
    raise ConfigError(f"unknown summary {name!r}; choose from {SUMMARIES}")


def compute_summaries(p: PointPattern, names: Sequence[str], grid: EvalGrid, corr: str = "translation") -> dict:
    """Evaluate the named summaries of ``p`` on ``grid``; the diagram is computed once."""
    out = {}
    filt = diagram = None
    for raw in names:
        name = _summary_name(raw)
        if name in ("K", "L"):
            fn = classical.estimate_K if name == "K" else classical.estimate_L
            out[name] = fn(p, grid, corr)
        elif name == "pcf":
            out[name] = classical.estimate_pcf(p, grid, "none" if corr == "border" else corr)
        elif name == "F":
            out[name] = classical.estimate_F(p, grid)
        elif name == "G":
            out[name] = classical.estimate_G(p, grid)
        elif name == "Gstar":
            out[name] = classical.estimate_G_star(p, grid)
        elif name == "J":
            out[name] = classical.estimate_J(p, grid)
        else:
            if filt is None:
                filt = tda.alpha_filtration(p)
                diagram = tda.persistence(filt)
            if name == "euler":
                out[name] = tda.euler_curve(filt, grid)
            elif name == "nd0":
                out[name] = tda.nd0(diagram, grid)
            elif name.startswith("betti"):
                out[name] = tda.betti_curve(diagram, grid, int(name[-1]))
            else:
                out[name] = tda.apf(diagram, grid, int(name[-1]))
    return out


def curve_matrix(curves: Sequence[SummaryCurve]) -> tuple[CurveMatrix, float | None, int]:
    """Stack curves (observed first), keeping the first run of columns defined in every curve.

    Returns the matrix, the first dropped scale after that run (``None`` if
    nothing at the upper end was dropped) and the grid index where the run starts.
    """
    grid = curves[0].grid
    rows = np.vstack([c.values for c in curves])
    ok = np.logical_and.reduce([c.defined for c in curves])
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        raise NumericError("no evaluation point is defined for every pattern")
    start = idx[0]
    stop = start
    while stop < ok.size and ok[stop]:
        stop += 1
    if stop - start < 2:
        raise NumericError("fewer than two evaluation points are defined for every pattern")
    truncated_at = float(grid.r_values[stop]) if stop < ok.size else None
    sub = EvalGrid(grid.r_values[start:stop])
    return CurveMatrix(sub, rows[:, start:stop]), truncated_at, int(start)


def score_rows(cm: CurveMatrix, statistic: str, measure: str | None = None, *, r_index: int | None = None, weight_fn=None):
    """Values of ``statistic`` for every row and scores where small means extreme.

    Returns ``(values, scores)``; scores are pointwise ranks for scalar
    statistics and depth values for vector statistics.
    """
    stat = statistic.upper()
    if stat in DEVIATION_VARIANTS:
        vals = deviation_statistics_all(cm, stat, weight_fn)
        return vals, pointwise_ranks(vals, LARGE_ONLY)
    if stat == "CRPS":
        vals = crps_pointwise_all(cm) @ cm.grid.riemann_weights()
        return vals, pointwise_ranks(vals, LARGE_ONLY)
    if stat == "POINT":
        if r_index is None:
            raise ConfigError("POINT needs an r index fixed in advance")
        if not 0 <= r_index < cm.n:
            raise IndexOutOfGrid(f"r index {r_index} outside 0..{cm.n - 1}")
        vals = cm.rows[:, r_index].copy()
        return vals, pointwise_ranks(vals, TWO_SIDED)
    if stat == "INT":
        vals = cm.rows @ cm.grid.riemann_weights()
        return vals, pointwise_ranks(vals, TWO_SIDED)
    if stat in VECTOR_STATISTICS:
        measure = (measure or "ERL").upper()
        if measure not in MEASURES:
            raise ConfigError(f"unknown depth measure {measure!r}; choose from {MEASURES}")
        if stat == "FUN":
            vecs, side = cm.rows, TWO_SIDED
        else:
            vecs, side = crps_pointwise_all(cm), LARGE_ONLY
        return vecs, depths_all(measure, rank_matrix(vecs, side))
    raise ConfigError(f"unknown statistic {statistic!r}; choose from {STATISTICS}")


def default_m(statistic: str, measure: str | None = None) -> int:
    if statistic.upper() not in VECTOR_STATISTICS:
        return 99
    return 2499 if (measure or "ERL").upper() == "RANK" else 499


# --------------------------------------------------------------------------
# configuration and report


@dataclass(frozen=True, eq=False)
class TestConfig:
    """Settings of a single goodness-of-fit test.

    ``estimator`` maps a pattern to a fitted ``ModelSpec`` and is only used by
    the two-stage test; for a Poisson null it defaults to the intensity
    estimate ``n / |W|``.
    """

    __test__ = False

    null: ModelSpec
    summary: str = "L"
    statistic: str = "MAD"
    measure: str | None = None
    grid: EvalGrid | None = None
    m: int | None = None
    s: int | None = None
    alpha: float = 0.05
    seed: int | RngSeed = 0
    condition: bool = True
    r_index: int | None = None
    corr: str = "translation"
    weight_fn: Callable | None = None
    estimator: Callable | None = None
    threads: int = 1
    envelope: bool = False

    def __post_init__(self):
        object.__setattr__(self, "summary", _summary_name(self.summary))
        stat = self.statistic.upper()
        if stat not in STATISTICS:
            raise ConfigError(f"unknown statistic {self.statistic!r}; choose from {STATISTICS}")
        object.__setattr__(self, "statistic", stat)
        if stat in VECTOR_STATISTICS:
            measure = (self.measure or "ERL").upper()
            if measure not in MEASURES:
                raise ConfigError(f"unknown depth measure {self.measure!r}; choose from {MEASURES}")
            object.__setattr__(self, "measure", measure)
        else:
            object.__setattr__(self, "measure", None)
        if stat == "POINT" and self.r_index is None:
            raise ConfigError("POINT needs --r-index fixed before seeing the data")
        if self.m is None:
            object.__setattr__(self, "m", default_m(stat, self.measure))
        if self.s is None:
            object.__setattr__(self, "s", 99)
        if int(self.m) < 1 or int(self.s) < 1:
            raise ConfigError("m and s must be at least 1")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.threads) < 1:
            raise ConfigError("threads must be at least 1")

    @property
    def root(self) -> RngSeed:
        return self.seed if isinstance(self.seed, RngSeed) else RngSeed(self.seed)

    def grid_for(self, window: Window) -> EvalGrid:
        return self.grid if self.grid is not None else default_grid(window)


@dataclass(frozen=True, eq=False)
class Envelope:
    """Band ``[lo, hi]`` on ``r`` with the observed and central curves."""

    r: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    obs: np.ndarray
    mean: np.ndarray
    kind: str

    def exits(self) -> np.ndarray:
        return (self.obs < self.lo) | (self.obs > self.hi)


@dataclass(eq=False)
class TestReport:
    __test__ = False

    p_value: float
    method: str
    statistic: str
    measure: str | None
    m: int
    alpha: float
    seed: int
    s: int | None = None
    summary: str | None = None
    truncated_at: float | None = None
    values: np.ndarray | None = None
    scores: np.ndarray | None = None
    envelope: Envelope | list | None = None
    envelope_reject: bool | None = None
    threshold_tie: bool = False
    stage_p_values: np.ndarray | None = None

    @property
    def reject(self) -> bool:
        return self.p_value <= self.alpha + 1e-12

    @property
    def decision(self) -> str:
        return "reject" if self.reject else "retain"

    @property
    def ci_halfwidth(self) -> float:
        """Normal-approximation half-width of a 95% interval for the p-value."""
        count = self.s if self.method == "bits" else self.m
        p = self.p_value
        return _Z95 * math.sqrt(p * (1 - p) / count)

    @property
    def flags(self) -> list[str]:
        """Caveats worth surfacing next to the p-value."""
        out = []
        if self.statistic.startswith("QDIR"):
            out.append(f"qdir_levels={QDIR_LEVELS[0]},{QDIR_LEVELS[1]} (fixed, independent of alpha)")
        if self.threshold_tie:
            out.append("depth ties straddle the envelope threshold; consider a larger m")
        return out

    def to_dict(self) -> dict:
        return {
            "p_value": self.p_value,
            "method": self.method,
            "statistic": self.statistic,
            "measure": self.measure,
            "summary": self.summary,
            "m": self.m,
            "s": self.s,
            "alpha": self.alpha,
            "decision": self.decision,
            "ci_halfwidth": self.ci_halfwidth,
            "seed": self.seed.seed if isinstance(self.seed, RngSeed) else self.seed,
            "truncated_at": self.truncated_at,
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# Monte Carlo machinery


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _simulated_curves(cfg: TestConfig, spec, window, grid, seeds):
    def one(seed):
        return compute_summaries(simulate(spec, window, seed), [cfg.summary], grid, cfg.corr)[cfg.summary]

    return _map(one, seeds, cfg.threads)


def _mc_scores(cfg: TestConfig, observed_curve, sims):
    cm, trunc, start = curve_matrix([observed_curve] + list(sims))
    r_index = None if cfg.r_index is None else cfg.r_index - start
    if r_index is not None and not 0 <= r_index < cm.n:
        raise IndexOutOfGrid(f"the summary is undefined at grid index {cfg.r_index}")
    vals, scores = score_rows(cm, cfg.statistic, cfg.measure, r_index=r_index, weight_fn=cfg.weight_fn)
    return cm, trunc, vals, scores


def _check_r_index(cfg: TestConfig, grid: EvalGrid):
    if cfg.r_index is not None and not 0 <= cfg.r_index < len(grid):
        raise IndexOutOfGrid(f"r index {cfg.r_index} outside 0..{len(grid) - 1}")


def _null_for_mc(cfg: TestConfig, observed: PointPattern):
    if cfg.condition and isinstance(cfg.null, Poisson):
        return Binomial(observed.n)
    return cfg.null


def monte_carlo_test(cfg: TestConfig, observed: PointPattern) -> TestReport:
    """Exact Monte Carlo test of a simple null hypothesis.

    Simulation ``i`` uses the substream ``(0, i)`` of ``cfg.seed``.  A
    homogeneous Poisson null is conditioned on the observed point count unless
    ``cfg.condition`` is false.
    """
    spec = _null_for_mc(cfg, observed)
    window = observed.window
    grid = cfg.grid_for(window)
    _check_r_index(cfg, grid)
    root = cfg.root
    obs = compute_summaries(observed, [cfg.summary], grid, cfg.corr)[cfg.summary]
    sims = _simulated_curves(cfg, spec, window, grid, [root.child(0, i) for i in range(1, cfg.m + 1)])
    cm, trunc, vals, scores = _mc_scores(cfg, obs, sims)
    report = TestReport(
        p_value=mc_p_value(scores),
        method="monte_carlo",
        statistic=cfg.statistic,
        measure=cfg.measure,
        m=cfg.m,
        alpha=cfg.alpha,
        seed=cfg.seed,
        summary=cfg.summary,
        truncated_at=trunc,
        values=vals,
        scores=scores,
    )
    if cfg.envelope:
        _attach_envelope(report, cfg, cm)
    return report


def _attach_envelope(report: TestReport, cfg: TestConfig, cm: CurveMatrix):
    if cfg.statistic in VECTOR_STATISTICS:
        env, rej, tie = global_envelope(cm, cfg.measure, cfg.alpha, statistic=cfg.statistic)
        report.threshold_tie = tie
    elif cfg.statistic in ("MAD", "ST", "QDIR"):
        env, rej = mad_family_envelope(cm, cfg.statistic, cfg.alpha)
    else:
        raise ConfigError(f"{cfg.statistic} has no envelope representation; use FUN, SCORE, MAD, ST or QDIR")
    report.envelope = env
    report.envelope_reject = rej


def _fit(estimator, pattern):
    try:
        spec = estimator(pattern)
    except PointGofError:
        raise
    except Exception as exc:  # the hook is user code
        raise EstimatorFailure(f"parameter estimation failed: {exc}") from exc
    if spec is None:
        raise EstimatorFailure("parameter estimation returned no model")
    return spec


def _default_estimator(cfg: TestConfig):
    if cfg.estimator is not None:
        return cfg.estimator
    if isinstance(cfg.null, Poisson):
        return lambda p: Poisson(p.n / p.window.area)
    raise ConfigError("the two-stage test needs an estimator for this null model")


def _rank_count(scores) -> int:
    """``1 + #{i >= 1: score_i <= score_0}``, the numerator of the Monte Carlo p-value."""
    return 1 + int(np.count_nonzero(scores[1:] <= scores[0]))


def adjusted_p_value(k0: int, kj, gen: np.random.Generator) -> float:
    """Second-stage p-value ``(1 + #{p_j < p_0} + U) / (s + 1)``.

    The stage p-values are compared through their integer numerators ``k``.
    ``U`` is uniform on ``0..t`` where ``t`` counts the ties ``p_j = p_0``.
    """
    kj = np.asarray(kj)
    less = int(np.count_nonzero(kj < k0))
    ties = int(np.count_nonzero(kj == k0))
    extra = int(gen.integers(0, ties + 1))
    return (1 + less + extra) / (kj.size + 1)


def bits_test(cfg: TestConfig, observed: PointPattern) -> TestReport:
    """Balanced independent two-stage test for a composite null hypothesis.

    Substreams: ``(0, i)`` for stage one, ``(1, j, 0)`` for the second-stage
    pattern ``y_j`` and ``(1, j, i)`` for its simulations, ``(2,)`` for the tie
    randomisation.  Ties ``p_j = p_0`` are broken by placing ``p_0`` uniformly
    at random within its tie group, so the number of tied ``p_j`` counted as
    more extreme is uniform on ``0..t``.
    """
    estimator = _default_estimator(cfg)
    window = observed.window
    grid = cfg.grid_for(window)
    _check_r_index(cfg, grid)
    root = cfg.root
    m, s = cfg.m, cfg.s

    theta0 = _fit(estimator, observed)
    obs = compute_summaries(observed, [cfg.summary], grid, cfg.corr)[cfg.summary]
    sims = _simulated_curves(cfg, theta0, window, grid, [root.child(0, i) for i in range(1, m + 1)])
    _, trunc, vals, scores = _mc_scores(cfg, obs, sims)
    k0 = _rank_count(scores)

    def stage_two(j):
        y = simulate(theta0, window, root.child(1, j, 0))
        theta_j = _fit(estimator, y)
        y_curve = compute_summaries(y, [cfg.summary], grid, cfg.corr)[cfg.summary]
        z = [
            compute_summaries(simulate(theta_j, window, root.child(1, j, i)), [cfg.summary], grid, cfg.corr)[cfg.summary]
            for i in range(1, m + 1)
        ]
        return _rank_count(_mc_scores(cfg, y_curve, z)[3])

    kj = np.array(_map(stage_two, range(1, s + 1), cfg.threads))
    p_adj = adjusted_p_value(k0, kj, make_rng(root.child(2)))
    return TestReport(
        p_value=p_adj,
        method="bits",
        statistic=cfg.statistic,
        measure=cfg.measure,
        m=m,
        s=s,
        alpha=cfg.alpha,
        seed=cfg.seed,
        summary=cfg.summary,
        truncated_at=trunc,
        values=vals,
        scores=scores,
        stage_p_values=np.concatenate([[k0], kj]) / (m + 1),
    )


def run_test(cfg: TestConfig, observed: PointPattern, method: str = "auto") -> TestReport:
    """``monte_carlo_test`` or ``bits_test``; ``auto`` uses the plain test for simple or conditioned nulls."""
    method = method.lower()
    if method == "auto":
        simple = not isinstance(cfg.null, Poisson) or cfg.condition
        method = "mc" if simple and cfg.estimator is None else "bits"
    if method in ("mc", "monte_carlo"):
        return monte_carlo_test(cfg, observed)
    if method == "bits":
        return bits_test(cfg, observed)
    raise ConfigError(f"unknown test method {method!r}")


# --------------------------------------------------------------------------
# envelopes


def _k_alpha(alpha: float, m: int) -> float:
    k = alpha * (m + 1)
    if k < 1 - 1e-9:
        raise AlphaTooSmall(f"alpha*(m+1) = {k:g} < 1: increase m or alpha")
    return k


def global_envelope(cm: CurveMatrix, measure: str = "ERL", alpha: float = 0.05, *, statistic: str = "FUN"):
    """Global envelope from a depth ordering.

    Returns ``(envelope, reject, threshold_tie)``.  The band spans the rows whose
    depth is at least the threshold; ``threshold_tie`` flags depth ties that
    keep the number of strictly more extreme rows below ``alpha * (m + 1)``.
    """
    k = _k_alpha(alpha, cm.m)
    vecs, nu = score_rows(cm, statistic, measure)
    sorted_nu = np.sort(nu)
    levels = np.unique(nu)
    below = np.searchsorted(sorted_nu, levels, side="left")
    nu_alpha = levels[below <= k + 1e-9].max()
    keep = nu >= nu_alpha
    lo = vecs[keep].min(axis=0)
    hi = vecs[keep].max(axis=0)
    obs = vecs[0]
    env = Envelope(cm.grid.r_values, lo, hi, obs, vecs[1:].mean(axis=0), "DepthMeasure")
    tie = bool(np.count_nonzero(nu < nu_alpha) < k - 1e-9)
    return env, bool(np.any(env.exits())), tie


def mad_family_envelope(cm: CurveMatrix, variant: str = "MAD", alpha: float = 0.05):
    """Envelope ``T - d_alpha * s_low, T + d_alpha * s_high`` around the simulation mean.

    ``d_alpha`` is the ``alpha (m+1)``-th largest statistic.  Returns
    ``(envelope, reject)`` with ``reject`` meaning the observed statistic
    exceeds ``d_alpha``.
    """
    variant = variant.upper()
    if variant not in ("MAD", "ST", "QDIR"):
        raise ConfigError("envelopes exist for MAD, ST and QDIR")
    k = _k_alpha(alpha, cm.m)
    stats = deviation_statistics_all(cm, variant)
    d = np.sort(stats)[::-1][int(math.ceil(k - 1e-9)) - 1]
    rows = cm.rows
    centre = rows[1:].mean(axis=0)
    if variant == "MAD":
        s_lo = s_hi = np.ones(cm.n)
    elif variant == "ST":
        s_lo = s_hi = rows.std(axis=0, ddof=1)
    else:
        q_lo, q_hi = np.quantile(rows, QDIR_LEVELS, axis=0)
        s_lo, s_hi = np.abs(q_lo - centre), np.abs(q_hi - centre)
    with np.errstate(invalid="ignore"):
        lo = np.nan_to_num(centre - d * s_lo, nan=-np.inf)
        hi = np.nan_to_num(centre + d * s_hi, nan=np.inf)
    env = Envelope(cm.grid.r_values, lo, hi, rows[0].copy(), centre, "MADFamily")
    return env, bool(stats[0] > d)


def analytic_envelope(grid: EvalGrid, reference, sds, alpha: float = 0.05, observed=None, *, n: int | None = None) -> Envelope:
    """Pointwise normal bands at the local level ``1 - (1 - alpha)^(1/n)``.

    ``n`` is the number of simultaneous comparisons and defaults to the grid size.
    """
    n = len(grid) if n is None else int(n)
    if n < 1:
        raise ConfigError("n must be at least 1")
    beta = 1.0 - (1.0 - alpha) ** (1.0 / n)
    q = norm.ppf(1.0 - beta / 2.0)
    ref = np.asarray(reference, dtype=float)
    sd = np.asarray(sds, dtype=float)
    obs = ref.copy() if observed is None else np.asarray(observed, dtype=float)
    return Envelope(grid.r_values, ref - q * sd, ref + q * sd, obs, ref, "Analytic")


def simulation_pointwise_envelope(cm: CurveMatrix, beta: float | None = None, *, alpha: float | None = None) -> Envelope:
    """Pointwise ``k``-th lowest and highest simulated values.

    With ``beta`` given, ``k = beta (m+1) / 2`` must be a positive integer.
    With ``alpha`` instead, ``beta = 1 - (1 - alpha)^(1/n)`` and ``k`` is
    rounded down.
    """
    m = cm.m
    if (beta is None) == (alpha is None):
        raise ConfigError("give exactly one of beta and alpha")
    if beta is not None:
        k_real = beta * (m + 1) / 2
        k = int(round(k_real))
        if abs(k_real - k) > 1e-9 or k < 1:
            raise InsufficientSimulations(f"beta*(m+1)/2 = {k_real:g} must be a positive integer")
    else:
        beta = 1.0 - (1.0 - alpha) ** (1.0 / cm.n)
        k = int(math.floor(beta * (m + 1) / 2 + 1e-9))
        if k < 1:
            need = int(math.ceil(2 / beta - 1 - 1e-9))
            raise InsufficientSimulations(f"local level {beta:.3g} needs m >= {need} simulations, got m={m}")
    sims = np.sort(cm.rows[1:], axis=0)
    return Envelope(cm.grid.r_values, sims[k - 1], sims[m - k], cm.rows[0].copy(), sims.mean(axis=0), "Pointwise")


def write_envelope_csv(env: Envelope, path) -> None:
    lines = ["r,lo,hi,obs,mean"]
    for row in zip(env.r, env.lo, env.hi, env.obs, env.mean):
        lines.append(",".join(repr(float(v)) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# combining several statistics


def combine_one_step(matrices: Sequence[CurveMatrix], measure: str = "ERL", alpha: float = 0.05, *, seed: int = 0) -> TestReport:
    """Concatenate the curves of every pattern into one long vector and test with a depth ordering."""
    if not matrices:
        raise ConfigError("nothing to combine")
    shapes = {cm.rows.shape for cm in matrices}
    if len(shapes) != 1:
        raise MismatchedShapes(f"all curve matrices need the same m and number of points, got {sorted(shapes)}")
    measure = measure.upper()
    long = np.hstack([cm.rows for cm in matrices])
    nu = depths_all(measure, rank_matrix(long, TWO_SIDED))
    m = matrices[0].m
    report = TestReport(
        p_value=mc_p_value(nu), method="one_step", statistic="FUN", measure=measure, m=m, alpha=alpha, seed=seed,
        values=long, scores=nu,
    )
    if alpha * (m + 1) >= 1 - 1e-9:
        k = alpha * (m + 1)
        levels = np.unique(nu)
        below = np.searchsorted(np.sort(nu), levels, side="left")
        keep = nu >= levels[below <= k + 1e-9].max()
        envs = [
            Envelope(cm.grid.r_values, cm.rows[keep].min(axis=0), cm.rows[keep].max(axis=0), cm.rows[0].copy(),
                     cm.rows[1:].mean(axis=0), "DepthMeasure")
            for cm in matrices
        ]
        report.envelope = envs
        report.envelope_reject = any(bool(np.any(e.exits())) for e in envs)
    return report


def combine_two_step(table, directions: Sequence[str], alpha: float = 0.05, *, seed: int = 0) -> TestReport:
    """Combine per-test values (rows = patterns, observed first) with a one-sided ERL test.

    ``directions`` gives each column's meaning: ``LargeOnly`` (large values
    extreme) or ``Depth`` (small values extreme, inverted as ``1 - depth``).
    Two-sided columns cannot be combined this way.
    """
    t = np.asarray(table, dtype=float)
    if t.ndim == 1:
        t = t[:, None]
    if t.shape[1] != len(directions):
        raise MismatchedShapes(f"{t.shape[1]} columns but {len(directions)} directions")
    cols = []
    for j, d in enumerate(directions):
        if d == LARGE_ONLY:
            cols.append(t[:, j])
        elif d == DEPTH:
            cols.append(1.0 - t[:, j])
        else:
            raise MixedDirections(f"column {j} is {d}; only large-is-extreme columns or depths can be combined")
    v = np.column_stack(cols)
    nu = depths_all("ERL", rank_matrix(v, LARGE_ONLY))
    return TestReport(
        p_value=mc_p_value(nu), method="two_step", statistic="combined", measure="ERL", m=t.shape[0] - 1,
        alpha=alpha, seed=seed, values=v, scores=nu,
    )
