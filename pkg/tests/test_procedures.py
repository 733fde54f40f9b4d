import json
import math

import numpy as np
import pytest
from scipy.stats import norm

import pointgof.procedures as proc
from pointgof.errors import (
    AlphaTooSmall,
    ConfigError,
    EstimatorFailure,
    IndexOutOfGrid,
    InsufficientSimulations,
    MismatchedShapes,
    MixedDirections,
)
from pointgof.orderings import depths_all, mc_p_value, pointwise_ranks, rank_matrix
from pointgof.pattern import EvalGrid, SummaryCurve, unit_square
from pointgof.procedures import (
    DEPTH,
    TestConfig,
    adjusted_p_value,
    analytic_envelope,
    combine_one_step,
    combine_two_step,
    curve_matrix,
    global_envelope,
    mad_family_envelope,
    monte_carlo_test,
    run_test,
    score_rows,
    simulation_pointwise_envelope,
    write_envelope_csv,
)
from pointgof.simulate import Binomial, MaternCluster, Poisson, RngSeed, simulate
from pointgof.statistics import LARGE_ONLY, TWO_SIDED, CurveMatrix, deviation_statistics_all

W = unit_square()
SMALL_GRID = EvalGrid.linspace(0.0, 0.25, 65)


def _cm(rows, hi=1.0):
    rows = np.asarray(rows, dtype=float)
    return CurveMatrix(EvalGrid.linspace(0.0, hi, rows.shape[1]), rows)


@pytest.fixture(scope="module")
def clustered():
    return simulate(MaternCluster(50, 0.1, 5), W, RngSeed(123))


def test_p_value_examples():
    vals = np.concatenate([[100.0], np.arange(19.0)])
    assert mc_p_value(pointwise_ranks(vals, LARGE_ONLY)) == pytest.approx(0.05)
    assert mc_p_value(pointwise_ranks(np.ones(20), LARGE_ONLY)) == 1.0
    # three of 99 simulations are at least as extreme as the observation
    vals = np.concatenate([[50.0], [50.0, 70.0, 80.0], np.linspace(0, 40, 96)])
    assert mc_p_value(pointwise_ranks(vals, LARGE_ONLY)) == pytest.approx(0.04)


def test_config_validation():
    with pytest.raises(ConfigError):
        TestConfig(Poisson(100), statistic="POINT")
    with pytest.raises(ConfigError):
        TestConfig(Poisson(100), statistic="NOPE")
    with pytest.raises(ConfigError):
        TestConfig(Poisson(100), summary="Z")
    with pytest.raises(ConfigError):
        TestConfig(Poisson(100), m=0)
    with pytest.raises(ConfigError):
        TestConfig(Poisson(100), alpha=1.0)
    assert TestConfig(Poisson(1)).m == 99
    assert TestConfig(Poisson(1), statistic="FUN").m == 499
    assert TestConfig(Poisson(1), statistic="FUN", measure="rank").m == 2499
    assert TestConfig(Poisson(1)).s == 99
    assert TestConfig(Poisson(1), summary="betti1").summary == "betti1"


def test_monte_carlo_test_end_to_end(clustered):
    cfg = TestConfig(Poisson(250), summary="L", statistic="MAD", grid=SMALL_GRID, m=19, seed=5)
    rep = monte_carlo_test(cfg, clustered)
    assert rep.p_value * 20 == pytest.approx(round(rep.p_value * 20))
    assert rep.values.shape == (20,)
    again = monte_carlo_test(cfg, clustered)
    assert again.p_value == rep.p_value
    np.testing.assert_array_equal(again.values, rep.values)
    threaded = monte_carlo_test(TestConfig(Poisson(250), grid=SMALL_GRID, m=19, seed=5, threads=3), clustered)
    np.testing.assert_array_equal(threaded.values, rep.values)


def test_poisson_null_is_conditioned(monkeypatch, clustered):
    seen = []
    real = proc.simulate

    def spy(spec, window, rng):
        seen.append(spec)
        return real(spec, window, rng)

    monkeypatch.setattr(proc, "simulate", spy)
    monte_carlo_test(TestConfig(Poisson(10), grid=SMALL_GRID, m=4), clustered)
    assert seen == [Binomial(clustered.n)] * 4
    seen.clear()
    monte_carlo_test(TestConfig(Poisson(10), grid=SMALL_GRID, m=4, condition=False), clustered)
    assert seen == [Poisson(10)] * 4


def test_point_statistic_index_checks(clustered):
    with pytest.raises(IndexOutOfGrid):
        monte_carlo_test(TestConfig(Poisson(1), statistic="POINT", r_index=65, grid=SMALL_GRID, m=3), clustered)
    rep = monte_carlo_test(TestConfig(Poisson(1), statistic="POINT", r_index=10, grid=SMALL_GRID, m=9), clustered)
    assert 0 < rep.p_value <= 1


def test_adjusted_p_value():
    gen = np.random.default_rng(0)
    # s = 1 and p_1 > p_0
    assert adjusted_p_value(3, [7], gen) == 0.5
    assert adjusted_p_value(3, [1, 2, 9], gen) == 0.75
    draws = [adjusted_p_value(5, [5, 5, 5], gen) for _ in range(4000)]
    values, counts = np.unique(draws, return_counts=True)
    np.testing.assert_allclose(values, [0.25, 0.5, 0.75, 1.0])
    assert np.all(np.abs(counts / 4000 - 0.25) < 0.03)


def test_bits_simulation_count(monkeypatch, clustered):
    calls = []
    real = proc.simulate

    def spy(spec, window, rng):
        calls.append(rng)
        return real(spec, window, rng)

    monkeypatch.setattr(proc, "simulate", spy)
    m, s = 4, 3
    rep = run_test(TestConfig(Poisson(250), grid=SMALL_GRID, m=m, s=s, seed=2), clustered, "bits")
    assert len(calls) == m + s * (m + 1)
    assert len(set(calls)) == len(calls)
    assert rep.method == "bits" and rep.p_value * (s + 1) == pytest.approx(round(rep.p_value * (s + 1)))
    assert rep.stage_p_values.shape == (s + 1,)


def test_bits_estimator_failure(clustered):
    def broken(p):
        raise RuntimeError("no fit")

    cfg = TestConfig(Poisson(250), grid=SMALL_GRID, m=2, s=1, estimator=broken)
    with pytest.raises(EstimatorFailure):
        run_test(cfg, clustered, "bits")


def test_run_test_method_choice(clustered):
    cfg = TestConfig(Poisson(250), grid=SMALL_GRID, m=3, s=1)
    assert run_test(cfg, clustered).method == "monte_carlo"
    assert run_test(TestConfig(Poisson(250), grid=SMALL_GRID, m=3, s=1, condition=False), clustered).method == "bits"
    with pytest.raises(ConfigError):
        run_test(cfg, clustered, "asymptotic")


def test_report_json(clustered):
    rep = monte_carlo_test(TestConfig(Poisson(250), grid=SMALL_GRID, m=19, seed=7), clustered)
    d = json.loads(rep.to_json())
    assert set(d) == {"p_value", "method", "statistic", "measure", "summary", "m", "s", "alpha", "decision",
                      "ci_halfwidth", "seed", "truncated_at", "flags"}
    assert d["flags"] == []
    assert d["decision"] == ("reject" if rep.p_value <= 0.05 else "retain")
    p = rep.p_value
    assert d["ci_halfwidth"] == pytest.approx(1.96 * math.sqrt(p * (1 - p) / 19), rel=1e-3)
    assert d["seed"] == 7


def test_report_flags_qdir(clustered):
    rep = monte_carlo_test(TestConfig(Poisson(250), grid=SMALL_GRID, statistic="QDIR", m=19, seed=7), clustered)
    assert any("qdir_levels=0.025,0.975" in f for f in rep.flags)


def test_curve_matrix_truncation():
    g = EvalGrid.linspace(0.0, 1.0, 6)
    a = SummaryCurve(g, [1.0, 1, 1, 1, np.nan, np.nan], "J")
    b = SummaryCurve(g, [np.nan, 1.0, 1, 1, 1, np.nan], "J")
    cm, trunc, start = curve_matrix([a, b])
    assert cm.n == 3 and start == 1 and trunc == pytest.approx(0.8)
    cm, trunc, start = curve_matrix([a, a])
    assert trunc == pytest.approx(0.8) and start == 0


def test_global_envelope_drops_most_extreme_row(rng):
    rows = rng.normal(size=(20, 15))
    cm = _cm(rows)
    env, reject, tie = global_envelope(cm, "ERL", 0.05)
    nu = depths_all("ERL", rank_matrix(rows, TWO_SIDED))
    worst = np.argmin(nu)
    assert np.count_nonzero(nu == nu[worst]) == 1
    rest = np.delete(rows, worst, axis=0)
    np.testing.assert_array_equal(env.lo, rest.min(axis=0))
    np.testing.assert_array_equal(env.hi, rest.max(axis=0))
    assert not tie
    assert np.all(env.lo <= env.hi)


def test_global_envelope_identical_rows():
    env, reject, _ = global_envelope(_cm(np.ones((20, 5))), "RANK", 0.05)
    assert not reject
    np.testing.assert_array_equal(env.lo, env.hi)
    with pytest.raises(AlphaTooSmall):
        global_envelope(_cm(np.ones((20, 5))), "ERL", 0.01)


@pytest.mark.parametrize("measure", ["RANK", "ERL"])
def test_envelope_p_value_duality(rng, measure):
    for _ in range(50):
        rows = rng.normal(size=(40, 8))
        cm = _cm(rows)
        _, nu = score_rows(cm, "FUN", measure)
        p = mc_p_value(nu)
        env, reject, tie = global_envelope(cm, measure, 0.05)
        if tie:
            continue
        assert reject == (p <= 0.05 + 1e-12)


def test_mad_envelope(rng):
    cm = _cm(rng.normal(size=(40, 12)))
    env, reject = mad_family_envelope(cm, "MAD", 0.05)
    width = env.hi - env.lo
    np.testing.assert_allclose(width, width[0])
    stats = deviation_statistics_all(cm, "MAD")
    d = np.sort(stats)[::-1][1]
    np.testing.assert_allclose(width, 2 * d)
    assert reject == (stats[0] > d)
    assert reject == bool(np.any(env.exits()))


def test_st_envelope_width_proportional_to_sd(rng):
    rows = rng.normal(size=(40, 10)) * np.linspace(0.5, 3, 10)
    env, _ = mad_family_envelope(_cm(rows), "ST", 0.05)
    ratio = (env.hi - env.lo) / rows.std(axis=0, ddof=1)
    np.testing.assert_allclose(ratio, ratio[0])
    with pytest.raises(ConfigError):
        mad_family_envelope(_cm(rows), "DCLF", 0.05)


def test_analytic_envelope():
    g = EvalGrid(np.array([0.0, 1.0]))
    # a single comparison needs no correction
    env = analytic_envelope(g, [1.0, 2.0], [0.5, 1.0], alpha=0.05, n=1)
    q = norm.ppf(0.975)
    np.testing.assert_allclose(env.lo, [1 - 0.5 * q, 2 - q])
    np.testing.assert_allclose(env.hi, [1 + 0.5 * q, 2 + q])
    env = analytic_envelope(g, [1.0, 2.0], [0.5, 1.0], alpha=0.05)
    beta = 1 - 0.95**0.5
    np.testing.assert_allclose(env.hi - [1.0, 2.0], norm.ppf(1 - beta / 2) * np.array([0.5, 1.0]))


def test_simulation_pointwise_envelope(rng):
    n = 50
    grid = EvalGrid.linspace(0.0, 1.0, n)
    rows = rng.normal(size=(2000, n))
    env = simulation_pointwise_envelope(CurveMatrix(grid, rows), alpha=0.05)
    np.testing.assert_array_equal(env.lo, rows[1:].min(axis=0))
    np.testing.assert_array_equal(env.hi, rows[1:].max(axis=0))
    simulation_pointwise_envelope(CurveMatrix(grid, rows[:1951]), alpha=0.05)
    with pytest.raises(InsufficientSimulations):
        simulation_pointwise_envelope(CurveMatrix(grid, rows[:1950]), alpha=0.05)
    small = CurveMatrix(grid, rows[:100])
    with pytest.raises(InsufficientSimulations):
        simulation_pointwise_envelope(small, beta=0.03)
    env = simulation_pointwise_envelope(small, beta=0.04)
    srt = np.sort(rows[1:100], axis=0)
    np.testing.assert_array_equal(env.lo, srt[1])
    np.testing.assert_array_equal(env.hi, srt[-2])


def test_combine_one_step(rng):
    a = _cm(rng.normal(size=(30, 6)))
    b = _cm(rng.normal(size=(30, 4)), hi=2.0)
    rep = combine_one_step([a, a], "ERL", 0.05)
    single = CurveMatrix(EvalGrid.linspace(0, 1, 12), np.hstack([a.rows, a.rows]))
    assert rep.p_value == mc_p_value(score_rows(single, "FUN", "ERL")[1])
    assert rep.values.shape == (30, 12)
    with pytest.raises(MismatchedShapes):
        combine_one_step([a, b])
    assert len(rep.envelope) == 2


def test_combine_two_step(rng):
    vals = rng.gamma(2.0, size=30)
    rep = combine_two_step(vals[:, None], [LARGE_ONLY])
    assert rep.p_value == mc_p_value(pointwise_ranks(vals, LARGE_ONLY))
    depth = rng.uniform(size=30)
    rep = combine_two_step(np.column_stack([vals, depth]), [LARGE_ONLY, DEPTH])
    assert 0 < rep.p_value <= 1
    with pytest.raises(MixedDirections):
        combine_two_step(np.column_stack([vals, depth]), [LARGE_ONLY, TWO_SIDED])
    with pytest.raises(MismatchedShapes):
        combine_two_step(np.column_stack([vals, depth]), [LARGE_ONLY])


def test_envelope_csv(tmp_path, rng):
    env, _ = mad_family_envelope(_cm(rng.normal(size=(20, 3))), "MAD", 0.05)
    path = tmp_path / "env.csv"
    write_envelope_csv(env, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,lo,hi,obs,mean" and len(lines) == 4
