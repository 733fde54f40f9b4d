import math

import numpy as np
import pytest

from pointgof.classical import (
    estimate_F,
    estimate_G,
    estimate_G_star,
    estimate_J,
    estimate_K,
    estimate_L,
    estimate_pcf,
)
from pointgof.errors import BandwidthNonpositive, ConfigError, EmptyPattern, NoValidTestLocations, TooFewPoints
from pointgof.pattern import EvalGrid, Window, lattice_locations, new_pattern, unit_square
from pointgof.simulate import SSI, Poisson, RngSeed, simulate

from conftest import random_pattern

W = unit_square()
GRID = EvalGrid.linspace(0.0, 0.25, 101)


@pytest.fixture(scope="module")
def csr_patterns():
    return [simulate(Poisson(100), W, RngSeed(314, (i,))) for i in range(500)]


def _within_3se(samples, target):
    samples = np.asarray(samples, dtype=float)
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    return abs(samples.mean() - target) <= 3 * se


def test_K_no_pairs_below_separation():
    p = new_pattern([(0.2, 0.5), (0.5, 0.5)], W)
    K = estimate_K(p, GRID)
    assert np.all(K.values[GRID.r_values < 0.3] == 0)
    assert np.all(estimate_L(p, GRID).values[GRID.r_values < 0.3] == 0)


def test_L_is_root_of_K_over_pi(rng):
    p = random_pattern(rng, 60)
    K, L = estimate_K(p, GRID), estimate_L(p, GRID)
    np.testing.assert_allclose(L.values, np.sqrt(K.values / np.pi))


@pytest.mark.parametrize("n", [2, 10, 57, 100])
def test_K_without_correction_matches_brute_force(rng, n):
    p = random_pattern(rng, n)
    r = GRID.r_values
    count = np.zeros(len(r))
    for a in range(n):
        for b in range(n):
            if a != b:
                count += math.dist(p.points[a], p.points[b]) <= r
    lam2 = n * (n - 1) / W.area**2
    np.testing.assert_allclose(estimate_K(p, GRID, "none").values, count / (lam2 * W.area), rtol=1e-12)


def test_K_translation_weights_brute_force(rng):
    w = Window(0, 2, 0, 1)
    p = random_pattern(rng, 30, w)
    r = GRID.r_values
    acc = np.zeros(len(r))
    for a in range(p.n):
        for b in range(p.n):
            if a != b:
                dx, dy = p.points[a] - p.points[b]
                wt = w.area / ((w.width - abs(dx)) * (w.height - abs(dy)))
                acc += wt * (math.hypot(dx, dy) <= r)
    lam2 = p.n * (p.n - 1) / w.area**2
    np.testing.assert_allclose(estimate_K(p, GRID).values, acc / (lam2 * w.area), rtol=1e-12)


def test_K_border_brute_force(rng):
    p = random_pattern(rng, 40)
    r = GRID.r_values
    b = W.boundary_distance(p.points)
    lam = p.n / W.area
    expected = []
    for rk in r:
        keep = np.flatnonzero(b >= rk)
        if keep.size == 0:
            expected.append(np.nan)
            continue
        c = sum(math.dist(p.points[a], p.points[j]) <= rk for a in keep for j in range(p.n) if j != a)
        expected.append(c / (keep.size * lam))
    K = estimate_K(p, GRID, "border")
    np.testing.assert_allclose(K.values, expected, rtol=1e-12)


def test_K_errors():
    with pytest.raises(TooFewPoints):
        estimate_K(new_pattern([(0.5, 0.5)], W), GRID)
    with pytest.raises(ConfigError):
        estimate_K(new_pattern([(0.5, 0.5), (0.1, 0.1)], W), GRID, "isotropic")


def test_K_csr_mean(csr_patterns):
    g = EvalGrid.linspace(0.0, 0.1, 11)
    vals = [estimate_K(p, g).values[-1] for p in csr_patterns]
    assert _within_3se(vals, math.pi * 0.01)


def test_pcf_zero_when_pairs_far_apart():
    p = new_pattern([(0.0, 0.0), (1.0, 1.0)], W)
    g = EvalGrid.linspace(0.01, 0.2, 20)
    vals = estimate_pcf(p, g, bandwidth=0.05).values
    np.testing.assert_array_equal(vals, 0.0)


def test_pcf_single_pair_formula():
    p = new_pattern([(0.4, 0.5), (0.5, 0.5)], W)
    g = EvalGrid.linspace(0.05, 0.1, 6)
    b = 0.03
    dist = 0.1
    dx, dy = 0.1, 0.0
    wt = 1.0 / ((1 - dx) * (1 - dy))
    r = 0.1
    kern = 0.75 / b * (1 - ((r - dist) / b) ** 2)
    expected = 2 * wt * kern / (2 * math.pi * r * 2.0)
    got = estimate_pcf(p, g, bandwidth=b).values[-1]
    assert got > 0
    assert got == pytest.approx(expected, rel=1e-9)


def test_pcf_errors():
    p = new_pattern([(0.4, 0.5), (0.5, 0.5)], W)
    with pytest.raises(BandwidthNonpositive):
        estimate_pcf(p, GRID, bandwidth=0.0)
    assert not estimate_pcf(p, GRID).defined[0]


def test_F_examples():
    p = new_pattern([(0.5, 0.5)], W)
    g = EvalGrid.linspace(0.0, 0.45, 10)
    F = estimate_F(p, g)
    assert F.values[0] == 0
    # at r = 0.45 only locations within 0.05 of the centre remain, all within r of the point
    assert F.values[-1] == 1
    with pytest.raises(NoValidTestLocations):
        estimate_F(p, EvalGrid.linspace(0.0, 0.6, 5))
    with pytest.raises(EmptyPattern):
        estimate_F(new_pattern(np.zeros((0, 2)), W), g)


def test_F_csr_mean(csr_patterns):
    g = EvalGrid.linspace(0.0, 0.05, 6)
    vals = [estimate_F(p, g, test_grid_side=64).values[-1] for p in csr_patterns]
    assert _within_3se(vals, 1 - math.exp(-100 * math.pi * 0.05**2))


def test_G_csr_mean(csr_patterns):
    g = EvalGrid.linspace(0.0, 0.05, 6)
    vals = [estimate_G(p, g).values[-1] for p in csr_patterns]
    assert _within_3se(vals, 1 - math.exp(-100 * math.pi * 0.05**2))


def test_G_star_endpoints():
    p = new_pattern([(0.2, 0.2), (0.25, 0.2), (0.8, 0.8), (0.8, 0.75)], W)
    g = EvalGrid.linspace(0.0, 0.1, 11)
    G, Gs = estimate_G(p, g), estimate_G_star(p, g)
    assert G.values[0] == 0 and Gs.values[0] == 0
    assert G.values[-1] == 1 and Gs.values[-1] == pytest.approx(math.pi / 2)


def test_G_hard_core():
    g = EvalGrid.linspace(0.0, 0.1, 41)
    for i in range(5):
        p = simulate(SSI(50, 0.05), W, RngSeed(8, (i,)))
        G = estimate_G(p, g)
        assert np.all(G.values[g.r_values < 0.05] == 0)


def test_J_examples():
    p = new_pattern([(0.3, 0.3), (0.7, 0.7), (0.3, 0.7)], W)
    g = EvalGrid.linspace(0.0, 0.45, 46)
    J = estimate_J(p, g)
    assert J.values[0] == 1
    F = estimate_F(p, g)
    hit = np.flatnonzero(F.values >= 1)
    assert hit.size
    assert not J.defined[hit[0]:].any()
    # the defined part is a prefix
    first_bad = np.argmin(J.defined)
    assert not J.defined[first_bad:].any()


def _retained(boundary, r):
    return (boundary[None, :] >= r[:, None]).sum(axis=1)


def test_curve_properties(rng):
    g = EvalGrid.linspace(0.0, 0.2, 41)
    r = g.r_values
    for _ in range(10):
        p = random_pattern(rng, int(rng.integers(5, 80)))
        for corr in ("translation", "none"):
            assert np.all(np.diff(estimate_K(p, g, corr).values) >= 0)
        F, G = estimate_F(p, g, 48), estimate_G(p, g)
        # reduced-sample estimates can only drop where the retained sample shrinks
        for c, b in ((F, W.boundary_distance(lattice_locations(W, 48))), (G, W.boundary_distance(p.points))):
            n_ret = _retained(b, r)
            same = (n_ret[1:] == n_ret[:-1]) & c.defined[1:] & c.defined[:-1]
            assert np.all(np.diff(c.values)[same] >= 0)
            v = c.values[c.defined]
            assert np.all((v >= 0) & (v <= 1))
        Gs = estimate_G_star(p, g).values
        assert np.nanmin(Gs) >= 0 and np.nanmax(Gs) <= math.pi / 2
        assert np.all(estimate_L(p, g).values >= 0)
