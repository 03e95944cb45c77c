from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import instances
from renorm_skew.blocks import Renormalization, orbit_array
from renorm_skew.errors import InvalidInput, NoDrift
from renorm_skew.temporal import (
    DistTower,
    char_grid,
    dist_char,
    dist_init,
    dist_moments,
    drift_extract,
    exact_means,
    parseval_l2,
)


def test_dist_init_golden(ren_a):
    fam = dist_init(ren_a)
    assert fam[0].support() == {(1,): 1}
    assert fam[1 * 2 + 1].support() == {(-1,): 1}
    assert all(V.total == 1 for V in fam)


def test_golden_level_one(ren_a):
    tw = DistTower(ren_a)
    tw.advance_to(1)
    V = tw.get(0, 0)
    assert V.support() == {(0,): 2, (1,): 3}
    assert dist_char(V, [0.0]) == 1
    assert abs(dist_char(V, [0.5]) - (-0.2)) < 1e-15
    m = dist_moments(V)
    assert m.mean == (Fraction(3, 5),)
    assert m.covariance == ((Fraction(6, 25),),)


def test_point_mass_moments(ren_b):
    V = dist_init(ren_b)[0]
    assert dist_moments(V).covariance == ((0, 0), (0, 0))
    assert parseval_l2(V) == 1.0


def test_tower_moves_forward(ren_a):
    tw = DistTower(ren_a)
    tw.advance_to(3)
    with pytest.raises(InvalidInput):
        tw.advance_to(2)


@pytest.mark.parametrize("fixture", ["ren_a", "ren_b"])
def test_matches_stream_histogram(fixture, request):
    ren = request.getfixturevalue(fixture)
    tw = DistTower(ren)
    for k in range(1, ren.last_level_below(2 * 10**5) + 1):
        tw.advance_to(k)
        V = tw.get(0, 0)
        vals, cnt = np.unique(orbit_array(ren, ren.ell(k)[0]), axis=0, return_counts=True)
        assert V.support() == {tuple(v): c for v, c in zip(vals.tolist(), cnt.tolist())}


@pytest.mark.parametrize("fixture", ["ren_a", "ren_b"])
def test_exact_means_agree(fixture, request):
    ren = request.getfixturevalue(fixture)
    tw = DistTower(ren)
    levels = [3, 8, 15]
    means = exact_means(ren, levels)
    for k, m in zip(levels, means):
        fam = tw.advance_to(k)
        for i in (0, 1):
            for e in range(ren.Q):
                assert tuple(m[i, e]) == dist_moments(fam[i * ren.Q + e]).mean


def test_big_levels_switch_to_python_ints(ren_a):
    tw = DistTower(ren_a)
    k = ren_a.first_level_with(2**63)
    V = tw.advance_to(k)[0]
    assert V.weights.dtype == object
    assert V.weights.sum() == V.total == ren_a.ell(k)[0]


def test_drift_synthetic():
    mu, xi = Fraction(2, 3), Fraction(-1, 7)
    res = drift_extract([[n * mu + xi] for n in range(8)])
    assert res.mu[0] == mu and res.xi[0] == xi and res.rho == 0.0
    res = drift_extract([[Fraction(5)]] * 6)
    assert res.mu[0] == 0 and res.xi[0] == 5


def test_drift_rejects_growth():
    with pytest.raises(NoDrift):
        drift_extract([[Fraction(n * n)] for n in range(10)])
    with pytest.raises(InvalidInput):
        drift_extract([[Fraction(1)]] * 3)


def test_golden_drift_geometric(an_a):
    d2 = an_a.drift.tail
    assert an_a.drift.rho < 0.1
    assert d2[-1] < 1e-30 or d2[-1] < d2[5] * 1e-10


@given(inst=instances(max_Q=3), k=st.integers(1, 9))
@settings(max_examples=20, deadline=None)
def test_mass_conservation(inst, k):
    ren = Renormalization(inst)
    fam = DistTower(ren).advance_to(k)
    for i in (0, 1):
        for e in range(inst.Q):
            V = fam[i * inst.Q + e]
            assert V.total == ren.ell(k)[i] == int(V.weights.sum())
            assert V.weights.min() >= 0


@given(inst=instances(max_Q=3), k=st.integers(1, 8), theta=st.lists(st.floats(0, 1, exclude_max=True), min_size=2, max_size=2))
@settings(max_examples=20, deadline=None)
def test_char_bounds_and_fft(inst, k, theta):
    V = DistTower(Renormalization(inst)).advance_to(k)[0]
    th = theta[: inst.d]
    assert abs(dist_char(V, th)) <= 1 + 1e-12
    G = max(V.weights.shape)
    grid = char_grid(V, G)
    idx = tuple(1 % G for _ in range(inst.d))
    assert abs(grid[idx] - dist_char(V, [1 / G] * inst.d)) < 1e-9
    assert abs((np.abs(grid) ** 2).mean() - parseval_l2(V)) < 1e-9
