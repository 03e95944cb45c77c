import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import instances
from renorm_skew.blocks import Cocycle, Renormalization, orbit_array
from renorm_skew.errors import InsufficientLevel, InvalidInput
from renorm_skew.stats import (
    band_ratio,
    cell_cover,
    dk_check,
    lattice_check,
    return_ratios,
    temporal_clt_check,
    visit_count,
    visit_integral,
    visit_sup,
    wrllt_integral,
    wrllt_quadrature_l2,
)
from renorm_skew.surd import Surd
from renorm_skew.temporal import DistTower, dist_init


@pytest.mark.parametrize(
    "Phi, ok",
    [
        ([[1], [-1]], True),
        ([[2], [-2]], False),
        ([[1, 0], [0, 1], [-1, -1]], True),
        ([[2, 0], [0, 1], [-2, -1]], False),
        ([[1, 1], [-1, -1]], False),
    ],
)
def test_lattice_check(Phi, ok):
    assert lattice_check(Cocycle(np.array(Phi))).generates_Zd is ok


def _psi_oracle(inst, N):
    """Exact int Psi_N by surd arithmetic at cell midpoints (no orbit reuse)."""
    alpha, Q = inst.alpha, inst.Q
    pts = sorted({(Fraction(l, Q) - j * alpha) - math.floor(Fraction(l, Q) - j * alpha)
                  for j in range(N) for l in range(Q)} | {Surd(0, 0, 1, alpha.D)})
    pts.append(Surd(1, 0, 1, alpha.D))
    total = Surd(0, 0, 1, alpha.D)
    Phi = inst.cocycle.Phi
    for lo, hi in zip(pts[:-1], pts[1:]):
        x = (lo + hi) / 2
        s = np.zeros(inst.d, dtype=np.int64)
        hits = 0
        for n in range(N):
            y = x + n * alpha
            s = s + Phi[math.floor(Q * (y - math.floor(y)))]
            hits += not s.any()
        total = total + hits * (hi - lo)
    return total


@pytest.mark.parametrize("fixture", ["inst_a", "inst_b"])
@pytest.mark.parametrize("N", [1, 2, 5, 13])
def test_exact_integral_oracle(fixture, N, request):
    inst = request.getfixturevalue(fixture)
    got = visit_integral(Renormalization(inst), N, M=1000).exact
    assert got == _psi_oracle(inst, N)


def test_golden_integral_values(ren_a):
    assert visit_integral(ren_a, 1, M=100).exact == 0
    assert visit_integral(ren_a, 2, M=100).exact == Surd(3, -1, 1, 5)


@pytest.mark.parametrize("fixture", ["ren_a", "ren_b"])
@pytest.mark.parametrize("N", [10, 100, 1000])
def test_autocorrelation_vs_exact(fixture, N, request):
    ren = request.getfixturevalue(fixture)
    vi = visit_integral(ren, N, M=10**6)
    assert vi.rel_err <= 0.02


def test_visit_count(ren_a):
    tw = DistTower(ren_a)
    tw.advance_to(1)
    assert visit_count(ren_a, 5, tw.get(0, 0)) == 2
    assert visit_count(ren_a, 5) == 2
    assert visit_count(ren_a, 0) == 0
    with pytest.raises(InvalidInput):
        visit_count(ren_a, 4, tw.get(0, 0))


@pytest.mark.parametrize("fixture", ["ren_a", "ren_b"])
def test_visit_count_two_methods(fixture, request):
    ren = request.getfixturevalue(fixture)
    tw = DistTower(ren)
    for k in range(1, ren.last_level_below(10**6) + 1):
        tw.advance_to(k)
        L = ren.ell(k)[0]
        assert visit_count(ren, L, tw.get(0, 0)) == visit_count(ren, L)


@given(inst=instances(max_Q=3), N=st.integers(1, 400))
@settings(max_examples=20, deadline=None)
def test_visit_count_monotone(inst, N):
    ren = Renormalization(inst)
    assert visit_count(ren, N) <= visit_count(ren, N + 7)


def test_dk_small_cases(ren_a):
    rows = dk_check(ren_a, [1, 2])
    assert rows[0].sup == 1 and rows[0].bound == 4
    assert rows[1].sup <= 4 and rows[1].cells == 4


@given(inst=instances(max_Q=3), N=st.integers(1, 60))
@settings(max_examples=20, deadline=None)
def test_cell_cover_is_exact(inst, N):
    # every representative lies in the cell it was assigned to, checked exactly
    cv = cell_cover(inst.alpha, inst.Q, N)
    for c in range(0, len(cv.reps), max(1, len(cv.reps) // 10)):
        x = cv.reps[c] * inst.alpha
        x = x - math.floor(x)
        j, l = int(cv.order_j[c]), int(cv.order_l[c])
        left = Fraction(l, inst.Q) - j * inst.alpha
        left = left - math.floor(left)
        assert left <= x
        if c + 1 < len(cv.reps):
            j2, l2 = int(cv.order_j[c + 1]), int(cv.order_l[c + 1])
            right = Fraction(l2, inst.Q) - j2 * inst.alpha
            assert x < right - math.floor(right)


def test_visit_sup_brute(inst_b, ren_b):
    # sup over a dense set of orbit points is a lower bound and is attained
    N = 50
    sup = visit_sup(ren_b, N)
    orb = np.concatenate([np.zeros((1, 2), dtype=np.int64), orbit_array(ren_b, 20000 + N)])
    best = max(int((orb[m + 1 : m + N + 1] == orb[m]).all(axis=1).sum()) for m in range(1, 20000))
    assert best == sup


def test_wrllt_point_mass(ren_b):
    V = dist_init(ren_b)[0]
    assert wrllt_integral(V, 2).value == 1.0
    assert abs(wrllt_integral(V, 1).value - 1.0) < 1e-12
    with pytest.raises(InvalidInput):
        wrllt_integral(V, 3)


@pytest.mark.parametrize("fixture", ["ren_a", "ren_b"])
def test_parseval_vs_quadrature(fixture, request):
    ren = request.getfixturevalue(fixture)
    tw = DistTower(ren)
    for k in (3, 10, 20):
        tw.advance_to(k)
        V = tw.get(0, 0)
        assert abs(wrllt_integral(V, 2).value - wrllt_quadrature_l2(V)) < 1e-12
        w1 = wrllt_integral(V, 1)
        assert w1.error < 1e-3


def test_clt_full_box_and_small_n(an_a):
    V = an_a.grid_dist(10)
    rep = temporal_clt_check(V, an_a.mu0, 10, an_a.xi0)
    assert rep.box_thresholds == min(64, V.weights.shape[0])
    assert 0 <= rep.ks_box < 0.05
    with pytest.raises(InsufficientLevel):
        temporal_clt_check(V, an_a.mu0, 4, an_a.xi0)


def test_clt_standardized_mean(analysis):
    for n in (10, 20, 40):
        rep = temporal_clt_check(analysis.grid_dist(n), analysis.mu0, n, analysis.xi0)
        assert np.abs(rep.standardized_mean).max() < 1e-12


def test_return_ratios_and_band():
    rows = return_ratios([4, 9], [100, 400], [10, 20], 2, {100: 12.0})
    assert rows[0].ratio0 == 4 * 10 / 100 and rows[0].ratio1 == 4 * 12 / 100
    assert rows[1].ratio1 is None
    assert band_ratio([1.0, None, 4.0]) == 4.0
