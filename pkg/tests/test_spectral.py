import math

import numpy as np
import pytest

from renorm_skew.errors import GapTooSmall
from renorm_skew.spectral import (
    apply_matrix,
    centered_cf,
    displacement_matrix,
    length_matrix,
    perron,
    stationary,
)
from renorm_skew.temporal import dist_moments


def test_displacement_matrix_small_cases():
    assert displacement_matrix(5, 0, 1).tolist() == length_matrix(5).tolist() == [[4, 1], [3, 1]]
    I = np.eye(2, dtype=int)
    Z = np.zeros((2, 2), dtype=int)
    assert displacement_matrix(2, 0, 2).tolist() == np.block([[I, I], [Z, I]]).tolist()


@pytest.mark.parametrize("fixture", ["ren_a", "ren_b"])
def test_displacement_matrix_reproduces_levels(fixture, request):
    ren = request.getfixturevalue(fixture)
    for k in range(1, 7):
        st = ren.level(k - 1)
        M = displacement_matrix(ren.n(k), st.eps[0], ren.Q)
        assert np.array_equal(apply_matrix(M, st.sigma), ren.level(k).sigma.astype(object))


def test_golden_period_matrix(an_a):
    per = an_a.period
    assert (per.K, per.L, tuple(per.ns)) == (1, 4, (2, 2, 2, 6))
    B = np.array(per.B, dtype=np.int64)
    assert B.tolist() == [[3, 2, 8, 8], [2, 3, 8, 8], [2, 2, 7, 6], [2, 2, 6, 7]]
    assert (B >= 0).all()


@pytest.mark.parametrize(
    "label, J, charpoly, perp",
    [
        ("A", 18, (1, -20, 38, -20, 1), (1, -2, 1)),
        ("B", 1154, (1, -1158, 4623, -6932, 4623, -1158, 1), (1, -4, 6, -4, 1)),
    ],
)
def test_eigen_report(label, J, charpoly, perp, an_a, an_b):
    e = (an_a if label == "A" else an_b).eigen
    assert e.J == J and e.charpoly == charpoly and e.perp_charpoly == perp
    assert e.cyclotomic_ok and e.orders == (1,)
    assert e.max_modulus_dev <= 1e-12
    assert e.charpoly[-1] == 1  # unimodular


def test_period_extension(analysis):
    x = analysis.extended
    assert x.second_diff_max == 0 and x.n_checked >= 10
    assert x.M == 1 and x.positivity_power >= 1
    Bm = np.linalg.matrix_power(np.array(analysis.period.B, dtype=float), x.positivity_power)
    assert (Bm > 0).all()


def test_perron_at_zero(analysis):
    Pi = centered_cf(analysis.limit.H, analysis.limit.b)
    d = analysis.inst.d
    tr = perron(Pi(np.zeros(d)))
    assert abs(tr.lam - 1) < 1e-12
    assert np.abs(tr.v / tr.v[0] - 1).max() < 1e-12
    P = np.real(Pi(np.zeros(d)))
    assert np.abs(stationary(P) @ P - stationary(P)).max() < 1e-12
    assert abs(np.abs(P).sum(axis=1).max() - 1) < 1e-12


def test_perron_off_zero(analysis):
    Pi = centered_cf(analysis.limit.H, analysis.limit.b)
    d = analysis.inst.d
    small = np.full(d, 0.05)
    assert abs(perron(Pi(small)).lam) < 1
    # the centered displacements are real; on integer theta only the
    # integer-valued part matters, so |lambda| returns to 1
    unit = np.zeros(d)
    unit[0] = 1.0
    lam = perron(Pi(unit)).lam
    assert abs(abs(lam) - 1) < 1e-9


def test_perron_gap():
    with pytest.raises(GapTooSmall):
        perron(np.eye(3))


def test_diffusion(analysis):
    D = analysis.diffusion
    assert D.gradient_norm <= 1e-12
    assert D.rel_err <= 1e-3
    assert np.allclose(D.D_taylor, D.D_taylor.T)
    assert np.allclose(D.D_hessian, 2 * D.D_taylor)
    assert D.min_eig > 0 and np.linalg.eigvalsh(D.D_taylor).min() > 0
    assert np.allclose(D.D_taylor, 2 * math.pi**2 * D.cov_per_period)


def test_golden_variance_closed_form(an_a):
    # per-period variance of the golden instance equals 1/sqrt(5)
    assert abs(an_a.diffusion.cov_per_period[0, 0] - 1 / math.sqrt(5)) < 1e-9


def test_variance_matches_distributions(analysis):
    # Cov(V_n)/n at the deepest grid level approaches the per-period covariance
    cov = analysis.diffusion.cov_per_period
    n1, n2 = 30, 40
    c1 = dist_moments(analysis.grid_dist(n1)).cov_float()
    c2 = dist_moments(analysis.grid_dist(n2)).cov_float()
    slope = (c2 - c1) / (n2 - n1)
    assert np.abs(slope - cov).max() < 1e-9


def test_adaptedness(analysis):
    ad = analysis.adaptedness
    assert abs(ad.norm_at_zero - 1) < 1e-12
    assert ad.eps_hat > 0
    lam_min = np.linalg.eigvalsh(analysis.diffusion.D_taylor).min()
    assert 0 < ad.c_hat <= lam_min * 1.05
