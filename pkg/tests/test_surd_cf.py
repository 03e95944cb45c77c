import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renorm_skew.cf import (
    CFExpansion,
    cf_value,
    convergents,
    disc,
    disc_subsequence_check,
    modified_cf,
    principal_denominators,
    regular_cf,
)
from renorm_skew.errors import InvalidInput, RationalInput
from renorm_skew.surd import Surd, surd_floor_frac, surd_normalize

GOLDEN = Surd(-1, 1, 2, 5)
SILVER = Surd(-1, 1, 1, 2)


@pytest.mark.parametrize(
    "args, expected",
    [
        ((2, 2, 2, 5), (1, 1, 1, 5)),
        ((1, 1, 1, 8), (1, 2, 1, 2)),
        ((-1, 1, 2, 5), (-1, 1, 2, 5)),
        ((3, 1, -6, 5), (-3, -1, 6, 5)),
        ((4, 3, 2, 9), (13, 0, 2, 1)),
    ],
)
def test_normalize(args, expected):
    x = surd_normalize(*args)
    if expected[1] == 0:
        assert x.is_rational and Fraction(x.a, x.c) == Fraction(expected[0], expected[2])
    else:
        assert x.as_tuple() == expected


@pytest.mark.parametrize(
    "x, fl, frac",
    [
        (GOLDEN, 0, GOLDEN),
        (Surd(2, 1, 1, 5), 4, Surd(-2, 1, 1, 5)),
        (Surd(3, 1, 4, 5), 1, Surd(-1, 1, 4, 5)),
        (Surd(-3, -1, 1, 2), -5, Surd(2, -1, 1, 2)),
    ],
)
def test_floor_frac(x, fl, frac):
    assert surd_floor_frac(x) == (fl, frac)


def test_parse_and_text():
    x = Surd.parse("(-1+1*sqrt(5))/2")
    assert x == GOLDEN
    assert Surd.parse("(+3-2*sqrt(8))/1") == Surd(3, -4, 1, 2)
    with pytest.raises(InvalidInput):
        Surd.parse("sqrt 5")


@given(
    a=st.integers(-50, 50),
    b=st.integers(-20, 20).filter(bool),
    c=st.integers(-30, 30).filter(bool),
    D=st.sampled_from([2, 3, 5, 6, 7, 8, 12, 13, 18, 50]),
)
def test_normalize_canonical(a, b, c, D):
    x = surd_normalize(a, b, c, D)
    if not x.is_rational:
        assert x.c > 0 and math.gcd(math.gcd(x.a, x.b), x.c) == 1
        r = math.isqrt(x.D)
        assert all(x.D % (p * p) for p in range(2, r + 1))
    assert math.isclose(float(x), (a + b * math.sqrt(D)) / c, rel_tol=1e-12, abs_tol=1e-12)


@given(
    a=st.integers(-10**6, 10**6),
    b=st.integers(-10**4, 10**4).filter(bool),
    c=st.integers(1, 10**3),
    D=st.sampled_from([2, 3, 5, 7, 11]),
)
def test_floor_is_exact(a, b, c, D):
    x = Surd(a, b, c, D)
    n, f = surd_floor_frac(x)
    assert f.sign() >= 0 and (f - 1).sign() < 0
    assert x - n == f


@given(
    x=st.tuples(st.integers(-9, 9), st.integers(-9, 9).filter(bool), st.integers(1, 9)),
    y=st.tuples(st.integers(-9, 9), st.integers(-9, 9).filter(bool), st.integers(1, 9)),
)
def test_field_identities(x, y):
    X, Y = Surd(*x, D=3), Surd(*y, D=3)
    assert (X * Y) / Y == X
    assert X + Y - Y == X
    assert (X * X.conjugate()).is_rational
    assert (X < Y) == (float(X) < float(Y)) or abs(float(X) - float(Y)) < 1e-9


@pytest.mark.parametrize(
    "alpha, pre, per",
    [(GOLDEN, (), (1,)), (SILVER, (), (2,)), (Surd(-1, 1, 1, 3), (), (1, 2))],
)
def test_regular_cf(alpha, pre, per):
    cf = regular_cf(alpha)
    assert (cf.preperiod, cf.period) == (pre, per)


@pytest.mark.parametrize(
    "beta, pre, per",
    [(Surd(-2, 1, 1, 5), (5,), (2, 2, 2, 6)), (GOLDEN, (2,), (3,))],
)
def test_modified_cf(beta, pre, per):
    cf = modified_cf(beta)
    assert (cf.preperiod, cf.period) == (pre, per)
    assert all(n >= 2 for n in cf.period) and set(cf.period) != {2}


@pytest.mark.parametrize("fn", [regular_cf, modified_cf])
def test_rational_rejected(fn):
    with pytest.raises(RationalInput):
        fn(Surd(1, 0, 2, 2))


def test_cf_text_roundtrip():
    cf = modified_cf(Surd(-2, 1, 1, 5))
    assert str(cf) == "[5; 2,2,2,6]"
    assert CFExpansion.parse(str(cf), "modified") == cf


@pytest.mark.parametrize(
    "alpha, qs",
    [(GOLDEN, [1, 2, 3, 5, 8, 13, 21]), (SILVER, [2, 5, 12, 29, 70, 169, 408])],
)
def test_convergent_denominators(alpha, qs):
    table = convergents(regular_cf(alpha), len(qs), alpha)
    assert table.q == qs


def test_convergents_base_case():
    assert convergents(regular_cf(SILVER), 1).rows == ((1, 1, 2),)


@given(alpha=st.sampled_from([GOLDEN, SILVER, Surd(-1, 1, 1, 3), Surd(-2, 1, 1, 7)]))
@settings(max_examples=10)
def test_cf_value_converges(alpha):
    cf = regular_cf(alpha)
    approx = cf_value(cf, 12)
    err = alpha - approx
    assert abs(float(err)) < 1 / approx.denominator**2


def test_disc_values():
    assert disc(1, GOLDEN, 2).value == Surd(1, 0, 2, 5)
    r = disc(2, GOLDEN, 2)
    assert r.value == GOLDEN - Fraction(1, 2)
    assert r.argmin == (1, 1)
    with pytest.raises(InvalidInput):
        disc(0, GOLDEN, 2)


def test_disc_brute_force():
    # brute force over all (l, j) with 0 < |j| < q ... independent of the implementation
    q, Q = 5, 3
    best = None
    for j in range(-q + 1, q):
        for l in range(-Q * q, Q * q + 1):
            if j == 0 and l % Q == 0:
                continue
            v = Fraction(l, Q) - j * SILVER
            dist = abs(float(v - round(float(v))))
            best = dist if best is None else min(best, dist)
    assert math.isclose(float(disc(q, SILVER, Q).value), best, rel_tol=1e-12)


@pytest.mark.parametrize("alpha", [GOLDEN, SILVER])
def test_disc_subsequence_positive(alpha):
    rep = disc_subsequence_check(alpha, 2, 20)
    assert rep.all_positive and rep.theta_hat.sign() > 0


def test_disc_subsequence_empty():
    rep = disc_subsequence_check(GOLDEN, 2, 0)
    assert rep.m == () and rep.theta_hat is None


def test_principal_denominators():
    assert principal_denominators(GOLDEN, 100) == [1, 2, 3, 5, 8, 13, 21, 34, 55, 89]
