"""Regular and modified continued fractions of quadratic surds.

Both expansions are produced by exact iteration of the underlying interval
map, and the period is found when a :class:`~renorm_skew.surd.Surd` state
recurs. Positions are 1-based: ``digit(1)`` is the first digit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

import numpy as np

from .errors import InvalidInput, NoPeriodFound, RationalInput
from .surd import Surd

DEFAULT_CF_CAP = 10_000


@dataclass(frozen=True)
class CFExpansion:
    """Eventually periodic digit sequence ``preperiod`` then ``period`` repeated."""

    kind: Literal["regular", "modified"]
    preperiod: tuple[int, ...]
    period: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.period:
            raise InvalidInput("period must be nonempty")
        lo = 1 if self.kind == "regular" else 2
        if min(self.preperiod + self.period) < lo:
            raise InvalidInput(f"{self.kind} digits must be >= {lo}")
        if self.kind == "modified" and all(m == 2 for m in self.period):
            raise InvalidInput("modified period cannot be all 2s")

    @property
    def K(self) -> int:
        return len(self.preperiod)

    @property
    def L(self) -> int:
        return len(self.period)

    def digit(self, k: int) -> int:
        """The ``k``-th digit, ``k >= 1``."""
        if k < 1:
            raise InvalidInput("digits are indexed from 1")
        if k <= self.K:
            return self.preperiod[k - 1]
        return self.period[(k - 1 - self.K) % self.L]

    def digits(self, n: int) -> list[int]:
        return [self.digit(k) for k in range(1, n + 1)]

    def __str__(self) -> str:
        pre = ",".join(map(str, self.preperiod))
        per = ",".join(map(str, self.period))
        return f"[{pre}; {per}]"

    @classmethod
    def parse(cls, text: str, kind: Literal["regular", "modified"]) -> "CFExpansion":
        body = text.strip()
        if not (body.startswith("[") and body.endswith("]")) or ";" not in body:
            raise InvalidInput(f"cannot parse continued fraction {text!r}")
        pre, per = body[1:-1].split(";", 1)
        as_ints = lambda s: tuple(int(t) for t in s.split(",") if t.strip())  # noqa: E731
        return cls(kind, as_ints(pre), as_ints(per))


def _check_unit_irrational(x: Surd) -> None:
    if x.is_rational:
        raise RationalInput(f"{x} is rational")
    if not (0 < x < 1):
        raise InvalidInput(f"{x} is not in (0, 1)")


def _expand(x: Surd, step, kind, cap: int) -> CFExpansion:
    seen: dict[tuple[int, int, int, int], int] = {}
    digits: list[int] = []
    for it in range(cap + 1):
        key = x.as_tuple()
        if key in seen:
            j = seen[key]
            return CFExpansion(kind, tuple(digits[:j]), tuple(digits[j:]))
        seen[key] = it
        if x.is_rational or x.sign() == 0:
            raise RationalInput("expansion reached a rational state")
        n, x = step(x)
        digits.append(n)
    raise NoPeriodFound(f"no period within {cap} iterations")


def _gauss_step(x: Surd) -> tuple[int, Surd]:
    y = x.inverse()
    n = math.floor(y)
    return n, y - n


def _modified_step(x: Surd) -> tuple[int, Surd]:
    y = x.inverse()
    n = math.ceil(y)
    return n, n - y


def regular_cf(alpha: Surd, cap: int = DEFAULT_CF_CAP) -> CFExpansion:
    """Regular continued fraction of ``alpha`` in (0, 1) via the Gauss map."""
    _check_unit_irrational(alpha)
    return _expand(alpha, _gauss_step, "regular", cap)


def modified_cf(beta: Surd, cap: int = DEFAULT_CF_CAP) -> CFExpansion:
    """Modified expansion: ``n = ceil(1/beta)``, next state ``n - 1/beta``."""
    _check_unit_irrational(beta)
    return _expand(beta, _modified_step, "modified", cap)


@dataclass(frozen=True)
class ConvergentTable:
    """Rows ``(m, p_m, q_m)`` for ``m = 1..m_max``; ``q_0 = 1, p_0 = 0``."""

    rows: tuple[tuple[int, int, int], ...]

    @property
    def q(self) -> list[int]:
        return [r[2] for r in self.rows]

    @property
    def p(self) -> list[int]:
        return [r[1] for r in self.rows]


def _pq(cf: CFExpansion, m_max: int) -> tuple[list[int], list[int]]:
    p, q = [0, 1], [1, cf.digit(1)]
    for m in range(1, m_max):
        a = cf.digit(m + 1)
        p.append(a * p[m] + p[m - 1])
        q.append(a * q[m] + q[m - 1])
    return p, q


def convergents(
    cf: CFExpansion, m_max: int, alpha: Surd | None = None
) -> ConvergentTable:
    """Principal convergents of a regular expansion of a number in (0, 1).

    When ``alpha`` is given, each row is certified against
    ``1/(q_m (q_m + q_{m+1})) < |alpha - p_m/q_m| < 1/(q_m q_{m+1})``
    by exact surd comparison.
    """
    if cf.kind != "regular":
        raise InvalidInput("convergents need a regular expansion")
    if m_max < 1:
        raise InvalidInput("m_max must be >= 1")
    p, q = _pq(cf, m_max + 1)
    if alpha is not None:
        for m in range(1, m_max + 1):
            err = alpha - Fraction(p[m], q[m])
            if err.sign() < 0:
                err = -err
            lower = Fraction(1, q[m] * (q[m] + q[m + 1]))
            upper = Fraction(1, q[m] * q[m + 1])
            if not (lower < err < upper):
                raise AssertionError(f"convergent bound fails at m={m}")
    return ConvergentTable(tuple((m, p[m], q[m]) for m in range(1, m_max + 1)))


def _dist_to_int(x: Surd) -> Surd:
    f = x - math.floor(x)
    return min(f, 1 - f)


@dataclass(frozen=True)
class DiscResult:
    value: Surd
    argmin: tuple[int, int]


def disc(q: int, alpha: Surd, Q: int) -> DiscResult:
    """Minimal distance ``||l/Q - j alpha||`` over ``|l| < Q, |j| < q``, not both 0.

    Since ``l`` ranges over a full residue system, the minimum for fixed
    ``j`` is the distance from ``j alpha`` to ``Z/Q``. A binary64 prefilter
    picks near-minimal ``j`` and the winner is decided exactly.
    """
    if q < 1:
        raise InvalidInput("q must be >= 1")
    best = DiscResult(Surd(1, 0, Q, alpha.D), (1, 0))
    if q == 1:
        return best
    j = np.arange(1, q, dtype=np.float64)
    y = (Q * float(alpha)) * j
    approx = np.abs(y - np.rint(y)) / Q
    cutoff = min(approx.min() * (1 + 1e-6) + 1e-12, 1.0 / Q)
    for jj in (np.nonzero(approx <= cutoff)[0] + 1).tolist():
        x = Q * jj * alpha
        d = _dist_to_int(x) / Q
        if d < best.value:
            near = math.floor(x + Fraction(1, 2))
            best = DiscResult(d, (near % Q, jj))
    return best


@dataclass(frozen=True)
class DiscReport:
    m: tuple[int, ...]
    q: tuple[int, ...]
    products: tuple[Surd, ...]
    flagged: tuple[int, ...]
    theta_hat: Surd | None

    @property
    def all_positive(self) -> bool:
        return all(p.sign() > 0 for p in self.products)


def disc_subsequence_check(alpha: Surd, Q: int, m_max: int) -> DiscReport:
    """Report ``q_m * disc(q_m)`` for ``m = 1..m_max``.

    The flagged subsequence keeps the ``m`` whose product is at least half the
    maximum; ``theta_hat`` is the infimum over it.
    """
    if m_max < 1:
        return DiscReport((), (), (), (), None)
    table = convergents(regular_cf(alpha), m_max)
    ms, qs, prods = [], [], []
    for m, _, q in table.rows:
        ms.append(m)
        qs.append(q)
        prods.append(q * disc(q, alpha, Q).value)
    top = max(prods)
    flagged = tuple(m for m, v in zip(ms, prods) if 2 * v >= top)
    theta = min(v for m, v in zip(ms, prods) if m in flagged)
    return DiscReport(tuple(ms), tuple(qs), tuple(prods), flagged, theta)


def cf_value(cf: CFExpansion, n_periods: int) -> Fraction:
    """Evaluate the expansion truncated after ``n_periods`` full periods."""
    digits = list(cf.preperiod) + list(cf.period) * n_periods
    x = Fraction(0)
    if cf.kind == "regular":
        for a in reversed(digits):
            x = 1 / (a + x)
        return x
    # modified: beta = 1/(n_1 - s), s = 1/(n_2 - ...)
    for n in reversed(digits):
        x = 1 / (n - x)
    return x


def principal_denominators(alpha: Surd, bound: int) -> list[int]:
    """Distinct principal denominators ``q_m <= bound``, ``m >= 1``."""
    cf = regular_cf(alpha)
    q_prev, q = 1, cf.digit(1)
    out: list[int] = []
    m = 1
    while q <= bound:
        if not out or q != out[-1]:
            out.append(q)
        m += 1
        q_prev, q = q, cf.digit(m) * q + q_prev
    return out
