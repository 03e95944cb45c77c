"""Desk-scale verification of the limit theorems.

Step functions of ``x`` built from ``phi`` (``phi_q``, ``Psi_N``) are constant
on the cells cut out by the points ``{l/Q - j alpha}``. Every cell is
evaluated at an orbit point ``{m alpha}`` of 0, where Birkhoff sums reduce to
differences along the orbit of 0: ``phi_n({m alpha}) = phi_{m+n}(0) - phi_m(0)``.
Cell coverage by orbit points is verified, so suprema and integrals over
cells are exact rather than sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats as sps
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import smith_normal_form

from .blocks import Cocycle, Renormalization, orbit_array
from .cf import principal_denominators
from .errors import CapExceeded, DKViolation, InsufficientLevel, InvalidInput, TooLarge
from .surd import Surd
from .temporal import TemporalDist, char_grid, dist_moments, parseval_l2

STREAM_CAP = 2 * 10**7


# -- lattice hypothesis ----------------------------------------------------------


@dataclass(frozen=True)
class LatticeReport:
    generates_Zd: bool
    rank: int
    invariant_factors: tuple[int, ...]


def lattice_check(cocycle: Cocycle) -> LatticeReport:
    """Does ``{Phi(eps)}`` generate ``Z^d``? Certified by the Smith normal form."""
    G = Matrix(cocycle.Phi.T.tolist())
    rank = G.rank()
    snf = smith_normal_form(G, domain=ZZ)
    diag = tuple(abs(int(snf[i, i])) for i in range(min(snf.shape)))
    ok = rank == cocycle.d and all(f == 1 for f in diag[: cocycle.d])
    return LatticeReport(ok, rank, diag)


# -- cells and covering orbit points ---------------------------------------------


def _alpha_ld(alpha: Surd) -> np.longdouble:
    ld = np.longdouble
    return (ld(alpha.a) + ld(alpha.b) * np.sqrt(ld(alpha.D))) / ld(alpha.c)


@dataclass(frozen=True)
class CellCover:
    """Cells of the partition by ``{l/Q - j alpha}``, ``j < N``, with orbit representatives."""

    N: int
    breaks: np.ndarray  # sorted left endpoints (long double), breaks[0] == 0
    order_j: np.ndarray  # j of each break
    order_l: np.ndarray  # l of each break
    reps: np.ndarray  # orbit index m with {m alpha} in each cell
    orbit_len: int
    min_margin: float


def cell_cover(alpha: Surd, Q: int, N: int, cap: int = STREAM_CAP) -> CellCover:
    """Find, for each of the ``Q N`` cells, some ``m`` with ``{m alpha}`` inside it."""
    a = _alpha_ld(alpha)
    j = np.repeat(np.arange(N, dtype=np.int64), Q)
    l = np.tile(np.arange(Q, dtype=np.int64), N)
    pts = np.mod(l.astype(np.longdouble) / Q - j.astype(np.longdouble) * a, 1)
    order = np.argsort(pts, kind="stable")
    breaks = pts[order]
    if np.any(np.diff(breaks) <= 1e-15):
        raise InvalidInput("breakpoints not resolved in extended precision")
    ncell = len(breaks)
    M = max(16, 4 * ncell)
    while True:
        if M + N > cap:
            raise CapExceeded(f"covering orbit needs more than {cap} points")
        # m = 0 sits exactly on the break at 0; start at 1 to keep margins strict
        m = np.arange(1, M, dtype=np.int64)
        x = np.mod(m.astype(np.longdouble) * a, 1)
        cell = np.searchsorted(breaks, x, side="right") - 1
        first = np.full(ncell, -1, dtype=np.int64)
        # first occurrence of each cell: scatter in reverse so earlier m wins
        first[cell[::-1]] = m[::-1]
        if np.all(first >= 0):
            break
        M *= 2
    xr = np.mod(first.astype(np.longdouble) * a, 1)
    right = np.append(breaks[1:], np.longdouble(1))
    margin = float(min(np.min(xr - breaks), np.min(right - xr)))
    if margin <= 1e-12:
        raise InvalidInput("orbit representative too close to a cell boundary")
    return CellCover(N, breaks, j[order], l[order], first, int(first.max()) + 1, margin)


def _orbit_with_zero(ren: Renormalization, length: int) -> np.ndarray:
    """``phi_n(0)`` for ``n = 0..length`` (row 0 is the zero vector)."""
    body = orbit_array(ren, length)
    return np.concatenate([np.zeros((1, ren.d), dtype=np.int64), body])


def _keys(orbit: np.ndarray) -> np.ndarray:
    lo = orbit.min(axis=0)
    span = orbit.max(axis=0) - lo + 1
    key = np.zeros(len(orbit), dtype=np.int64)
    for a in range(orbit.shape[1]):
        key = key * int(span[a]) + (orbit[:, a] - lo[a])
    return key


def _window_counts(keys: np.ndarray, queries: np.ndarray, N: int) -> np.ndarray:
    """``#{n in [1, N]: key[m+n] == key[m]}`` for each query ``m``."""
    T = len(keys)
    comp = keys * T + np.arange(T, dtype=np.int64)
    srt = np.sort(comp)
    q = comp[queries]
    return np.searchsorted(srt, q + N, side="right") - np.searchsorted(srt, q, side="right")


# -- Denjoy-Koksma ------------------------------------------------------------------


@dataclass(frozen=True)
class DKRow:
    q: int
    sup: int
    bound: int
    cells: int

    @property
    def ok(self) -> bool:
        return self.sup <= self.bound


def dk_check(ren: Renormalization, q_list: Sequence[int] | None = None, bound: int = 10**5) -> list[DKRow]:
    """``sup_x ||phi_q(x)||_inf <= Var(phi)`` for principal denominators ``q``.

    Raises
    ------
    DKViolation
        If the inequality fails for some ``q``.
    """
    inst = ren.inst
    qs = principal_denominators(inst.alpha, bound) if q_list is None else list(q_list)
    rows = []
    covers = [(q, cell_cover(inst.alpha, inst.Q, q)) for q in qs]
    need = max((cv.orbit_len + q for q, cv in covers), default=0)
    orbit = _orbit_with_zero(ren, need)
    for q, cv in covers:
        m = cv.reps
        vals = orbit[m + q] - orbit[m]
        sup = int(np.abs(vals).max())
        rows.append(DKRow(q, sup, inst.cocycle.variation, len(m)))
    bad = [r for r in rows if not r.ok]
    if bad:
        raise DKViolation(f"Denjoy-Koksma fails at q={bad[0].q}")
    return rows


# -- visits -------------------------------------------------------------------------


def visit_count(ren: Renormalization, N: int, V: TemporalDist | None = None) -> int:
    """``Psi_N(0) = #{1 <= n <= N: phi_n(0) = 0}``.

    Uses ``V(0)`` when ``V`` is the level distribution with total mass ``N``,
    otherwise streams the orbit.
    """
    if N <= 0:
        return 0
    if V is not None:
        if V.total != N or V.i != 0 or V.eps != 0:
            raise InvalidInput("V must be V_k(0, 0) with total mass N")
        return V[(0,) * V.d]
    if N > STREAM_CAP:
        raise TooLarge("N exceeds the streaming cap")
    count = 0
    for chunk in ren.orbit_chunks(N):
        count += int(np.all(chunk == 0, axis=1).sum())
    return count


@dataclass(frozen=True)
class VisitIntegral:
    N: int
    estimate: float
    M: int
    exact: Surd | None = None

    @property
    def rel_err(self) -> float | None:
        if self.exact is None:
            return None
        ex = float(self.exact)
        return abs(self.estimate - ex) / ex if ex else abs(self.estimate)


def _exact_psi_integral(ren: Renormalization, N: int) -> Surd:
    """``int Psi_N = sum_cells |cell| Psi_N(cell)`` with exact surd endpoints."""
    inst = ren.inst
    alpha, Q = inst.alpha, inst.Q
    cv = cell_cover(alpha, Q, N)
    orbit = _orbit_with_zero(ren, cv.orbit_len + N)
    counts = _window_counts(_keys(orbit), cv.reps, N)
    # break value = l/Q - j alpha + f, f the integer that maps it into [0, 1)
    a, b, c, D = alpha.as_tuple()
    jj, ll = cv.order_j.tolist(), cv.order_l.tolist()
    fl = []
    for j, l in zip(jj, ll):
        fl.append(-math.floor(Fraction(l, Q) - j * alpha))
    rat = [Fraction(l, Q) - Fraction(j * a, c) + f for j, l, f in zip(jj, ll, fl)]
    irr = [Fraction(-j * b, c) for j in jj]
    rat.append(Fraction(1))
    irr.append(Fraction(0))
    r_sum, s_sum = Fraction(0), Fraction(0)
    for idx, w in enumerate(counts.tolist()):
        if w:
            r_sum += w * (rat[idx + 1] - rat[idx])
            s_sum += w * (irr[idx + 1] - irr[idx])
    num = Fraction(r_sum)
    den = math.lcm(num.denominator, s_sum.denominator)
    return Surd(int(num * den), int(s_sum * den), den, D)


def visit_integral(
    ren: Renormalization,
    N: int,
    M: int = 10**7,
    exact_cap: int = 10**3,
    cap: int = STREAM_CAP,
) -> VisitIntegral:
    """Estimate ``int_0^1 Psi_N`` by the orbit autocorrelation sum.

    ``(1/M) sum_{j=1}^{M} Psi_N({j alpha})`` where
    ``Psi_N({j alpha}) = #{n in [j+1, j+N]: phi_n(0) = phi_j(0)}``. For
    ``N <= exact_cap`` the exact value is attached.
    """
    if M + N > cap:
        raise CapExceeded("M + N exceeds the streaming cap")
    if N <= 0:
        return VisitIntegral(N, 0.0, M, Surd(0, 0, 1, ren.inst.alpha.D))
    orbit = _orbit_with_zero(ren, M + N)
    counts = _window_counts(_keys(orbit), np.arange(1, M + 1, dtype=np.int64), N)
    est = float(counts.sum()) / M
    exact = _exact_psi_integral(ren, N) if N <= exact_cap else None
    return VisitIntegral(N, est, M, exact)


def visit_integrals(
    ren: Renormalization, Ns: Sequence[int], M: int = 10**7, cap: int = STREAM_CAP
) -> dict[int, float]:
    """Autocorrelation estimates for several horizons sharing one orbit pass."""
    Ns = sorted(set(Ns))
    if not Ns:
        return {}
    if M + Ns[-1] > cap:
        raise CapExceeded("M + N exceeds the streaming cap")
    orbit = _orbit_with_zero(ren, M + Ns[-1])
    keys = _keys(orbit)
    del orbit
    T = len(keys)
    comp = keys * T + np.arange(T, dtype=np.int64)
    srt = np.sort(comp)
    q = comp[1 : M + 1]
    base = np.searchsorted(srt, q, side="right")
    return {
        N: float((np.searchsorted(srt, q + N, side="right") - base).sum()) / M for N in Ns
    }


def visit_sup(ren: Renormalization, N: int) -> int:
    """Exact ``sup_x Psi_N(x)`` over all cells of the partition at horizon ``N``."""
    inst = ren.inst
    cv = cell_cover(inst.alpha, inst.Q, N)
    orbit = _orbit_with_zero(ren, cv.orbit_len + N)
    return int(_window_counts(_keys(orbit), cv.reps, N).max())


# -- WRLLT integrals ----------------------------------------------------------------


@dataclass(frozen=True)
class WrlltValue:
    p: int
    value: float
    error: float
    grid: int = 0


def wrllt_integral(V: TemporalDist, p: int) -> WrlltValue:
    """``int_{T^d} |Xi(theta)|^p dtheta`` for ``p`` in {1, 2}.

    ``p = 2`` is exact by Parseval. ``p = 1`` uses a tensor-grid Riemann sum at
    resolution at least 8x the support diameter per axis; the error estimate is
    the change against the half-resolution grid.
    """
    if p == 2:
        return WrlltValue(2, parseval_l2(V), 0.0)
    if p != 1:
        raise InvalidInput("p must be 1 or 2")
    if V.d > 3:
        raise InvalidInput("quadrature needs d <= 3")
    diam = max(V.weights.shape)
    G = 1 << max(4, math.ceil(math.log2(8 * diam)))
    fine = float(np.abs(char_grid(V, G)).mean())
    coarse = float(np.abs(char_grid(V, G // 2)).mean())
    return WrlltValue(1, fine, abs(fine - coarse), G)


def wrllt_quadrature_l2(V: TemporalDist) -> float:
    """Riemann-sum estimate of ``int |Xi|^2`` (exact for grids above the diameter)."""
    G = 1 << max(4, math.ceil(math.log2(2 * max(V.weights.shape))))
    return float((np.abs(char_grid(V, G)) ** 2).mean())


# -- temporal CLT -------------------------------------------------------------------


@dataclass(frozen=True)
class CltReport:
    n: int
    center: np.ndarray
    cov: np.ndarray
    ks_coord: tuple[float, ...]
    ks_coord_midpoint: tuple[float, ...]
    ks_box: float
    box_thresholds: int
    standardized_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _ks_marginal(x: np.ndarray, w: np.ndarray, mean: float, sd: float) -> tuple[float, float]:
    p = np.array([float(Fraction(int(v), 1)) for v in w]) if w.dtype == object else w.astype(float)
    p = p / p.sum()
    F = np.cumsum(p)
    F_left = F - p
    G = sps.norm.cdf(x, loc=mean, scale=sd)
    plain = float(max(np.abs(F - G).max(), np.abs(F_left - G).max()))
    # lattice CDF is constant on [m, m+1); compare it at the half-integers
    G_mid = sps.norm.cdf(x + 0.5, loc=mean, scale=sd)
    mid = float(np.abs(F - G_mid).max())
    tail = float(sps.norm.cdf(x[0] - 0.5, loc=mean, scale=sd))
    return plain, max(mid, tail)


def temporal_clt_check(
    V: TemporalDist,
    mu0: np.ndarray,
    n: int,
    xi0: np.ndarray | None = None,
    thresholds: int = 64,
    min_periods: int = 5,
) -> CltReport:
    """Compare ``V`` standardized by ``(nu - n mu - xi)/sqrt(n)`` with a Gaussian.

    The Gaussian is centered with the exact covariance of ``V`` divided by
    ``n``. Standardization is affine, so the statistics are computed on the
    lattice scale directly. Per-coordinate KS is reported both as the plain
    sup over the line and at the half-integer midpoints; ``ks_box`` is the
    sup over lower-left orthants with corners on a half-integer grid.
    """
    if n < min_periods:
        raise InsufficientLevel(f"need at least {min_periods} periods, got {n}")
    d = V.d
    mu0 = np.asarray(mu0, dtype=float).reshape(d)
    xi0 = np.zeros(d) if xi0 is None else np.asarray(xi0, dtype=float).reshape(d)
    center = n * mu0 + xi0
    mom = dist_moments(V)
    cov = mom.cov_float()
    plain, mid = [], []
    for a in range(d):
        x, w = V.marginal(a)
        pl, md = _ks_marginal(x.astype(float), w, center[a], math.sqrt(cov[a, a]))
        plain.append(pl)
        mid.append(md)
    probs = V.probs()
    axes = V.axes()
    cuts = []
    for a in range(d):
        half = axes[a] + 0.5
        if len(half) > thresholds:
            half = half[np.linspace(0, len(half) - 1, thresholds).round().astype(int)]
        cuts.append(half)
    if d == 1:
        F = np.cumsum(probs)
        idx = np.searchsorted(axes[0] + 0.5, cuts[0])
        emp = F[idx]
        gauss = sps.norm.cdf(cuts[0], loc=center[0], scale=math.sqrt(cov[0, 0]))
        box = float(np.abs(emp - gauss).max())
    else:
        F = probs
        for a in range(d):
            F = np.cumsum(F, axis=a)
        idx = [np.searchsorted(axes[a] + 0.5, cuts[a]) for a in range(d)]
        emp = F[np.ix_(*idx)]
        mesh = np.stack(np.meshgrid(*cuts, indexing="ij"), axis=-1).reshape(-1, d)
        gauss = sps.multivariate_normal(mean=center, cov=cov).cdf(mesh).reshape(emp.shape)
        box = float(np.abs(emp - gauss).max())
    std_mean = (mom.mean_float() - center) / math.sqrt(n)
    return CltReport(n, center, cov, tuple(plain), tuple(mid), box, len(cuts[0]), std_mean)


# -- return-count ratios and the visit lemma -------------------------------------------


@dataclass(frozen=True)
class ReturnRow:
    k: int
    ell0: int
    psi0: int
    ratio0: float
    ratio1: float | None


def return_ratios(
    ks: Sequence[int], ell0: Sequence[int], psi0: Sequence[int], d: int,
    integrals: dict[int, float] | None = None,
) -> list[ReturnRow]:
    """``r0 = k^{d/2} Psi_{l_k}(0) / l_k`` and ``r1 = k^{d/2} int Psi_{l_k} / l_k``."""
    rows = []
    for k, L, c in zip(ks, ell0, psi0):
        scale = k ** (d / 2) / L
        r1 = integrals[L] * scale if integrals and L in integrals else None
        rows.append(ReturnRow(k, L, c, c * scale, r1))
    return rows


def band_ratio(values: Sequence[float]) -> float:
    v = [x for x in values if x is not None]
    return max(v) / min(v)


@dataclass(frozen=True)
class VisitLemmaRow:
    k: int
    lhs_a: float
    rhs_a: float
    lhs_b: int | None
    rhs_b: float
    integral_method: str

    @property
    def ok_a(self) -> bool:
        return self.lhs_a >= self.rhs_a

    @property
    def ok_b(self) -> bool:
        return self.lhs_b is None or self.lhs_b <= self.rhs_b


def visit_lemma_row(
    k: int,
    ell: tuple[int, int],
    family: Sequence[TemporalDist],
    integral: float,
    sup_psi: int | None,
    method: str,
) -> VisitLemmaRow:
    """Both sides of the visit-lemma inequalities at level ``k``.

    (a) ``int Psi_{l_k(0)} >= l_k(1)^2 / (3 l_k(0)) min_eps int |Xi_k(1, eps)|^2 - 1/2``
    (b) ``sup_x Psi_{l_k(1)}(x) <= 2 l_k(0) max_eps int |Xi_k(0, eps)|``
    """
    Q = len(family) // 2
    l0, l1 = ell
    min_l2 = min(parseval_l2(family[Q + e]) for e in range(Q))
    max_l1 = max(wrllt_integral(family[e], 1).value for e in range(Q))
    rhs_a = l1 * l1 / (3 * l0) * min_l2 - 0.5
    rhs_b = 2 * l0 * max_l1
    return VisitLemmaRow(k, integral, rhs_a, sup_psi, rhs_b, method)
