"""Displacement matrices, period products and the Perron eigenvalue curve.

Displacements evolve linearly: ``sigma_{k+1} = M^(k+1) sigma_k`` where
``M^(k+1)`` is a 2x2 block matrix of polynomials in the cyclic shift
``(rho_e z)(delta) = z(delta + e)`` on ``C^Q``. Over a period of the digit and
parity sequences the product ``B`` has a hyperbolic 2x2 part on the constant
vectors and roots of unity elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import mpmath
import numpy as np
import sympy as sp

from .blocks import Renormalization
from .errors import ExtensionFailed, GapTooSmall, NotAdapted, SpectralAnomaly
from .rat import RatSpec


def shift_matrix(e: int, Q: int) -> np.ndarray:
    """Matrix of ``rho_e``: ``(R z)[delta] = z[delta + e]``."""
    R = np.zeros((Q, Q), dtype=object)
    for delta in range(Q):
        R[delta, (delta + e) % Q] = 1
    return R


def _poly_p(R: np.ndarray, nu: int) -> np.ndarray:
    # p_nu(x) = sum_{j=1}^{nu-1} x^(j-1); empty for nu <= 1
    Q = R.shape[0]
    out = np.zeros((Q, Q), dtype=object)
    power = np.eye(Q, dtype=object)
    for _ in range(nu - 1):
        out = out + power
        power = power.dot(R)
    return out


def _poly_q(R: np.ndarray, nu: int) -> np.ndarray:
    Q = R.shape[0]
    return reduce(lambda a, _: a.dot(R), range(nu - 1), np.eye(Q, dtype=object))


def displacement_matrix(n_next: int, e: int, Q: int) -> np.ndarray:
    """``M = [[p_n, q_n], [p_{n-1}, q_{n-1}]](rho_e)`` as a ``2Q x 2Q`` integer matrix."""
    R = shift_matrix(e, Q)
    return np.block(
        [
            [_poly_p(R, n_next), _poly_q(R, n_next)],
            [_poly_p(R, n_next - 1), _poly_q(R, n_next - 1)],
        ]
    )


def apply_matrix(M: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Apply a ``2Q x 2Q`` matrix to stacked displacements of shape ``(2, Q, d)``."""
    two, Q, d = sigma.shape
    flat = sigma.reshape(2 * Q, d).astype(object)
    return M.dot(flat).reshape(two, Q, d)


def length_matrix(n: int) -> np.ndarray:
    return np.array([[n - 1, 1], [n - 2, 1]], dtype=object)


@dataclass(frozen=True)
class PeriodData:
    """Period of the joint (digit, parity) sequence starting at level ``K``.

    ``factors[r-1]`` is ``M^(K+r)`` built from ``n_{K+r}`` and ``eps_{K+r-1}(0)``.
    """

    K: int
    L: int
    Q: int
    ns: tuple[int, ...]
    eps0: tuple[int, ...]
    factors: tuple[np.ndarray, ...]

    @property
    def B(self) -> np.ndarray:
        return reduce(lambda acc, E: E.dot(acc), self.factors, np.eye(2 * self.Q, dtype=object))

    @property
    def C(self) -> np.ndarray:
        """Length-matrix product ``A(m_L) ... A(m_1)``."""
        return reduce(lambda acc, n: length_matrix(n).dot(acc), self.ns, np.eye(2, dtype=object))

    def extended(self, M: int) -> "PeriodData":
        return PeriodData(
            self.K, self.L * M, self.Q, self.ns * M, self.eps0 * M, self.factors * M
        )


def period_matrix(ren: Renormalization) -> PeriodData:
    """Find the first level ``K`` from which (digit phase, parity state) is periodic."""
    mcf = ren.inst.mcf
    K0, Lcf = mcf.K, mcf.L
    seen: dict[tuple[int, int, int], int] = {}
    k = K0
    while True:
        key = (*ren.level(k).eps, (k - K0) % Lcf)
        if key in seen:
            K = seen[key]
            break
        seen[key] = k
        k += 1
    L = k - K
    ns = tuple(ren.n(K + r) for r in range(1, L + 1))
    eps0 = tuple(ren.level(K + r - 1).eps[0] for r in range(1, L + 1))
    factors = tuple(displacement_matrix(n, e, ren.Q) for n, e in zip(ns, eps0))
    return PeriodData(K, L, ren.Q, ns, eps0, factors)


@dataclass(frozen=True)
class EigenReport:
    J: int
    lambda_B: float
    blocks: tuple[np.ndarray, ...]
    moduli: tuple[tuple[float, ...], ...]
    orders: tuple[int, ...]
    charpoly: tuple[int, ...]
    perp_charpoly: tuple[int, ...]
    cyclotomic_ok: bool
    max_modulus_dev: float
    block_consistency: float


def _fourier_block(ns, eps0, Q: int, r: int, dps: int = 50):
    """Per-``r`` 2x2 block, i.e. the period product at ``rho_e -> gamma^(r e)``.

    Evaluated in ``dps``-digit arithmetic: eigenvalue 1 is typically defective,
    and binary64 eigensolves only resolve it to about ``sqrt(eps)``.
    """
    with mpmath.workdps(dps):
        out = mpmath.eye(2)
        for n, e in zip(ns, eps0):
            x = mpmath.expjpi(mpmath.mpf(2 * r * e) / Q)
            p = lambda nu: mpmath.fsum(x ** (j - 1) for j in range(1, nu))  # noqa: E731
            q = lambda nu: x ** (nu - 1)  # noqa: E731
            out = mpmath.matrix([[p(n), q(n)], [p(n - 1), q(n - 1)]]) * out
        tr = out[0, 0] + out[1, 1]
        det = out[0, 0] * out[1, 1] - out[0, 1] * out[1, 0]
        root = mpmath.sqrt(tr * tr - 4 * det)
        eigs = ((tr + root) / 2, (tr - root) / 2)
        mods = tuple(float(abs(z)) for z in eigs)
        dev = max(abs(abs(z) - 1) for z in eigs)
        blk = np.array(out.tolist(), dtype=complex)
        return blk, mods, float(dev), float(abs(abs(det) - 1))


def _totient(m: int) -> int:
    return int(sp.totient(m))


def cyclotomic_orders(poly: sp.Poly, Q: int) -> tuple[list[int], sp.Poly]:
    """Divide out cyclotomic factors ``Phi_m`` with ``totient(m) <= 2(Q-1)``.

    Returns the orders used (with multiplicity) and the remaining quotient.
    """
    z = poly.gens[0]
    bound = 2 * (Q - 1)
    orders = []
    m_max = 2 * bound * bound + 6
    for m in range(1, m_max + 1):
        if _totient(m) > bound:
            continue
        cyc = sp.Poly(sp.cyclotomic_poly(m, z), z)
        while poly.degree() >= cyc.degree():
            q, rem = sp.div(poly, cyc)
            if not rem.is_zero:
                break
            poly = q
            orders.append(m)
    return orders, poly


def block_eigen(period: PeriodData, tol: float = 1e-9) -> EigenReport:
    """Eigenvalue checks for the period product ``B``.

    Raises
    ------
    SpectralAnomaly
        If a non-constant Fourier block has an eigenvalue off the unit circle.
    """
    Q = period.Q
    B = period.B
    C = period.C
    J = int(C[0, 0] + C[1, 1])
    detC = int(C[0, 0] * C[1, 1] - C[0, 1] * C[1, 0])
    if detC != 1 or J < 3:
        raise SpectralAnomaly(f"length product is not hyperbolic (J={J}, det={detC})")
    z = sp.Symbol("z")
    cp = sp.Matrix(B.tolist()).charpoly(z)
    cp = sp.Poly(cp.as_expr(), z)
    hyper = sp.Poly(z**2 - J * z + 1, z)
    perp, rem = sp.div(cp, hyper)
    if not rem.is_zero:
        raise SpectralAnomaly("charpoly of B is not divisible by the V_0 factor")
    orders, rest = cyclotomic_orders(perp, Q)
    blocks, moduli = [], []
    worst, consist = 0.0, 0.0
    Bf = B.astype(float)
    for r in range(Q):
        blk, mods, dev, det_dev = _fourier_block(period.ns, period.eps0, Q, r)
        blocks.append(blk)
        moduli.append(mods)
        if det_dev > tol:
            raise SpectralAnomaly(f"block {r} has |det| != 1")
        if r:
            worst = max(worst, dev)
        er = np.exp(2j * math.pi * r * np.arange(Q) / Q)
        for c in (np.array([1, 0]), np.array([0, 1])):
            vec = np.kron(c, er)
            consist = max(consist, float(np.abs(Bf @ vec - np.kron(blk @ c, er)).max()))
    if worst > tol:
        raise SpectralAnomaly(f"eigenvalue modulus deviates from 1 by {worst:.3g}")
    lam = (J + math.sqrt(J * J - 4)) / 2
    return EigenReport(
        J,
        lam,
        tuple(blocks),
        tuple(moduli),
        tuple(sorted(set(orders))),
        tuple(int(c) for c in cp.all_coeffs()),
        tuple(int(c) for c in perp.all_coeffs()),
        rest.degree() == 0,
        worst,
        consist,
    )


@dataclass(frozen=True)
class ExtendedPeriod:
    """Extended period with exact affine displacement data.

    ``c[r]`` and ``slope[r]`` (shape ``(2, Q, d)``) satisfy
    ``sigma_{K + L n + r} = c[r] + n * slope[r]`` for ``r = 0..L``.
    """

    period: PeriodData
    M: int
    c: tuple[np.ndarray, ...]
    slope: tuple[np.ndarray, ...]
    second_diff_max: int
    positivity_power: int
    n_checked: int

    @property
    def K(self) -> int:
        return self.period.K

    @property
    def L(self) -> int:
        return self.period.L

    def grid_level(self, n: int) -> int:
        return self.K + self.L * n


def _positive_power(B: np.ndarray, cap: int) -> int:
    P = B.copy()
    for p in range(1, cap + 1):
        if np.all(P > 0):
            return p
        P = B.dot(P)
    raise ExtensionFailed(f"no positive power of B up to {cap}")


def period_extend(
    ren: Renormalization,
    period: PeriodData,
    eig: EigenReport,
    cap: int = 10_000,
    n_check: int = 10,
) -> ExtendedPeriod:
    """Smallest admissible multiplier ``M`` and the affine data on its grid.

    ``M`` is a multiple of every root-of-unity order that is at least the
    first positive power of ``B``. It is accepted once the second differences
    of ``sigma`` along the grid vanish exactly for ``n = 0..n_check``.
    """
    base = reduce(math.lcm, eig.orders, 1)
    p = _positive_power(period.B, cap)
    M = base * max(1, -(-p // base))
    while M <= cap:
        ext = period.extended(M)
        K, L = ext.K, ext.L
        worst = 0
        for r in range(L):
            sig = [ren.level(K + L * n + r).sigma.astype(object) for n in range(n_check + 3)]
            for n in range(n_check + 1):
                dd = sig[n + 2] - 2 * sig[n + 1] + sig[n]
                worst = max(worst, int(np.abs(dd).max()))
        if worst == 0:
            c = tuple(ren.level(K + r).sigma.astype(object) for r in range(L + 1))
            slope = tuple(
                ren.level(K + L + r).sigma.astype(object) - c[r] for r in range(L + 1)
            )
            return ExtendedPeriod(ext, M, c, slope, 0, p, n_check)
        M += base
    raise ExtensionFailed(f"sigma not affine on any grid with M <= {cap}")


# -- Perron data ---------------------------------------------------------------


@dataclass(frozen=True)
class PerronTriple:
    lam: complex
    v: np.ndarray
    pi: np.ndarray
    gap: float


def perron(
    Pi: np.ndarray, pi0: np.ndarray | None = None, gap_tol: float = 1e-9
) -> PerronTriple:
    """Dominant eigenvalue with right/left vectors.

    ``v`` is normalized by ``<pi0, v> = 1`` (``pi0`` defaults to the left
    vector itself) and ``pi`` by ``<pi, v> = 1``.
    """
    w, V = np.linalg.eig(Pi)
    order = np.argsort(-np.abs(w))
    lam = w[order[0]]
    gap = float(np.abs(w[order[0]]) - np.abs(w[order[1]])) if len(w) > 1 else 1.0
    if gap < gap_tol:
        raise GapTooSmall(f"eigengap {gap:.3g}")
    v = V[:, order[0]]
    wl, U = np.linalg.eig(Pi.T)
    u = U[:, np.argmin(np.abs(wl - lam))]
    ref = u if pi0 is None else pi0
    v = v / (ref @ v)
    u = u / (u @ v)
    return PerronTriple(complex(lam), v, u, gap)


def stationary(P: np.ndarray) -> np.ndarray:
    """Stationary row vector of a stochastic matrix."""
    w, U = np.linalg.eig(P.T)
    u = np.real(U[:, np.argmin(np.abs(w - 1))])
    return u / u.sum()


@dataclass(frozen=True)
class DiffusionReport:
    hessian_closed: np.ndarray
    hessian_fd: np.ndarray
    rel_err: float
    gradient_norm: float
    gradient_fd_norm: float
    cov_per_period: np.ndarray
    D_taylor: np.ndarray
    D_hessian: np.ndarray
    min_eig: float
    fd_step: float
    fd_imag: float


def centered_cf(H: RatSpec, b: Sequence[dict]) -> Callable[[np.ndarray], np.ndarray]:
    """``theta -> Pi(theta)`` for a law given as ``b[s] = {(t, vec): p}`` in floats."""
    S = H.S
    arrs = []
    for s in range(S):
        items = list(b[s].items())
        t = np.array([k[0] for k, _ in items])
        w = np.array([k[1] for k, _ in items], dtype=float).reshape(len(items), -1)
        p = np.array([v for _, v in items], dtype=float)
        arrs.append((t, w, p))

    def Pi(theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.zeros((S, S), dtype=complex)
        for s, (t, w, p) in enumerate(arrs):
            np.add.at(out[s], t, p * np.exp(2j * math.pi * (w @ theta)))
        return out

    return Pi


def diffusion_matrix(
    b: Sequence[dict], H: RatSpec, h: float = 1e-3, rel_tol: float = 1e-3
) -> DiffusionReport:
    """Hessian of the Perron root at 0, closed form versus finite differences.

    With ``Pi(theta)`` built from ``exp(2 pi i <theta, b>)`` the closed form is
    ``Hess = -(2 pi)^2 sum_s pi_s E[b_s b_s^T]``. ``D_taylor = -Hess/2`` makes
    ``lambda(theta) = 1 - <D theta, theta> + o(|theta|^2)``; ``D_hessian = -Hess``.
    """
    from .errors import ConventionMismatch, DegenerateCocycle

    Pi = centered_cf(H, b)
    d = H.d
    P0 = np.real(Pi(np.zeros(d)))
    pi0 = stationary(P0)
    cov = np.zeros((d, d))
    mean = np.zeros(d)
    for s in range(H.S):
        for (_, vec), p in b[s].items():
            v = np.asarray(vec, dtype=float)
            cov += pi0[s] * p * np.outer(v, v)
            mean += pi0[s] * p * v
    closed = -(2 * math.pi) ** 2 * cov
    # first-order perturbation: grad = pi^T dPi v / pi^T v at theta = 0
    grad = np.zeros(d, dtype=complex)
    for a in range(d):
        dPi = np.zeros((H.S, H.S), dtype=complex)
        for s in range(H.S):
            for (t, vec), p in b[s].items():
                dPi[s, t] += 2j * math.pi * p * vec[a]
        grad[a] = pi0 @ dPi @ np.ones(H.S)
    lam = lambda th: perron(Pi(th)).lam  # noqa: E731
    l0 = lam(np.zeros(d))
    E = np.eye(d)

    def hess(step: float) -> np.ndarray:
        out = np.zeros((d, d), dtype=complex)
        for a in range(d):
            out[a, a] = (lam(step * E[a]) - 2 * l0 + lam(-step * E[a])) / step**2
            for c in range(a + 1, d):
                pp = lam(step * (E[a] + E[c]))
                pm = lam(step * (E[a] - E[c]))
                mp = lam(step * (-E[a] + E[c]))
                mm = lam(-step * (E[a] + E[c]))
                out[a, c] = out[c, a] = (pp - pm - mp + mm) / (4 * step**2)
        return out

    fd_c = (4 * hess(h / 2) - hess(h)) / 3
    fd = np.real(fd_c)
    grad_fd = np.array(
        [(lam(h * E[a]) - lam(-h * E[a])) / (2 * h) for a in range(d)], dtype=complex
    )
    rel = float(np.linalg.norm(fd - closed) / np.linalg.norm(closed))
    D_taylor = -closed / 2
    min_eig = float(np.linalg.eigvalsh(D_taylor).min())
    report = DiffusionReport(
        closed,
        fd,
        rel,
        float(np.linalg.norm(grad)),
        float(np.linalg.norm(grad_fd)),
        cov,
        D_taylor,
        -closed,
        min_eig,
        h,
        float(np.abs(np.imag(fd_c)).max()),
    )
    if rel > rel_tol:
        raise ConventionMismatch(f"finite-difference Hessian off by {rel:.3g}")
    if min_eig <= 0:
        raise DegenerateCocycle("diffusion matrix is not positive definite")
    return report


@dataclass(frozen=True)
class AdaptednessReport:
    c_hat: float
    eps_hat: float
    r_hat: float
    grid: int
    norm_at_zero: float
    max_radius_ratio: float = field(default=0.0)


def adaptedness_scan(
    Pi: Callable[[np.ndarray], np.ndarray], d: int, points: int = 256, r_hat: float = 0.1
) -> AdaptednessReport:
    """Scan ``||Pi(theta)||`` (max row absolute sum) over ``[-1/2, 1/2)^d``.

    ``eps_hat`` is the minimum of ``1 - ||Pi||`` outside the ``r_hat``
    neighbourhood of the lattice, ``c_hat`` the minimum of
    ``(1 - ||Pi||)/|theta|^2`` inside it (excluding 0).
    """
    per_axis = max(2, round(points ** (1.0 / d)))
    axis = -0.5 + np.arange(per_axis) / per_axis
    c_hat, eps_hat = math.inf, math.inf
    worst_ratio = 0.0
    norm0 = float(np.abs(Pi(np.zeros(d))).sum(axis=1).max())
    for idx in np.ndindex(*(per_axis,) * d):
        th = np.array([axis[i] for i in idx])
        r = float(np.linalg.norm(th))
        if r == 0:
            continue
        M = Pi(th)
        nrm = float(np.abs(M).sum(axis=1).max())
        rad = float(np.abs(np.linalg.eigvals(M)).max())
        worst_ratio = max(worst_ratio, rad - nrm)
        if np.abs(th).max() >= r_hat:
            eps_hat = min(eps_hat, 1 - nrm)
        else:
            c_hat = min(c_hat, (1 - nrm) / r**2)
    # fine ring inside the neighbourhood for c_hat
    for rr in np.linspace(r_hat / 20, r_hat, 20):
        for ang in range(16 if d > 1 else 2):
            if d == 1:
                th = np.array([rr if ang == 0 else -rr])
            else:
                phi = 2 * math.pi * ang / 16
                th = np.zeros(d)
                th[0], th[1] = rr * math.cos(phi), rr * math.sin(phi)
            nrm = float(np.abs(Pi(th)).sum(axis=1).max())
            c_hat = min(c_hat, (1 - nrm) / rr**2)
    rep = AdaptednessReport(c_hat, eps_hat, r_hat, per_axis**d, norm0, worst_ratio)
    if not eps_hat > 0:
        raise NotAdapted(f"eps_hat = {eps_hat:.3g}")
    return rep
