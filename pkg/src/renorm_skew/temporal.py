"""Exact temporal distributions of orbit blocks.

``V_k(i, eps)`` counts, for each lattice point ``nu``, the positions inside the
block ``(k, i, eps)`` where the running Birkhoff sum equals ``nu``. Its total
mass is ``l_k(i)``. Weights are stored densely on the bounding box of the
support, as ``int64`` while the block lengths allow it and as Python integers
(``object`` arrays) afterwards.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .blocks import LevelState, Renormalization
from .errors import InvalidInput, NoDrift

_INT64_SAFE = 1 << 62


@dataclass(frozen=True, eq=False)
class TemporalDist:
    """Counting measure on ``Z^d`` stored on a box starting at ``origin``."""

    k: int
    i: int
    eps: int
    weights: np.ndarray
    origin: tuple[int, ...]
    total: int

    @property
    def d(self) -> int:
        return self.weights.ndim

    def support(self) -> dict[tuple[int, ...], int]:
        """Mapping ``nu -> weight`` over the nonzero entries."""
        out = {}
        for idx in zip(*np.nonzero(self.weights != 0)):
            nu = tuple(int(o + j) for o, j in zip(self.origin, idx))
            out[nu] = int(self.weights[idx])
        return out

    def __getitem__(self, nu: Sequence[int] | int) -> int:
        nu = (nu,) if isinstance(nu, (int, np.integer)) else tuple(nu)
        idx = tuple(int(v) - o for v, o in zip(nu, self.origin))
        if any(j < 0 or j >= s for j, s in zip(idx, self.weights.shape)):
            return 0
        return int(self.weights[idx])

    def probs(self) -> np.ndarray:
        """Weights divided by the total, correctly rounded to binary64."""
        if self.weights.dtype == object:
            T = self.total
            return np.vectorize(lambda w: w / T, otypes=[np.float64])(self.weights)
        return self.weights / self.total

    def axes(self) -> list[np.ndarray]:
        return [o + np.arange(s) for o, s in zip(self.origin, self.weights.shape)]

    def marginal(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        """Lattice points and exact integer weights of one coordinate."""
        other = tuple(a for a in range(self.d) if a != axis)
        w = self.weights.sum(axis=other) if other else self.weights
        return self.axes()[axis], w

    def to_rows(self) -> list[tuple[int, ...]]:
        """``(nu_1, ..., nu_d, weight)`` rows in lexicographic order."""
        return [nu + (w,) for nu, w in sorted(self.support().items())]


def _point_mass(k, i, eps, nu) -> TemporalDist:
    d = len(nu)
    w = np.ones((1,) * d, dtype=np.int64)
    return TemporalDist(k, i, eps, w, tuple(int(v) for v in nu), 1)


def dist_init(ren: Renormalization) -> list[TemporalDist]:
    """``V_0(i, eps)`` = unit mass at ``Phi(eps)``; flat index ``i*Q + eps``."""
    Phi = ren.inst.cocycle.Phi
    return [_point_mass(0, i, e, Phi[e]) for i in (0, 1) for e in range(ren.Q)]


def _shifted_sum(parts, dtype) -> tuple[np.ndarray, tuple[int, ...]]:
    starts = np.array([np.add(p.origin, s) for p, s in parts])
    ends = np.array([np.add(p.origin, s) + p.weights.shape for p, s in parts])
    lo, hi = starts.min(axis=0), ends.max(axis=0)
    acc = np.zeros(tuple(hi - lo), dtype=dtype)
    for (p, _), st in zip(parts, starts - lo):
        sl = tuple(slice(a, a + n) for a, n in zip(st, p.weights.shape))
        acc[sl] += p.weights
    return acc, tuple(int(v) for v in lo)


def dist_step(
    family: Sequence[TemporalDist], state: LevelState, n_next: int
) -> list[TemporalDist]:
    """Orbit-block transition from level ``k`` to ``k+1``.

    ``V_{k+1}(i, eps)`` is the sum of ``V_k(0, eps + j eps_k)`` shifted by
    ``s_k(j, eps)`` for ``j < n-1-i`` and ``V_k(1, eps + (n-1-i) eps_k)``
    shifted by ``s_k(n-1-i, eps)``.
    """
    Q, n = state.Q, n_next
    e = state.eps[0]
    cum = state.cumulative(n)
    l_next = ((n - 1) * state.ell[0] + state.ell[1], (n - 2) * state.ell[0] + state.ell[1])
    big = l_next[0] >= _INT64_SAFE
    dtype = object if big else np.int64
    out = []
    for i in (0, 1):
        m = n - 1 - i
        for eps in range(Q):
            parts = [(family[(eps + j * e) % Q], cum[j, eps]) for j in range(m)]
            parts.append((family[Q + (eps + m * e) % Q], cum[m, eps]))
            if big:
                parts = [
                    (p if p.weights.dtype == object else _as_object(p), s)
                    for p, s in parts
                ]
            w, origin = _shifted_sum(parts, dtype)
            out.append(TemporalDist(state.k + 1, i, eps, w, origin, l_next[i]))
    return out


def _as_object(p: TemporalDist) -> TemporalDist:
    return TemporalDist(p.k, p.i, p.eps, p.weights.astype(object), p.origin, p.total)


class DistTower:
    """Iterates the distribution recursion alongside a :class:`Renormalization`."""

    def __init__(self, ren: Renormalization) -> None:
        self.ren = ren
        self.k = 0
        self.family = dist_init(ren)

    def advance_to(self, k: int) -> list[TemporalDist]:
        if k < self.k:
            raise InvalidInput("the tower only moves forward")
        while self.k < k:
            self.family = dist_step(
                self.family, self.ren.level(self.k), self.ren.n(self.k + 1)
            )
            self.k += 1
        return self.family

    def get(self, i: int, eps: int) -> TemporalDist:
        return self.family[i * self.ren.Q + eps]


def dist_char(V: TemporalDist, theta: Sequence[float] | float) -> complex:
    """``Xi(theta) = sum_nu V(nu)/l exp(2 pi i <theta, nu>)`` with fsum accumulation."""
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if theta.shape != (V.d,):
        raise InvalidInput("theta has the wrong dimension")
    p = V.probs()
    nz = np.nonzero(p)
    phase = np.zeros(len(nz[0]))
    for ax, t in enumerate(theta):
        phase += t * (nz[ax] + V.origin[ax])
    phase = np.mod(phase, 1.0) * (2 * math.pi)
    vals = p[nz]
    return complex(math.fsum(vals * np.cos(phase)), math.fsum(vals * np.sin(phase)))


def dist_char_vector(family: Sequence[TemporalDist], theta) -> np.ndarray:
    return np.array([dist_char(V, theta) for V in family])


@dataclass(frozen=True)
class MomentReport:
    k: int
    mean: tuple[Fraction, ...]
    covariance: tuple[tuple[Fraction, ...], ...]

    def mean_float(self) -> np.ndarray:
        return np.array([float(m) for m in self.mean])

    def cov_float(self) -> np.ndarray:
        return np.array([[float(c) for c in row] for row in self.covariance])


def dist_moments(V: TemporalDist) -> MomentReport:
    """Exact mean and covariance of a uniformly chosen block position."""
    d, T = V.d, V.total
    axes = V.axes()
    s1 = []
    s2 = [[0] * d for _ in range(d)]
    w = V.weights.astype(object) if V.weights.dtype != object else V.weights
    grids = np.meshgrid(*[a.astype(object) for a in axes], indexing="ij")
    for a in range(d):
        s1.append(int((w * grids[a]).sum()))
    for a in range(d):
        for b in range(a, d):
            s2[a][b] = s2[b][a] = int((w * grids[a] * grids[b]).sum())
    mean = tuple(Fraction(x, T) for x in s1)
    cov = tuple(
        tuple(Fraction(s2[a][b], T) - mean[a] * mean[b] for b in range(d)) for a in range(d)
    )
    return MomentReport(V.k, mean, cov)


def mean_sums(ren: Renormalization, k_max: int) -> list[np.ndarray]:
    """First-moment sums ``sum_nu nu V_k(s)(nu)`` for ``k = 0..k_max``.

    Uses the same transition as :func:`dist_step` on first moments only, so it
    is cheap far beyond the levels where full distributions are affordable.
    Each entry has shape ``(2, Q, d)`` with Python integers.
    """
    Q = ren.Q
    Phi = ren.inst.cocycle.Phi.astype(object)
    cur = np.stack([Phi, Phi])
    out = [cur]
    for k in range(k_max):
        st = ren.level(k)
        n, e = ren.n(k + 1), st.eps[0]
        cum = st.cumulative(n).astype(object)
        l0, l1 = st.ell
        nxt = np.empty_like(cur)
        for i in (0, 1):
            m = n - 1 - i
            for eps in range(Q):
                acc = cur[1, (eps + m * e) % Q] + l1 * cum[m, eps]
                for j in range(m):
                    acc = acc + cur[0, (eps + j * e) % Q] + l0 * cum[j, eps]
                nxt[i, eps] = acc
        cur = nxt
        out.append(cur)
    return out


def exact_means(ren: Renormalization, levels: Sequence[int]) -> list[np.ndarray]:
    """Exact rational means ``E x_k(s)`` at the given levels, shape ``(2, Q, d)``."""
    sums = mean_sums(ren, max(levels))
    res = []
    for k in levels:
        l0, l1 = ren.ell(k)
        m = sums[k]
        arr = np.empty(m.shape, dtype=object)
        for i, L in ((0, l0), (1, l1)):
            for idx in np.ndindex(m.shape[1:]):
                arr[(i,) + idx] = Fraction(int(m[(i,) + idx]), L)
        res.append(arr)
    return res


@dataclass(frozen=True)
class DriftResult:
    mu: np.ndarray
    xi: np.ndarray
    rho: float
    tail: tuple[float, ...]


def drift_extract(means: Sequence[Sequence[Fraction]], min_len: int = 5) -> DriftResult:
    """Fit ``m_n = n mu + xi + O(rho^n)`` from exact means ``m_0..m_N``.

    ``mu`` is the last consecutive difference and ``xi = m_N - N mu``. The
    tail of second differences serves as the convergence certificate.
    """
    if len(means) < min_len:
        raise InvalidInput(f"need at least {min_len} means")
    M = [np.array([Fraction(v) for v in np.ravel(m)], dtype=object) for m in means]
    N = len(M) - 1
    mu = M[N] - M[N - 1]
    xi = M[N] - N * mu
    d2 = [float(np.abs((M[n] - 2 * M[n - 1] + M[n - 2]).astype(float)).max()) for n in range(2, N + 1)]
    nz = [v for v in d2 if v > 0]
    if not nz:
        rho = 0.0
    else:
        ratios = [b / a for a, b in zip(d2[:-1], d2[1:]) if a > 0 and b > 0]
        rho = float(np.median(ratios[-5:])) if ratios else 0.0
        half = len(d2) // 2
        if rho >= 1 or (half and d2[-1] >= max(d2[:half]) and d2[-1] > 1e-14):
            raise NoDrift(f"second differences do not decay (rho={rho:.3g})")
    shape = np.shape(means[0])
    return DriftResult(mu.reshape(shape), xi.reshape(shape), rho, tuple(d2))


def parseval_l2(V: TemporalDist) -> float:
    """Exact ``sum_nu (V(nu)/l)^2`` rounded once to binary64."""
    w = V.weights.astype(object) if V.weights.dtype != object else V.weights
    return float(Fraction(int((w * w).sum()), V.total * V.total))


def char_grid(V: TemporalDist, size: Sequence[int] | int) -> np.ndarray:
    """``Xi`` on the tensor grid ``theta_j = j / size`` via an inverse FFT."""
    sizes = (size,) * V.d if isinstance(size, int) else tuple(size)
    if any(s < n for s, n in zip(sizes, V.weights.shape)):
        raise InvalidInput("grid smaller than the support box")
    buf = np.zeros(sizes)
    buf[tuple(slice(0, n) for n in V.weights.shape)] = V.probs()
    spec = np.fft.ifftn(buf) * np.prod(sizes)
    # account for the box origin: multiply by exp(2 pi i <theta, origin>)
    for ax, (o, s) in enumerate(zip(V.origin, sizes)):
        ph = np.exp(2j * cmath.pi * o * np.arange(s) / s)
        shape = [1] * V.d
        shape[ax] = s
        spec = spec * ph.reshape(shape)
    return spec
