"""Substitution blocks, level data and the orbit engine.

Conventions
-----------
Block positions and orbit times are 1-based. ``phi_n(0)`` is the Birkhoff sum
of the first ``n`` jumps ``phi(0), phi(alpha), ..., phi((n-1) alpha)``.
States are pairs ``(i, eps)`` with block type ``i in {0, 1}`` and parity
``eps in Z_Q``; arrays indexed by state use the flat index ``i*Q + eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .cf import CFExpansion, modified_cf
from .errors import InvalidInput, TooLarge
from .surd import Surd

EXPLICIT_CAP = 10**7
DIRECT_CAP = 10**7


@dataclass(frozen=True)
class Cocycle:
    """Integer step values ``phi(x) = Phi[floor(Q x)]`` on the circle.

    Parameters
    ----------
    Phi : array_like, shape (Q, d)
        Integer values; must sum to zero over the ``Q`` cells.
    """

    Phi: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.Phi)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise InvalidInput("Phi must have shape (Q, d) with Q >= 2")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.round(arr)):
                raise InvalidInput("Phi must be integer valued")
        arr = arr.astype(np.int64)
        if np.any(arr.sum(axis=0) != 0):
            raise InvalidInput("Phi is not centered: values must sum to 0")
        arr.setflags(write=False)
        object.__setattr__(self, "Phi", arr)

    @property
    def Q(self) -> int:
        return self.Phi.shape[0]

    @property
    def d(self) -> int:
        return self.Phi.shape[1]

    @cached_property
    def variation(self) -> int:
        """Total variation ``sum_eps ||Phi(eps+1) - Phi(eps)||_inf`` on the circle."""
        diff = np.roll(self.Phi, -1, axis=0) - self.Phi
        return int(np.abs(diff).max(axis=1).sum())


def floor_multiples(x: Surd, m: np.ndarray) -> np.ndarray:
    """Exact ``floor(m * x)`` for a vector of nonnegative integers ``m``.

    A binary64 estimate is accepted when it is far from an integer; the rest
    are settled with exact surd arithmetic.
    """
    m = np.asarray(m, dtype=np.int64)
    if m.size and int(m.max()) > 2**40:
        raise InvalidInput("multiplier too large for the hybrid floor")
    y = m.astype(np.float64) * float(x)
    out = np.floor(y).astype(np.int64)
    frac = y - np.floor(y)
    tol = 1e-15 * (np.abs(y) + 1) * 64
    risky = np.nonzero((frac < tol) | (frac > 1 - tol))[0]
    for idx in risky.tolist():
        out[idx] = math.floor(int(m[idx]) * x)
    return out


@dataclass(frozen=True)
class Instance:
    """Rotation number plus cocycle, with ``P = floor(Q alpha)``, ``beta = {Q alpha}``."""

    alpha: Surd
    cocycle: Cocycle

    def __post_init__(self) -> None:
        if self.alpha.is_rational:
            from .errors import RationalInput

            raise RationalInput(f"alpha={self.alpha} is rational")
        if not (0 < self.alpha < 1):
            raise InvalidInput("alpha must lie in (0, 1)")

    @property
    def Q(self) -> int:
        return self.cocycle.Q

    @property
    def d(self) -> int:
        return self.cocycle.d

    @cached_property
    def P(self) -> int:
        return math.floor(self.Q * self.alpha)

    @cached_property
    def beta(self) -> Surd:
        return self.Q * self.alpha - self.P

    @cached_property
    def mcf(self) -> CFExpansion:
        return modified_cf(self.beta)


@dataclass(frozen=True, eq=False)
class LevelState:
    """Renormalization data at level ``k``.

    Attributes
    ----------
    ell : tuple of int
        Block lengths ``(l_k(0), l_k(1))``.
    eps : tuple of int
        Parity states ``(eps_k(0), eps_k(1))``.
    sigma : ndarray, shape (2, Q, d)
        Simple displacements ``sigma_k(i, eps)``.
    """

    k: int
    ell: tuple[int, int]
    eps: tuple[int, int]
    sigma: np.ndarray
    _cum: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def Q(self) -> int:
        return self.sigma.shape[1]

    def cumulative(self, n: int) -> np.ndarray:
        """Table ``s_k(K, eps)`` for ``K = 0..n-1``, shape ``(n, Q, d)``."""
        if n not in self._cum:
            Q, d = self.sigma.shape[1:]
            out = np.zeros((n, Q, d), dtype=self.sigma.dtype)
            shift = np.arange(Q)
            for K in range(1, n):
                out[K] = out[K - 1] + self.sigma[0, (shift + (K - 1) * self.eps[0]) % Q]
            self._cum[n] = out
        return self._cum[n]


def level_init(inst: Instance) -> LevelState:
    Q, P = inst.Q, inst.P
    sigma = np.stack([inst.cocycle.Phi, inst.cocycle.Phi]).astype(np.int64)
    return LevelState(0, (1, 1), (P % Q, (P + 1) % Q), sigma)


def level_step(state: LevelState, n_next: int) -> LevelState:
    """Advance one level with digit ``n_next = n_{k+1}``."""
    if n_next < 2:
        raise InvalidInput("modified digits are >= 2")
    n, Q = n_next, state.Q
    l0, l1 = state.ell
    e0, e1 = state.eps
    cum = state.cumulative(n)
    shift = np.arange(Q)
    sigma = np.empty_like(state.sigma)
    for i in (0, 1):
        m = n - 1 - i
        sigma[i] = cum[m] + state.sigma[1, (shift + m * e0) % Q]
    return LevelState(
        state.k + 1,
        ((n - 1) * l0 + l1, (n - 2) * l0 + l1),
        (((n - 1) * e0 + e1) % Q, ((n - 2) * e0 + e1) % Q),
        sigma,
    )


class Renormalization:
    """Lazily extended tower of :class:`LevelState` objects for an instance."""

    def __init__(self, inst: Instance) -> None:
        self.inst = inst
        self._levels = [level_init(inst)]

    @property
    def Q(self) -> int:
        return self.inst.Q

    @property
    def d(self) -> int:
        return self.inst.d

    def n(self, k: int) -> int:
        """Digit ``n_k`` (``k >= 1``)."""
        return self.inst.mcf.digit(k)

    def level(self, k: int) -> LevelState:
        while len(self._levels) <= k:
            top = self._levels[-1]
            self._levels.append(level_step(top, self.n(top.k + 1)))
        return self._levels[k]

    def ell(self, k: int) -> tuple[int, int]:
        return self.level(k).ell

    def first_level_with(self, length: int, i: int = 0) -> int:
        """Smallest ``k`` with ``l_k(i) >= length``."""
        k = 0
        while self.level(k).ell[i] < length:
            k += 1
        return k

    def last_level_below(self, bound: int, i: int = 0) -> int:
        """Largest ``k`` with ``l_k(i) <= bound``."""
        k = 0
        while self.level(k + 1).ell[i] <= bound:
            k += 1
        return k

    def children(self, k: int, i: int, eps: int) -> list[tuple[int, int, int]]:
        """Level ``k-1`` pieces ``(type, parity, j)`` of block ``(k, i, eps)``.

        ``j`` is the 0-based index used in the cumulative table ``s_{k-1}(j, eps)``.
        """
        prev = self.level(k - 1)
        n, Q, e = self.n(k), self.Q, prev.eps[0]
        m = n - 1 - i
        out = [(0, (eps + j * e) % Q, j) for j in range(m)]
        out.append((1, (eps + m * e) % Q, m))
        return out

    # -- parity blocks --------------------------------------------------------
    def parity_base(self, k: int) -> list[np.ndarray]:
        """``B_k(i, 0)`` for ``i = 0, 1`` built by the concatenation rule."""
        if max(self.ell(k)) > EXPLICIT_CAP:
            raise TooLarge("parity block exceeds the explicit cap")
        Q = self.Q
        blocks = [np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64)]
        for kk in range(1, k + 1):
            new = []
            for i in (0, 1):
                parts = [(blocks[t] + p) % Q for t, p, _ in self.children(kk, i, 0)]
                new.append(np.concatenate(parts))
            blocks = new
        return blocks

    def parity_block(self, k: int, i: int, eps: int) -> np.ndarray:
        """``B_k(i, eps)`` from the symbol blocks (explicit levels only)."""
        b = symbol_blocks(self, k).b[i]
        P = self.inst.P
        n = np.arange(len(b), dtype=np.int64)
        csum = np.concatenate([[0], np.cumsum(b[:-1], dtype=np.int64)])
        return (eps + n * P + csum) % self.Q

    def _leaves(self, k: int, i: int, eps: int, k0: int) -> Iterator[tuple[int, int]]:
        if k == k0:
            yield i, eps
            return
        for t, p, _ in self.children(k, i, eps):
            yield from self._leaves(k - 1, t, p, k0)

    def jump_chunks(self, N: int, leaf_bound: int = 1 << 16) -> Iterator[np.ndarray]:
        """Chunks of ``phi({j alpha})``, ``j = 0..N-1``, shape ``(len, d)``."""
        if N <= 0:
            return
        top = self.first_level_with(N)
        k0 = min(top, self.last_level_below(leaf_bound))
        base = self.parity_base(k0)
        Phi = self.inst.cocycle.Phi
        left = N
        for t, p in self._leaves(top, 0, 0, k0):
            chunk = Phi[(base[t][:left] + p) % self.Q]
            left -= len(chunk)
            yield chunk
            if left <= 0:
                return

    def orbit_chunks(self, N: int) -> Iterator[np.ndarray]:
        """Chunks of ``phi_n(0)``, ``n = 1..N``, shape ``(len, d)``."""
        carry = np.zeros(self.d, dtype=np.int64)
        for chunk in self.jump_chunks(N):
            out = np.cumsum(chunk, axis=0) + carry
            carry = out[-1]
            yield out

    def birkhoff_at(self, n: int) -> np.ndarray:
        """Exact ``phi_n(0)`` for ``n >= 1`` by descending the block tower."""
        if n < 1:
            raise InvalidInput("orbit times start at 1")
        k = self.first_level_with(n)
        i, eps, pos = 0, 0, n
        total = np.zeros(self.d, dtype=object)
        while k > 0:
            prev = self.level(k - 1)
            l0 = prev.ell[0]
            m = self.n(k) - 1 - i
            cum = prev.cumulative(m + 1)
            if pos <= m * l0:
                j = (pos - 1) // l0
                nxt, pos = 0, pos - j * l0
            else:
                j = m
                nxt, pos = 1, pos - m * l0
            total = total + cum[j, eps].astype(object)
            eps = (eps + j * prev.eps[0]) % self.Q
            i, k = nxt, k - 1
        return total + self.inst.cocycle.Phi[eps].astype(object)


def orbit_stream(ren: Renormalization, N: int) -> Iterator[tuple[int, ...]]:
    """Exact Birkhoff sums ``phi_n(0)``, ``n = 1..N``, one tuple per step."""
    for chunk in ren.orbit_chunks(N):
        yield from map(tuple, chunk.tolist())


def jump_stream(ren: Renormalization, N: int) -> Iterator[tuple[int, ...]]:
    """Jumps ``phi({j alpha})``, ``j = 0..N-1``, one tuple per step."""
    for chunk in ren.jump_chunks(N):
        yield from map(tuple, chunk.tolist())


def orbit_array(ren: Renormalization, N: int) -> np.ndarray:
    """``phi_n(0)`` for ``n = 1..N`` stacked into an ``(N, d)`` array."""
    if N <= 0:
        return np.zeros((0, ren.d), dtype=np.int64)
    return np.concatenate(list(ren.orbit_chunks(N)))


# -- symbolic blocks -----------------------------------------------------------


@dataclass(frozen=True)
class SymbolBlocks:
    """Explicit 0/1 blocks ``b_k(0)``, ``b_k(1)``."""

    b: tuple[np.ndarray, np.ndarray]

    @classmethod
    def initial(cls) -> "SymbolBlocks":
        return cls((np.zeros(1, dtype=np.uint8), np.ones(1, dtype=np.uint8)))


def substitution_step(
    blocks: SymbolBlocks, n_next: int, cap: int = EXPLICIT_CAP
) -> SymbolBlocks:
    """``b(0) -> b(0)^(n-1) b(1)`` and ``b(1) -> b(0)^(n-2) b(1)``, unmodified."""
    b0, b1 = blocks.b
    if (n_next - 1) * len(b0) + len(b1) > cap:
        raise TooLarge("symbol block exceeds the explicit cap")
    return SymbolBlocks(
        (
            np.concatenate([np.tile(b0, n_next - 1), b1]),
            np.concatenate([np.tile(b0, n_next - 2), b1]),
        )
    )


def symbol_blocks(ren: Renormalization, k: int, cap: int = EXPLICIT_CAP) -> SymbolBlocks:
    blocks = SymbolBlocks.initial()
    for kk in range(1, k + 1):
        blocks = substitution_step(blocks, ren.n(kk), cap)
    return blocks


def flip_last(block: np.ndarray) -> np.ndarray:
    """Copy of a type-1 block with its final symbol changed from 1 to 0."""
    out = block.copy()
    if out[-1] != 1:
        raise InvalidInput("type-1 blocks end with the symbol 1")
    out[-1] = 0
    return out


# -- direct oracles ------------------------------------------------------------


def psi_sequence(beta: Surd, N: int) -> np.ndarray:
    """``psi_k = 1[{(k-1) beta} >= 1 - beta]`` for ``k = 1..N`` (exact)."""
    fl = floor_multiples(beta, np.arange(N + 1))
    return np.diff(fl).astype(np.uint8)


def kappa_sequence(alpha: Surd, Q: int, n: Sequence[int] | np.ndarray) -> np.ndarray:
    """``kappa({n alpha}) = floor(Q n alpha) - Q floor(n alpha)`` (exact)."""
    n = np.asarray(n, dtype=np.int64)
    return floor_multiples(Q * alpha, n) - Q * floor_multiples(alpha, n)


def birkhoff_direct(
    alpha: Surd | float, cocycle: Cocycle, N: int, cap: int = DIRECT_CAP
) -> np.ndarray:
    """Brute-force ``phi_n(0)``, ``n = 1..N``, by rotating and summing.

    With a :class:`Surd` the cell indices are exact; with a float they are
    binary64 approximations.
    """
    if N > cap:
        raise TooLarge(f"N={N} exceeds the brute-force cap {cap}")
    j = np.arange(N, dtype=np.int64)
    if isinstance(alpha, Surd):
        cells = kappa_sequence(alpha, cocycle.Q, j)
    else:
        cells = np.floor(cocycle.Q * np.mod(j * float(alpha), 1.0)).astype(np.int64)
    return np.cumsum(cocycle.Phi[cells], axis=0)


def floor_sum(n: int, a: Surd, c: Surd) -> int:
    """Exact ``sum_{j=0}^{n-1} floor(a j + c)`` for irrational ``a > 0``.

    Euclid-like reduction: integer parts are peeled off, then the roles of
    ``a`` and ``1/a`` are swapped, so the depth is logarithmic in ``n``.
    """
    total = 0
    sign = 1
    while n > 0:
        A, C = math.floor(a), math.floor(c)
        total += sign * (A * n * (n - 1) // 2 + C * n)
        a, c = a - A, c - C
        m = math.floor(a * (n - 1) + c)
        if m == 0:
            break
        # sum_j floor(a j + c) = m n - sum_{t=1}^{m} ceil((t - c)/a)
        #                      = m n + sum_{u=0}^{m-1} floor(u/a + (c - m)/a)
        total += sign * m * n
        a, c, n = a.inverse(), (c - m) / a, m
    return total


def birkhoff_floor_sum(alpha: Surd, cocycle: Cocycle, n: int) -> np.ndarray:
    """``phi_n(0)`` from exact cell-visit counts, for arbitrarily large ``n``.

    ``#{j < n : {j alpha} >= c} = sum_j floor(j alpha + 1 - c) - floor(j alpha)``
    gives the number of visits to each cell ``[l/Q, (l+1)/Q)``.
    """
    Q = cocycle.Q
    base = floor_sum(n, alpha, Surd(0, 0, 1, alpha.D))
    at_least = [n]  # c = 0
    for l in range(1, Q):
        c = Surd(Q - l, 0, Q, alpha.D)  # 1 - l/Q
        at_least.append(floor_sum(n, alpha, c) - base)
    at_least.append(0)
    counts = [at_least[l] - at_least[l + 1] for l in range(Q)]
    total = np.zeros(cocycle.d, dtype=object)
    for l in range(Q):
        total = total + counts[l] * cocycle.Phi[l].astype(object)
    return total
