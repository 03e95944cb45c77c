"""Random affine transformations of flip type and affine random walks.

A flip-type RAT on ``(R^d)^S`` with ``S = {0,1} x Z_Q`` acts by
``F(x)_s = x_{L_s} + W_{s, L_s}``. Only the per-state joint law of
``(L_s, W_{s, L_s})`` matters for one-point marginals, so a :class:`RatSpec`
stores, for each flat state ``s = i*Q + eps``, a mapping
``(t, w) -> P(L_s = t, W = w)``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .blocks import LevelState, Renormalization
from .errors import InvalidInput

TRIAL_BLOCK = 1 << 15

Outcome = tuple[int, tuple[int, ...]]


@dataclass(frozen=True)
class RatSpec:
    """Flip-type RAT given by per-state joint laws of (target, displacement).

    ``law[s]`` maps ``(t, w)`` to a probability (``Fraction``, ``Surd`` or
    ``float``). Affine families store ``w`` as ``base + slope`` concatenated,
    with ``affine=True``; :meth:`at` materializes the member at parameter ``n``.
    """

    Q: int
    d: int
    law: tuple[Mapping[Outcome, Any], ...]
    affine: bool = False

    @property
    def S(self) -> int:
        return 2 * self.Q

    def jump_matrix(self) -> list[list[Any]]:
        """``P(L_s = t)`` as a nested list (exact when the law is exact)."""
        out = [[0] * self.S for _ in range(self.S)]
        for s, row in enumerate(self.law):
            for (t, _), p in row.items():
                out[s][t] = out[s][t] + p
        return out

    def row_sums(self) -> list[Any]:
        return [sum(row.values(), 0) for row in self.law]

    def displacement_law(self, s: int, t: int) -> dict[tuple[int, ...], Any]:
        """Conditional law of ``W_{s,t}`` given ``L_s = t``."""
        pairs = {w: p for (u, w), p in self.law[s].items() if u == t}
        tot = sum(pairs.values(), 0)
        if not tot:
            raise InvalidInput(f"P(L_{s} = {t}) is zero")
        return {w: p / tot for w, p in pairs.items()}

    def at(self, n: int) -> "RatSpec":
        """Member ``W = base + n * slope`` of an affine family."""
        if not self.affine:
            return self
        d = self.d
        law = []
        for row in self.law:
            new: dict[Outcome, Any] = defaultdict(int)
            for (t, w), p in row.items():
                key = (t, tuple(w[a] + n * w[d + a] for a in range(d)))
                new[key] = new[key] + p
            law.append(dict(new))
        return RatSpec(self.Q, d, tuple(law), False)

    def to_float(self) -> "RatSpec":
        law = tuple({k: float(p) for k, p in row.items()} for row in self.law)
        return RatSpec(self.Q, self.d, law, self.affine)

    def outcome_arrays(self, s: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(targets, displacements, probabilities)`` for state ``s`` in binary64."""
        items = sorted(self.law[s].items())
        t = np.array([k[0] for k, _ in items], dtype=np.int64)
        w = np.array([k[1] for k, _ in items], dtype=np.int64).reshape(len(items), -1)
        p = np.array([float(v) for _, v in items])
        return t, w, p


def compose(outer: RatSpec, inner: RatSpec) -> RatSpec:
    """Law of ``outer o inner``: a path ``s -> t`` under ``outer``, then ``t -> u``."""
    if outer.Q != inner.Q or outer.affine != inner.affine:
        raise InvalidInput("incompatible RATs")
    law = []
    for row in outer.law:
        new: dict[Outcome, Any] = defaultdict(int)
        for (t, w), p in row.items():
            for (u, w2), p2 in inner.law[t].items():
                key = (u, tuple(a + b for a, b in zip(w, w2)))
                new[key] = new[key] + p * p2
        law.append(dict(new))
    return RatSpec(outer.Q, outer.d, tuple(law), outer.affine)


def rat_build(state: LevelState, n_next: int) -> RatSpec:
    """Exact RAT ``F_{k+1}`` from the level-``k`` state and digit ``n_{k+1}``.

    Sub-block ``j < n-1-i`` of block ``(i, eps)`` has type 0, parity
    ``eps + j eps_k`` and offset ``s_k(j, eps)``; the last one has type 1.
    Picking a position uniformly selects sub-block ``j`` with probability
    proportional to its length.
    """
    Q, d, n = state.Q, state.sigma.shape[2], n_next
    l0, l1 = state.ell
    e = state.eps[0]
    cum = state.cumulative(n)
    law = []
    for i in (0, 1):
        m = n - 1 - i
        total = m * l0 + l1
        for eps in range(Q):
            row: dict[Outcome, Fraction] = defaultdict(Fraction)
            for j in range(m):
                key = ((eps + j * e) % Q, tuple(int(v) for v in cum[j, eps]))
                row[key] += Fraction(l0, total)
            key = (Q + (eps + m * e) % Q, tuple(int(v) for v in cum[m, eps]))
            row[key] += Fraction(l1, total)
            law.append(dict(row))
    return RatSpec(Q, d, tuple(law))


def rat_sequence(ren: Renormalization, k: int) -> list[RatSpec]:
    """``F_1, ..., F_k`` for an instance."""
    return [rat_build(ren.level(j), ren.n(j + 1)) for j in range(k)]


def rat_cf(spec: RatSpec, theta: Sequence[float] | float) -> np.ndarray:
    """``Pi(theta)_{s,t} = P(L_s = t) E exp(2 pi i <theta, W_{s,t}>)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    Pi = np.zeros((spec.S, spec.S), dtype=complex)
    for s in range(spec.S):
        t, w, p = spec.outcome_arrays(s)
        phase = np.exp(2j * math.pi * np.mod(w[:, : spec.d] @ theta, 1.0))
        np.add.at(Pi[s], t, p * phase)
    return Pi


@dataclass(frozen=True)
class EmpiricalDist:
    """Sample counts of ``X_s`` for one state."""

    state: int
    trials: int
    seed: int
    counts: Mapping[tuple[int, ...], int]

    def probs(self) -> dict[tuple[int, ...], float]:
        return {k: v / self.trials for k, v in self.counts.items()}


def _block_rng(seed: int, block: int) -> np.random.Generator:
    # one Philox stream per fixed-size block of trials, so the sample sequence
    # does not depend on how blocks are scheduled
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def arw_sample(
    specs: Sequence[RatSpec],
    trials: int,
    seed: int,
    start: np.ndarray | None = None,
    states: Iterable[int] | None = None,
) -> dict[int, EmpiricalDist]:
    """Sample ``X^(k)_s = (F_k o ... o F_1)(x0)_s`` for ``k = len(specs)``.

    Parameters
    ----------
    specs : sequence of RatSpec
        ``F_1, ..., F_k`` in application order.
    start : ndarray of shape (S, d), optional
        Initial vector ``x0``; zero when omitted.
    states : iterable of int, optional
        Flat states to record (default: all).
    """
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    if not specs:
        if start is None:
            raise InvalidInput("the empty composition needs a dimension; pass start")
    Q = specs[0].Q if specs else start.shape[0] // 2
    d = specs[0].d if specs else start.shape[1]
    S = 2 * Q
    x0 = np.zeros((S, d), dtype=np.int64) if start is None else np.asarray(start, np.int64)
    states = list(range(S)) if states is None else list(states)
    tables = [[spec.outcome_arrays(s) for s in range(S)] for spec in specs]
    cdfs = [[np.cumsum(p) for (_, _, p) in tab] for tab in tables]
    result = {}
    for s in states:
        acc_counts: dict[tuple[int, ...], int] = defaultdict(int)
        for b, lo in enumerate(range(0, trials, TRIAL_BLOCK)):
            size = min(TRIAL_BLOCK, trials - lo)
            rng = _block_rng(seed, b * S + s)
            u = rng.random((len(specs), size))
            cur = np.full(size, s, dtype=np.int64)
            pos = np.zeros((size, d), dtype=np.int64)
            for lvl in range(len(specs) - 1, -1, -1):
                row_u = u[lvl]
                nxt = np.empty_like(cur)
                for st in np.unique(cur):
                    idx = np.nonzero(cur == st)[0]
                    t, w, _ = tables[lvl][st]
                    cdf = cdfs[lvl][st]
                    pick = np.searchsorted(cdf, row_u[idx] * cdf[-1], side="right")
                    pick = np.minimum(pick, len(cdf) - 1)
                    nxt[idx] = t[pick]
                    pos[idx] += w[pick, :d]
                cur = nxt
            pos += x0[cur]
            vals, cnt = np.unique(pos, axis=0, return_counts=True)
            for v, c in zip(map(tuple, vals.tolist()), cnt.tolist()):
                acc_counts[v] += c
        result[s] = EmpiricalDist(s, trials, seed, dict(acc_counts))
    return result


def tv_distance(p: Mapping[Any, float], q: Mapping[Any, float], tol: float = 1e-9) -> float:
    """Total variation ``(1/2) sum |p - q|`` over the union of supports."""
    for name, dist in (("p", p), ("q", q)):
        if abs(math.fsum(float(v) for v in dist.values()) - 1.0) > tol:
            raise InvalidInput(f"{name} is not normalized")
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(float(p.get(k, 0)) - float(q.get(k, 0))) for k in keys)


def rat_lemma_start(ren: Renormalization) -> np.ndarray:
    """``x0 = (Phi(eps))_s``, the level-0 block values, as an ``(S, d)`` array."""
    Phi = ren.inst.cocycle.Phi
    return np.concatenate([Phi, Phi]).astype(np.int64)


# -- limiting periodic RATs ------------------------------------------------------


@dataclass(frozen=True)
class LimitModel:
    """Limit RATs over one extended period and the centered composition.

    Attributes
    ----------
    G : tuple of RatSpec
        Affine families ``G_1..G_L`` with exact probabilities in ``Q(lambda)``.
    H : RatSpec
        ``G_L o ... o G_1`` in binary64, affine in the grid index ``n``.
    b : tuple of dict
        Centered displacement law ``b[s] = {(t, b_vec): p}`` with
        ``b = xi_t - xi_s + base - mu_s``.
    """

    G: tuple[RatSpec, ...]
    H: RatSpec
    b: tuple[dict, ...]
    lam: Any
    c: tuple[tuple[Any, Any], ...]
    mu: np.ndarray
    xi: np.ndarray
    centering_error: float
    slope_residual: float


def _affine_cumulative(c: np.ndarray, slope: np.ndarray, e: int, n: int):
    Q, d = c.shape[1:]
    base = np.zeros((n, Q, d), dtype=object)
    sl = np.zeros((n, Q, d), dtype=object)
    shift = np.arange(Q)
    for K in range(1, n):
        idx = (shift + (K - 1) * e) % Q
        base[K] = base[K - 1] + c[0, idx]
        sl[K] = sl[K - 1] + slope[0, idx]
    return base, sl


def perron_lengths(C: np.ndarray):
    """Perron root ``lambda`` and eigenvector of the 2x2 length product, exact."""
    from .surd import Surd

    J = int(C[0, 0] + C[1, 1])
    lam = Surd(J, 1, 2, J * J - 4)
    v = (Surd(int(C[0, 1]), 0, 1, lam.D), lam - int(C[0, 0]))
    return lam, v


def rat_limit_build(
    ext, mu: np.ndarray, xi: np.ndarray, tol: float = 1e-8
) -> LimitModel:
    """Build ``G_r`` (``r = 1..L``) and the centered period RAT ``H``.

    Parameters
    ----------
    ext : ExtendedPeriod
        Output of :func:`renorm_skew.spectral.period_extend`.
    mu, xi : ndarray, shape (2, Q, d)
        Drift data on the grid ``K + L n`` (from ``drift_extract``).
    """
    from .errors import CenteringFailed
    from .spectral import length_matrix

    per = ext.period
    Q, L = per.Q, per.L
    d = ext.c[0].shape[2]
    S = 2 * Q
    lam, v = perron_lengths(per.C)
    cs = [v]
    for n in per.ns:
        A = length_matrix(n)
        prev = cs[-1]
        cs.append((int(A[0, 0]) * prev[0] + prev[1], int(A[1, 0]) * prev[0] + prev[1]))
    if not (cs[-1][0] == lam * cs[0][0] and cs[-1][1] == lam * cs[0][1]):
        raise CenteringFailed("c_L != lambda c_0")
    G = []
    for r in range(1, L + 1):
        n, e = per.ns[r - 1], per.eps0[r - 1]
        base, sl = _affine_cumulative(ext.c[r - 1], ext.slope[r - 1], e, n)
        c_prev, c_cur = cs[r - 1], cs[r]
        law = []
        for i in (0, 1):
            m = n - 1 - i
            for eps in range(Q):
                row: dict = defaultdict(int)
                p0 = c_prev[0] / c_cur[i]
                for j in range(m):
                    key = ((eps + j * e) % Q, tuple(int(x) for x in base[j, eps]) + tuple(int(x) for x in sl[j, eps]))
                    row[key] = row[key] + p0
                key = (Q + (eps + m * e) % Q, tuple(int(x) for x in base[m, eps]) + tuple(int(x) for x in sl[m, eps]))
                row[key] = row[key] + c_prev[1] / c_cur[i]
                law.append(dict(row))
        G.append(RatSpec(Q, d, tuple(law), affine=True))
    H = G[0].to_float()
    for g in G[1:]:
        H = compose(g.to_float(), H)
    mu_f = np.array(mu, dtype=object).reshape(S, d).astype(float)
    xi_f = np.array(xi, dtype=object).reshape(S, d).astype(float)
    b, worst_mean, worst_slope = [], 0.0, 0.0
    for s in range(S):
        row: dict = defaultdict(float)
        mean = np.zeros(d)
        for (t, w), p in H.law[s].items():
            base_v = np.array(w[:d], dtype=float)
            slope_v = np.array(w[d:], dtype=float)
            worst_slope = max(worst_slope, float(np.abs(mu_f[t] - mu_f[s] + slope_v).max()))
            bvec = xi_f[t] - xi_f[s] + base_v - mu_f[s]
            row[(t, tuple(bvec.tolist()))] += p
            mean += p * bvec
        worst_mean = max(worst_mean, float(np.abs(mean).max()))
        b.append(dict(row))
    model = LimitModel(
        tuple(G), H, tuple(b), lam, tuple(cs), mu_f, xi_f, worst_mean, worst_slope
    )
    if worst_mean > tol:
        raise CenteringFailed(f"|E b(H)| = {worst_mean:.3g} exceeds {tol:g}")
    return model
