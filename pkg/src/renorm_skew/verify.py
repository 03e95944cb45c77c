"""Acceptance suite: one check function per item, each returning a :class:`CheckResult`."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .analysis import REFERENCE, Analysis
from .blocks import (
    birkhoff_direct,
    birkhoff_floor_sum,
    kappa_sequence,
    orbit_array,
    psi_sequence,
    symbol_blocks,
)
from .cf import disc_subsequence_check
from .errors import DKViolation
from .temporal import DistTower
from .rat import arw_sample, rat_lemma_start, rat_sequence, tv_distance
from .stats import (
    band_ratio,
    dk_check,
    return_ratios,
    temporal_clt_check,
    visit_count,
    visit_integral,
    visit_integrals,
    visit_lemma_row,
    visit_sup,
    wrllt_integral,
)

CLT_GRID = (10, 20, 30, 40)
BAND_RANGE = range(10, 41)
SUP_CAP = 5 * 10**5


@dataclass
class CheckResult:
    item: int
    name: str
    passed: bool
    detail: dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.item:2d} {self.name} ({self.seconds:.1f}s)"


def _timed(item: int, name: str, fn: Callable[[], tuple[bool, dict]]) -> CheckResult:
    t0 = time.perf_counter()
    ok, detail = fn()
    return CheckResult(item, name, bool(ok), detail, time.perf_counter() - t0)


class Suite:
    """Acceptance checks over a mapping of labelled analyses (default: A and B)."""

    def __init__(self, analyses: Mapping[str, Analysis] | None = None, seed: int = 20240917,
                 trials: int = 200_000, autocorr_M: int = 10**7) -> None:
        self.an = dict(analyses) if analyses is not None else {k: Analysis(f()) for k, f in REFERENCE.items()}
        self.seed = seed
        self.trials = trials
        self.autocorr_M = autocorr_M

    # 1
    def substitution(self, N: int = 10**5) -> CheckResult:
        def run():
            det = {}
            for lab, a in self.an.items():
                t0 = time.perf_counter()
                k = a.ren.first_level_with(N)
                blk = symbol_blocks(a.ren, k).b[0][:N]
                det[lab] = {"k": k, "equal": bool(np.array_equal(blk, psi_sequence(a.inst.beta, N))),
                            "seconds": time.perf_counter() - t0}
            return all(v["equal"] and v["seconds"] < 5 for v in det.values()), det
        return _timed(1, "substitution fidelity", run)

    # 2
    def parity(self, N: int = 10**5) -> CheckResult:
        def run():
            det = {}
            for lab, a in self.an.items():
                n = np.arange(1, N + 1)
                kap = kappa_sequence(a.inst.alpha, a.inst.Q, n)
                rhs = (n * a.inst.P + np.cumsum(psi_sequence(a.inst.beta, N))) % a.inst.Q
                det[lab] = bool(np.array_equal(kap % a.inst.Q, rhs))
            return all(det.values()), det
        return _timed(2, "parity identity", run)

    # 3
    def orbit(self, N: int = 10**4, samples: int = 1000, level: int = 30) -> CheckResult:
        def run():
            det = {}
            rng = np.random.default_rng(self.seed)
            for lab, a in self.an.items():
                stream = bool(np.array_equal(orbit_array(a.ren, N),
                                             birkhoff_direct(a.inst.alpha, a.inst.cocycle, N)))
                top = a.ren.ell(level)[0]
                idx = rng.integers(1, top, samples)
                bad = [int(n) for n in idx
                       if not np.array_equal(np.asarray(a.ren.birkhoff_at(int(n)), dtype=object),
                                             np.asarray(birkhoff_floor_sum(a.inst.alpha, a.inst.cocycle, int(n)), dtype=object))]
                det[lab] = {"stream_equal": stream, "random_access_bad": bad, "ell": top}
            return all(v["stream_equal"] and not v["random_access_bad"] for v in det.values()), det
        return _timed(3, "orbit engine", run)

    # 4
    def distribution(self, bound: int = 10**6) -> CheckResult:
        def run():
            det = {}
            for lab, a in self.an.items():
                k = a.ren.last_level_below(bound)
                V = a.raw_dist(k)
                vals, cnt = np.unique(orbit_array(a.ren, a.ren.ell(k)[0]), axis=0, return_counts=True)
                sup = V.support()
                ok = len(sup) == len(vals) and all(sup.get(tuple(v)) == c for v, c in zip(vals.tolist(), cnt.tolist()))
                det[lab] = {"k": k, "ell": a.ren.ell(k)[0], "equal": ok}
            return all(v["equal"] for v in det.values()), det
        return _timed(4, "distribution recursion", run)

    # 5
    def rat_lemma(self, label: str | None = None, bound: int = 10**3, tol: float = 0.02) -> CheckResult:
        label = label or next(iter(self.an))

        def run():
            a = self.an[label]
            k = a.ren.last_level_below(bound)
            emp = arw_sample(rat_sequence(a.ren, k), self.trials, self.seed,
                             start=rat_lemma_start(a.ren), states=[0])[0]
            tw = DistTower(a.ren)
            tw.advance_to(k)
            V = tw.get(0, 0)
            exact = {nu: w / V.total for nu, w in V.support().items()}
            tv = tv_distance(emp.probs(), exact)
            return tv <= tol, {"instance": label, "k": k, "trials": self.trials, "seed": self.seed, "tv": tv}
        return _timed(5, "RAT lemma Monte Carlo", run)

    # 6
    def eigenvalue(self) -> CheckResult:
        def run():
            det = {}
            for lab, a in self.an.items():
                e = a.eigen
                J = e.J
                ok = (J >= 3 and tuple(e.charpoly[:1]) == (1,) and e.max_modulus_dev <= 1e-9
                      and e.cyclotomic_ok)
                det[lab] = {"J": J, "charpoly": e.charpoly, "perp_charpoly": e.perp_charpoly,
                            "orders": e.orders, "max_modulus_dev": e.max_modulus_dev, "ok": ok}
            return all(v["ok"] for v in det.values()), det
        return _timed(6, "eigenvalue lemma", run)

    # 7
    def displacement(self) -> CheckResult:
        def run():
            det = {}
            for lab, a in self.an.items():
                x = a.extended
                ok = x.second_diff_max == 0 and x.n_checked >= 10 and x.positivity_power >= 1
                det[lab] = {"M": x.M, "L": x.L, "second_diff_max": x.second_diff_max,
                            "n_checked": x.n_checked, "positivity_power": x.positivity_power, "ok": ok}
            return all(v["ok"] for v in det.values()), det
        return _timed(7, "displacement lemma", run)

    # 8
    def denjoy_koksma(self, bound: int = 10**5) -> CheckResult:
        def run():
            det = {}
            ok = True
            for lab, a in self.an.items():
                try:
                    rows = dk_check(a.ren, bound=bound)
                    det[lab] = {"q": [r.q for r in rows], "sup": [r.sup for r in rows],
                                "variation": a.inst.cocycle.variation}
                except DKViolation as exc:
                    ok = False
                    det[lab] = {"error": str(exc)}
            return ok, det
        return _timed(8, "Denjoy-Koksma", run)

    # 9
    def spectral(self) -> CheckResult:
        def run():
            det = {}
            for lab, a in self.an.items():
                D, ad = a.diffusion, a.adaptedness
                ok = (D.gradient_norm <= 1e-6 and D.rel_err <= 1e-3 and D.min_eig > 0
                      and ad.eps_hat > 0)
                det[lab] = {"gradient_norm": D.gradient_norm, "gradient_fd_norm": D.gradient_fd_norm,
                            "hessian_rel_err": D.rel_err, "D_taylor": D.D_taylor, "D_hessian": D.D_hessian,
                            "min_eig": D.min_eig, "eps_hat": ad.eps_hat, "c_hat": ad.c_hat, "ok": ok}
            return all(v["ok"] for v in det.values()), det
        return _timed(9, "spectral (gradient, diffusion, adaptedness)", run)

    # 10
    def clt(self, grid: tuple[int, ...] = CLT_GRID, tol: float = 0.05) -> CheckResult:
        def run():
            det = {}
            for lab, a in self.an.items():
                t0 = time.perf_counter()
                reps = [temporal_clt_check(a.grid_dist(n), a.mu0, n, a.xi0) for n in grid]
                ks = np.array([r.ks_coord for r in reps])
                mono = bool(np.all(np.diff(ks, axis=0) <= 0))
                sec = time.perf_counter() - t0
                det[lab] = {"n": list(grid), "levels": [a.grid_level(n) for n in grid],
                            "ks": ks.tolist(), "ks_midpoint": [r.ks_coord_midpoint for r in reps],
                            "ks_box": [r.ks_box for r in reps], "monotone": mono,
                            "final_ok": bool(np.all(ks[-1] <= tol)), "seconds": sec}
            return all(v["monotone"] and v["final_ok"] and v["seconds"] <= 120 for v in det.values()), det
        return _timed(10, "temporal CLT", run)

    # 11
    def wrllt(self, ns=BAND_RANGE, band: float = 10.0) -> CheckResult:
        def run():
            det = {}
            for lab, a in self.an.items():
                p2, p1, p1err = [], [], []
                for n in ns:
                    V = a.grid_dist(n)
                    s = n ** (a.inst.d / 2)
                    p2.append(s * wrllt_integral(V, 2).value)
                    w1 = wrllt_integral(V, 1)
                    p1.append(s * w1.value)
                    p1err.append(w1.error)
                r2, r1 = band_ratio(p2), band_ratio(p1)
                det[lab] = {"n": list(ns), "scaled_p2": p2, "scaled_p1": p1, "p1_error_max": max(p1err),
                            "band_p2": r2, "band_p1": r1}
            return all(v["band_p2"] <= band and v["band_p1"] <= band for v in det.values()), det
        return _timed(11, "WRLLT bands", run)

    # 12
    def rational_ergodicity(self, ks=BAND_RANGE, band: float = 10.0, stream_bound: int = 10**6) -> CheckResult:
        def run():
            det = {}
            for lab, a in self.an.items():
                ren, d = a.ren, a.inst.d
                k_stream = ren.last_level_below(stream_bound)
                Ns = [ren.ell(k)[0] for k in range(1, k_stream + 1)]
                ints = visit_integrals(ren, Ns, M=self.autocorr_M)
                # exact integrals where the cell decomposition is small
                for N in Ns:
                    if N <= 10**3:
                        ints[N] = float(visit_integral(ren, N, M=10, exact_cap=10**3).exact)
                lemma, sups = [], {}
                psi = {}
                for k in range(1, max(ks) + 1):
                    fam = a.raw_family(k)
                    l0, l1 = ren.ell(k)
                    psi[k] = visit_count(ren, l0, fam[0])
                    if k > k_stream:
                        continue
                    if l1 <= SUP_CAP and l1 not in sups:
                        sups[l1] = visit_sup(ren, l1)
                    row = visit_lemma_row(k, (l0, l1), fam, ints[l0], sups.get(l1),
                                          "exact" if l0 <= 10**3 else "autocorrelation")
                    lemma.append(row)
                rows = return_ratios(list(ks), [ren.ell(k)[0] for k in ks], [psi[k] for k in ks], d, ints)
                r0 = [r.ratio0 for r in rows]
                r1 = [r.ratio1 for r in rows if r.ratio1 is not None]
                ok = (band_ratio(r0) <= band and (not r1 or band_ratio(r0 + r1) <= band)
                      and all(x.ok_a and x.ok_b for x in lemma))
                det[lab] = {"k": list(ks), "ratio0": r0, "ratio1": [r.ratio1 for r in rows],
                            "band_ratio0": band_ratio(r0),
                            "band_combined": band_ratio(r0 + r1) if r1 else None,
                            "visit_lemma": [{"k": x.k, "lhs_a": x.lhs_a, "rhs_a": x.rhs_a,
                                             "lhs_b": x.lhs_b, "rhs_b": x.rhs_b, "method": x.integral_method}
                                            for x in lemma],
                            "visit_lemma_ok": all(x.ok_a and x.ok_b for x in lemma), "ok": ok}
            return all(v["ok"] for v in det.values()), det
        return _timed(12, "rational ergodicity proxies", run)

    # separation of the rotation from the cell boundaries
    def disc_subsequence(self, m_max: int = 20) -> CheckResult:
        def run():
            det = {}
            for lab, a in self.an.items():
                rep = disc_subsequence_check(a.inst.alpha, a.inst.Q, m_max)
                det[lab] = {"all_positive": rep.all_positive,
                            "theta_hat": float(rep.theta_hat) if rep.theta_hat is not None else None}
            return all(v["all_positive"] for v in det.values()), det
        return _timed(13, "disc subsequence", run)

    def checks(self) -> list[Callable[[], CheckResult]]:
        return [self.substitution, self.parity, self.orbit, self.distribution, self.rat_lemma,
                self.eigenvalue, self.displacement, self.denjoy_koksma, self.spectral, self.clt,
                self.wrllt, self.rational_ergodicity, self.disc_subsequence]

    def run(self, log: Callable[[str], None] | None = None) -> list[CheckResult]:
        out = []
        for fn in self.checks():
            res = fn()
            if log:
                log(res.line())
            out.append(res)
        return out


def summary(results: list[CheckResult]) -> dict[str, Any]:
    return {
        "passed": all(r.passed for r in results),
        "items": [{"item": r.item, "name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
        "metadata": {"seconds": {str(r.item): round(r.seconds, 3) for r in results}},
    }


def ratio_table(result: CheckResult, clt: CheckResult | None, wr: CheckResult | None, label: str) -> list[list[Any]]:
    """Rows ``k, ratio0, ratio1, ks, wrllt_p1, wrllt_p2`` for one instance.

    The ratio columns are at raw level ``k``; the KS and WRLLT columns are at
    extended-period grid index ``n = k`` (blank where not computed).
    """
    det = result.detail[label]
    ks_map, p1_map, p2_map = {}, {}, {}
    if clt is not None:
        for n, v in zip(clt.detail[label]["n"], clt.detail[label]["ks"]):
            ks_map[n] = max(v)
    if wr is not None:
        w = wr.detail[label]
        p1_map = dict(zip(w["n"], w["scaled_p1"]))
        p2_map = dict(zip(w["n"], w["scaled_p2"]))
    return [[k, r0, r1, ks_map.get(k), p1_map.get(k), p2_map.get(k)]
            for k, r0, r1 in zip(det["k"], det["ratio0"], det["ratio1"])]
