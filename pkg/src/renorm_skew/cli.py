"""Command-line front end.

Exit codes: 0 ok, 1 check failure, 2 usage, 3 config or input, 4 cap exceeded,
5 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _limit_threads() -> None:
    # must run before numpy loads its BLAS
    val = os.environ.get("RENORM_SKEW_THREADS")
    if val and val.isdigit() and int(val) > 0:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, val)


_limit_threads()

from . import io  # noqa: E402
from .analysis import Analysis, golden  # noqa: E402
from .blocks import orbit_array, symbol_blocks  # noqa: E402
from .cf import convergents, disc_subsequence_check, modified_cf, regular_cf  # noqa: E402
from .errors import CheckFailed, RenormError, TooLarge  # noqa: E402
from .rat import arw_sample, rat_lemma_start, rat_sequence, tv_distance  # noqa: E402
from .temporal import dist_moments  # noqa: E402
from .verify import Suite, ratio_table, summary  # noqa: E402

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_CONFIG, EXIT_CAP, EXIT_INTERNAL = range(6)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value instance file (default: golden instance)")
    common.add_argument("--k", type=int, help="level (or orbit length for 'orbit')")
    common.add_argument("--trials", type=int, help="Monte Carlo trials")
    common.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--format", choices=("csv", "json"), default="json", help="report format")
    common.add_argument("--dump", action="store_true", help="write data files to the output directory")
    p = argparse.ArgumentParser(prog="renorm-skew", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    for name, hlp in [
        ("cf", "continued fractions, convergents and disc report"),
        ("blocks", "level table (lengths, parities, displacements)"),
        ("orbit", "Birkhoff sums along the orbit of 0"),
        ("dist", "exact temporal distributions at level k"),
        ("rat", "RAT composition sampled against the exact law"),
        ("spectral", "eigenvalue, displacement and diffusion report"),
        ("verify", "full acceptance suite"),
    ]:
        sub.add_parser(name, parents=[common], help=hlp)
    return p


def _config(args) -> io.InstanceConfig:
    if args.config is not None:
        cfg = io.parse_config(args.config)
    else:
        inst = golden()
        cfg = io.InstanceConfig(inst.alpha, inst.Q, inst.d, inst.cocycle.Phi)
    return cfg


def _emit(args, cfg, name: str, payload: Any, rows: tuple[Sequence[str], list] | None = None) -> None:
    out = Path(args.out or cfg.out)
    if args.format == "csv" and rows is not None:
        header, body = rows
        if args.dump:
            io.write_csv(out / f"{name}.csv", header, body)
        print(",".join(header))
        for r in body:
            print(",".join("" if v is None else str(v) for v in r))
    else:
        if args.dump:
            io.write_json(out / f"{name}.json", payload)
        print(json.dumps(io.to_jsonable(payload), indent=2, sort_keys=True))


def cmd_cf(args, cfg) -> int:
    inst = cfg.instance()
    rcf = regular_cf(inst.alpha)
    mcf = modified_cf(inst.beta)
    m_max = args.k or 10
    conv = convergents(rcf, m_max, inst.alpha)
    disc = disc_subsequence_check(inst.alpha, inst.Q, m_max)
    payload = {
        "alpha": inst.alpha, "regular": str(rcf), "beta": inst.beta, "modified": str(mcf),
        "convergents": [list(r) for r in conv.rows],
        "disc_products": list(disc.products), "disc_flagged": list(disc.flagged),
        "theta_hat": disc.theta_hat, "disc_all_positive": disc.all_positive,
    }
    rows = (("m", "p", "q", "q_disc"), [[m, p, q, float(v)] for (m, p, q), v in zip(conv.rows, disc.products)])
    _emit(args, cfg, "cf", payload, rows)
    return EXIT_OK


def cmd_blocks(args, cfg) -> int:
    inst = cfg.instance()
    an = Analysis(inst)
    k_max = args.k if args.k is not None else 10
    table = []
    for k in range(k_max + 1):
        st = an.ren.level(k)
        table.append({"k": k, "n": an.ren.n(k) if k else None, "ell": st.ell, "eps": st.eps,
                      "sigma": st.sigma})
    rows = (("k", "n", "ell0", "ell1", "eps0", "eps1"),
            [[t["k"], t["n"], t["ell"][0], t["ell"][1], t["eps"][0], t["eps"][1]] for t in table])
    if args.dump:
        sb = symbol_blocks(an.ren, k_max, cap=cfg.caps["cap_explicit"])
        out = Path(args.out or cfg.out)
        for i in (0, 1):
            io.write_xy(out / f"block_k{k_max}_{i}.dat", range(1, len(sb.b[i]) + 1), sb.b[i].tolist(),
                        f"symbol block b_{k_max}({i})")
    _emit(args, cfg, "blocks", {"levels": table}, rows)
    return EXIT_OK


def cmd_orbit(args, cfg) -> int:
    inst = cfg.instance()
    an = Analysis(inst)
    N = args.k if args.k is not None else 100
    if N > cfg.caps["cap_stream"]:
        raise TooLarge(f"orbit length {N} exceeds cap_stream")
    arr = orbit_array(an.ren, N)
    header = ["n"] + [f"phi_{a + 1}" for a in range(inst.d)]
    body = [[n + 1, *arr[n].tolist()] for n in range(N)]
    if args.dump:
        out = Path(args.out or cfg.out)
        for a in range(inst.d):
            io.write_xy(out / f"orbit_{a + 1}.dat", range(1, N + 1), arr[:, a].tolist(),
                        f"Birkhoff sum coordinate {a + 1} along the orbit of 0")
    _emit(args, cfg, "orbit", {"N": N, "phi": arr}, (header, body))
    return EXIT_OK


def cmd_dist(args, cfg) -> int:
    inst = cfg.instance()
    an = Analysis(inst)
    k = args.k if args.k is not None else 10
    fam = an.raw_family(k)
    out = Path(args.out or cfg.out)
    summary_rows = []
    for V in fam:
        m = dist_moments(V)
        summary_rows.append({"i": V.i, "eps": V.eps, "ell": V.total, "mean": m.mean, "cov": m.covariance,
                             "support_box": list(V.weights.shape)})
        if args.dump:
            io.dist_csv(out / f"dist_k{k}_i{V.i}_e{V.eps}.csv", V)
    rows = (("i", "eps", "ell", "mean"), [[r["i"], r["eps"], r["ell"], " ".join(str(x) for x in r["mean"])]
                                           for r in summary_rows])
    _emit(args, cfg, f"dist_k{k}", {"k": k, "blocks": summary_rows}, rows)
    return EXIT_OK


def cmd_rat(args, cfg) -> int:
    inst = cfg.instance()
    an = Analysis(inst)
    k = args.k if args.k is not None else an.ren.last_level_below(10**3)
    trials = args.trials if args.trials is not None else 200_000
    if trials > cfg.caps["cap_trials"]:
        raise TooLarge("trials exceed cap_trials")
    seed = args.seed if args.seed is not None else cfg.seed
    specs = rat_sequence(an.ren, k)
    emp = arw_sample(specs, trials, seed, start=rat_lemma_start(an.ren))
    fam = an.raw_family(k)
    tv = []
    for s, V in enumerate(fam):
        exact = {nu: w / V.total for nu, w in V.support().items()}
        tv.append(tv_distance(emp[s].probs(), exact))
    if args.dump:
        out = Path(args.out or cfg.out)
        io.samples_csv(out / f"samples_k{k}.csv", inst.Q, inst.d, emp)
        io.write_json(out / f"rat_spec_k{k}.json", {"levels": [{"law": [
            {f"{t}:{','.join(map(str, w))}": p for (t, w), p in law.items()} for law in sp.law]}
            for sp in specs]})
    payload = {"k": k, "trials": trials, "seed": seed, "tv": tv}
    rows = (("state", "tv"), [[s, v] for s, v in enumerate(tv)])
    _emit(args, cfg, f"rat_k{k}", payload, rows)
    return EXIT_OK


def cmd_spectral(args, cfg) -> int:
    an = Analysis(cfg.instance())
    e, x, D, ad = an.eigen, an.extended, an.diffusion, an.adaptedness
    payload = {
        "K": x.K, "L": x.L, "M": x.M, "J": e.J, "charpoly": e.charpoly,
        "perp_charpoly": e.perp_charpoly, "cyclotomic_orders": e.orders,
        "max_modulus_dev": e.max_modulus_dev, "B": an.period.B.astype(object),
        "second_diff_max": x.second_diff_max, "positivity_power": x.positivity_power,
        "mu": an.drift.mu, "xi": an.drift.xi, "centering_error": an.limit.centering_error,
        "gradient_norm": D.gradient_norm, "hessian_closed": D.hessian_closed,
        "hessian_fd": D.hessian_fd, "hessian_rel_err": D.rel_err,
        "D_taylor": D.D_taylor, "D_hessian": D.D_hessian, "cov_per_period": D.cov_per_period,
        "eps_hat": ad.eps_hat, "c_hat": ad.c_hat, "r_hat": ad.r_hat,
    }
    _emit(args, cfg, "spectral", payload)
    return EXIT_OK


def cmd_verify(args, cfg) -> int:
    an = {"config": Analysis(cfg.instance())} if args.config else None
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.trials is not None:
        kw["trials"] = args.trials
    suite = Suite(an, **kw)
    results = suite.run(lambda line: print(line, file=sys.stderr))
    out = Path(args.out or cfg.out)
    io.write_json(out / "verify.json", summary(results))
    by_item = {r.item: r for r in results}
    for label in suite.an:
        rows = ratio_table(by_item[12], by_item.get(10), by_item.get(11), label)
        io.ratio_csv(out / f"ratios_{label}.csv", rows)
        io.write_xy(out / f"ratio0_{label}.dat", [r[0] for r in rows], [r[1] for r in rows],
                    "k vs k^(d/2) Psi(0)/l_k")
        w = by_item[11].detail[label]
        io.write_xy(out / f"wrllt_p2_{label}.dat", w["n"], w["scaled_p2"], "n vs n^(d/2) int |Xi|^2")
        c = by_item[10].detail[label]
        io.write_xy(out / f"clt_ks_{label}.dat", c["n"], [max(v) for v in c["ks"]], "n vs per-coordinate KS")
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed; report in {out / 'verify.json'}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


COMMANDS = {"cf": cmd_cf, "blocks": cmd_blocks, "orbit": cmd_orbit, "dist": cmd_dist,
            "rat": cmd_rat, "spectral": cmd_spectral, "verify": cmd_verify}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except RenormError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
