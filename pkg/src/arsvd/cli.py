"""Command-line interface: ``arsvd {svd,pca,sim,assoc,bench}``.

Every command writes its outputs into ``--out`` together with a
``manifest.json`` that records the arguments, seed, library versions,
per-stage wall time and, on failure, the error.  Exit codes: 0 success,
2 usage, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import platform
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .core import ConvergenceError, RngSeed
from .io import (
    DataError,
    read_genotypes,
    read_groups,
    read_matrix,
    read_vector,
    write_genotypes,
    write_json,
    write_matrix,
    write_vector,
)

logger = logging.getLogger("arsvd")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


class Manifest:
    def __init__(self, command, args):
        import scipy

        self.data = {
            "command": command,
            "argv": sys.argv[1:],
            "args": {k: v for k, v in vars(args).items() if k != "func"},
            "seed": getattr(args, "seed", None),
            "versions": {
                "arsvd": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "timings": {},
            "error": None,
        }

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.data["timings"][name] = time.perf_counter() - t0

    def __setitem__(self, key, value):
        self.data[key] = value

    def write(self, out_dir):
        write_json(Path(out_dir) / "manifest.json", self.data)


def _config(args, shape=None):
    from .factor import ArsvdConfig

    return ArsvdConfig(d_max=args.d_max, t_max=args.t_max, delta=args.delta, seed=RngSeed(args.seed))


def _check_rank_flags(args):
    if args.rank is not None and args.adaptive:
        raise UsageError("--rank and --adaptive are mutually exclusive")
    if args.t is not None and args.rank is None:
        raise UsageError("--t requires --rank (adaptive mode chooses t itself)")


def cmd_svd(args, manifest):
    from .factor import arsvd_adaptive, arsvd_fixed

    _check_rank_flags(args)
    with manifest.stage("read"):
        x = read_matrix(args.input)
    manifest["input_shape"] = list(x.shape)
    cfg = _config(args)
    report = None
    with manifest.stage("factorize"):
        if args.rank is None:
            fact, report = arsvd_adaptive(x, cfg)
        else:
            t = args.t or cfg.t_max
            fact = arsvd_fixed(x, args.rank, t, cfg.replace(t_max=max(t, cfg.t_max)))
    out = Path(args.out)
    with manifest.stage("write"):
        write_matrix(out / "U.tsv", fact.u)
        write_vector(out / "S.tsv", fact.s)
        write_matrix(out / "V.tsv", fact.v)
        summary = {"rank": fact.rank, "iterations": fact.iterations, "adaptive": report is not None}
        if report is not None:
            summary.update(report.summary())
        write_json(out / "report.json", summary)
    manifest["selection"] = summary


def cmd_pca(args, manifest):
    from .geneig import pca

    _check_rank_flags(args)
    with manifest.stage("read"):
        x = read_matrix(args.input)
    manifest["input_shape"] = list(x.shape)
    with manifest.stage("pca"):
        res = pca(x, _config(args), rank=args.rank, t=args.t)
    out = Path(args.out)
    with manifest.stage("write"):
        write_matrix(out / "components.tsv", res.components)
        write_matrix(out / "scores.tsv", res.scores)
        write_vector(out / "variance.tsv", res.explained_variance)
        write_vector(out / "mean.tsv", res.mean)
        summary = {"rank": int(res.components.shape[1]), "flags": res.flags, "adaptive": res.report is not None}
        if res.report is not None:
            summary.update(res.report.summary())
        write_json(out / "report.json", summary)
    manifest["selection"] = summary


def cmd_sim(args, manifest):
    from .simgen import AdmixSimConfig, LowRankSimConfig, sim_admixture, sim_lowrank

    out = Path(args.out)
    if args.kind == "lowrank":
        cfg = LowRankSimConfig(args.n, args.p, args.rank, args.kappa, RngSeed(args.seed), args.noise_var)
        with manifest.stage("simulate"):
            x, truth = sim_lowrank(cfg)
        with manifest.stage("write"):
            write_matrix(out / "X.tsv", x)
            write_matrix(out / "U_true.tsv", truth.u)
            write_vector(out / "S_true.tsv", truth.s)
            write_matrix(out / "V_true.tsv", truth.v)
        manifest["truth"] = {"noise_top": truth.noise_top, "s": truth.s}
    else:
        cfg = AdmixSimConfig(args.n, args.p, args.pops, args.alpha, RngSeed(args.seed), args.phenotype_pop)
        with manifest.stage("simulate"):
            geno, y, truth = sim_admixture(cfg)
        ids = [f"v{j}" for j in range(args.p)]
        with manifest.stage("write"):
            write_matrix(out / "X.tsv", geno)
            write_genotypes(out / "genotypes.tsv", geno, ids)
            write_vector(out / "phenotype.tsv", y)
            write_matrix(out / "theta.tsv", truth.theta)
            write_matrix(out / "phi.tsv", truth.phi)
    manifest["shape"] = [args.n, args.p]


def _pvalue_hist(p, bins=20):
    counts, edges = np.histogram(p, bins=bins, range=(0.0, 1.0))
    return np.column_stack([edges[:-1], edges[1:], counts])


def _write_assoc(path, res):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("variant_id\tbeta\tse\tstat\tp\n")
        for i, vid in enumerate(res.variant_ids):
            fh.write(f"{vid}\t{res.beta[i]:.17g}\t{res.se[i]:.17g}\t{res.stat[i]:.17g}\t{res.p[i]:.17g}\n")


def cmd_assoc(args, manifest):
    from .lmm import AssocResult, assoc_scan, fit_null, grm_factor, naive_scan, standardize, with_intercept

    _check_rank_flags(args)
    with manifest.stage("read"):
        raw, ids = read_genotypes(args.genotypes)
        y = read_vector(args.phenotype)
        cov = read_matrix(args.covariates) if args.covariates else None
        groups = read_groups(args.groups) if args.groups else None
    n = raw.shape[0]
    if y.size != n:
        raise DataError(f"{args.genotypes} has {n} individuals but {args.phenotype} has {y.size} values")
    if cov is not None and cov.shape[0] != n:
        raise DataError(f"{args.genotypes} has {n} individuals but {args.covariates} has {cov.shape[0]} rows")
    if args.exclude_group and groups is None:
        raise UsageError("--exclude-group needs --groups")
    w = with_intercept(cov, n)
    g = standardize(raw, ids)
    manifest["dropped_monomorphic"] = [ids[j] for j in g.dropped]
    cfg = _config(args)
    kept_ids = [ids[j] for j in g.kept]

    if args.naive:
        with manifest.stage("scan"):
            res = naive_scan(g, y, w)
        fits = {}
    else:
        if args.exclude_group:
            names = sorted(set(groups.values())) if "all" in args.exclude_group else args.exclude_group
            unknown = [nm for nm in names if nm not in set(groups.values())]
            if unknown:
                raise DataError(f"{args.groups}: no variants in group(s) {unknown}")
            plan = []
            for nm in names:
                cols = np.array([j for j, vid in enumerate(kept_ids) if groups.get(vid) == nm], dtype=int)
                plan.append((nm, cols, cols))
        else:
            plan = [(None, None, np.arange(len(kept_ids)))]
        parts, fits = [], {}
        for name, excl, cols in plan:
            with manifest.stage(f"grm[{name or 'all'}]"):
                k = grm_factor(g, cfg, exclude=excl, rank=args.rank, t=args.t)
            with manifest.stage(f"fit_null[{name or 'all'}]"):
                vc = fit_null(y, w, k, reml=args.reml)
            with manifest.stage(f"scan[{name or 'all'}]"):
                parts.append(assoc_scan(g, y, w, vc, k, columns=cols))
            fits[name or "all"] = {
                "d_star": k.d_star,
                "t_star": k.t_star,
                "n_variants_grm": k.n_variants,
                "sigma_g2": vc.sigma_g2,
                "sigma_e2": vc.sigma_e2,
                "heritability": vc.heritability,
                "delta": vc.delta,
                "loglik": vc.loglik,
                "method": vc.method,
                "flags": vc.flags,
                "selection": k.report.summary() if k.report is not None else None,
            }
        res = AssocResult(
            sum((r.variant_ids for r in parts), []),
            np.concatenate([r.beta for r in parts]),
            np.concatenate([r.se for r in parts]),
            np.concatenate([r.stat for r in parts]),
            np.concatenate([r.p for r in parts]),
            np.concatenate([r.flags for r in parts]),
        )
    out = Path(args.out)
    with manifest.stage("write"):
        _write_assoc(out / "assoc.tsv", res)
        write_matrix(out / "pvalue_hist.tsv", _pvalue_hist(res.p), header=["lo", "hi", "count"])
    manifest["fits"] = fits
    manifest["n_tested"] = len(res)
    manifest["fpr_0.05"] = float(np.mean(res.p < 0.05)) if len(res) else None
    manifest["mode"] = "naive" if args.naive else "lmm"


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_bench(args, manifest):
    from .bench import MODES, run_bench, slopes

    modes = [m.strip() for m in args.mode.split(",")]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise UsageError(f"unknown mode(s) {bad}; choose from {MODES}")
    p_list = args.p_list
    if args.n_list:
        n_list = args.n_list if len(args.n_list) > 1 else args.n_list * len(p_list)
        if len(n_list) != len(p_list):
            raise UsageError("--n-list must have one entry or as many as --p-list")
    else:
        n_list = [max(1, int(round(p * args.n_ratio))) for p in p_list]
    sizes = list(zip(n_list, p_list))
    with manifest.stage("bench"):
        rows = run_bench(sizes, modes, args.rank, args.t, args.budget_gflops * 1e9, args.repeats, args.seed)
    out = Path(args.out)
    with open(out / "timings.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "n", "p", "seconds", "skipped"])
        for r in rows:
            writer.writerow([r["mode"], r["n"], r["p"], "" if r["skipped"] else f"{r['seconds']:.6g}", int(r["skipped"])])
    summary = {"slope_p": slopes(rows, "p"), "slope_n": slopes(rows, "n"), "sizes": sizes}
    manifest["summary"] = summary
    for mode, s in summary["slope_p"].items():
        print(f"{mode}: log-log slope in p = {s if s is None else round(s, 3)}")


def _add_factor_flags(sp):
    sp.add_argument("--d-max", type=int, default=20, help="rank upper bound")
    sp.add_argument("--t-max", type=int, default=10, help="maximum power iterations")
    sp.add_argument("--delta", type=int, default=10, help="oversampling")
    sp.add_argument("--rank", type=int, default=None, help="fixed rank (disables adaptive selection)")
    sp.add_argument("--t", type=int, default=None, help="power iterations with --rank (default t-max)")
    sp.add_argument("--adaptive", action="store_true", help="choose rank and iterations from the data (default)")


def build_parser():
    parser = argparse.ArgumentParser(prog="arsvd", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS threads (env ARSVD_THREADS)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("svd", help="randomized SVD of a TSV matrix")
    sp.add_argument("input")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    _add_factor_flags(sp)
    sp.set_defaults(func=cmd_svd)

    sp = sub.add_parser("pca", help="principal components of a TSV matrix")
    sp.add_argument("input")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    _add_factor_flags(sp)
    sp.set_defaults(func=cmd_pca)

    sp = sub.add_parser("sim", help="simulate data")
    simsub = sp.add_subparsers(dest="kind", required=True)
    lr = simsub.add_parser("lowrank", help="low-rank signal plus Gaussian noise")
    lr.add_argument("--n", type=int, required=True)
    lr.add_argument("--p", type=int, required=True)
    lr.add_argument("--rank", type=int, required=True)
    lr.add_argument("--kappa", type=float, default=1.0)
    lr.add_argument("--noise-var", type=float, default=None, help="noise variance (default 1/n)")
    ad = simsub.add_parser("admixture", help="admixed genotypes and a structure-confounded phenotype")
    ad.add_argument("--n", type=int, required=True)
    ad.add_argument("--p", type=int, required=True)
    ad.add_argument("--pops", type=int, default=3)
    ad.add_argument("--alpha", type=float, default=1.0)
    ad.add_argument("--phenotype-pop", type=int, default=0)
    for s in (lr, ad):
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sim)

    sp = sub.add_parser("assoc", help="mixed-model association scan")
    sp.add_argument("genotypes")
    sp.add_argument("phenotype")
    sp.add_argument("--out", required=True)
    sp.add_argument("--covariates", default=None)
    sp.add_argument("--groups", default=None, help="variant_id<TAB>group file")
    sp.add_argument("--exclude-group", action="append", default=[], help="leave-group-out scan (repeat, or 'all')")
    sp.add_argument("--naive", action="store_true", help="ordinary least squares, no random effect")
    sp.add_argument("--reml", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    _add_factor_flags(sp)
    sp.set_defaults(func=cmd_assoc)

    sp = sub.add_parser("bench", help="time svd / eig / rsvd")
    sp.add_argument("--p-list", type=_int_list, required=True)
    sp.add_argument("--n-list", type=_int_list, default=None)
    sp.add_argument("--n-ratio", type=float, default=0.1, help="n = ratio * p when --n-list is absent")
    sp.add_argument("--rank", type=int, default=100)
    sp.add_argument("--t", type=int, default=2)
    sp.add_argument("--mode", default="svd,eig,rsvd")
    sp.add_argument("--budget-gflops", type=float, default=200.0, help="skip runs estimated above this cost")
    sp.add_argument("--repeats", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_bench)
    return parser


@contextmanager
def _thread_limit(threads):
    if threads is None:
        env = os.environ.get("ARSVD_THREADS")
        threads = int(env) if env else None
    if threads is None:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=threads):
        yield


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    command = args.command if args.command != "sim" else f"sim {args.kind}"
    manifest = Manifest(command, args)
    code = 0
    try:
        with _thread_limit(args.threads), manifest.stage("total"):
            args.func(args, manifest)
    except UsageError as exc:
        code, manifest["error"] = EXIT_USAGE, f"usage: {exc}"
    except (DataError, OSError) as exc:
        code, manifest["error"] = EXIT_DATA, f"data: {exc}"
    except (np.linalg.LinAlgError, ConvergenceError, FloatingPointError) as exc:
        code, manifest["error"] = EXIT_NUMERIC, f"numerical: {exc}"
    except ValueError as exc:
        code, manifest["error"] = EXIT_USAGE, f"usage: {exc}"
    finally:
        manifest["exit_code"] = code
        manifest.write(out)
    if code:
        print(f"arsvd {command}: {manifest.data['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
