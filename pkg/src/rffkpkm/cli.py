"""Command-line front end.

Subcommands::

    rffkpkm cluster        single-view runs over many seeds
    rffkpkm cluster-multi  multi-view runs from a JSON manifest (optionally a lambda sweep)
    rffkpkm dim-sweep      mean accuracy as a function of the feature dimension D
    rffkpkm rff-probe      kernel approximation error of the feature map per D

Every command writes its outputs under ``--out-dir`` (default: the
``RFFKPKM_OUT_DIR`` environment variable, else ``./rffkpkm_runs``).  Exit
codes: 0 success, 1 solver failure, 2 configuration or I/O error.
"""

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .exceptions import InvalidInput, ParseError, ValidationError
from .features import DEFAULT_BANDWIDTH, KernelSpec, gaussian_kernel, map_features, sample_rff
from .io import RunRecord, load_csv, load_manifest, trace_rows, write_run
from .kpkm import fit_kpkm
from .metrics import evaluate
from .mkpkm import MkpkmConfig, fit_mkpkm
from .powermeans import PowerSchedule

log = logging.getLogger("rffkpkm")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2
OUT_DIR_ENV = "RFFKPKM_OUT_DIR"
METRICS = ("acc", "nmi", "purity")


class SolverFailure(RuntimeError):
    pass


def _default_out_dir():
    return os.environ.get(OUT_DIR_ENV, "rffkpkm_runs")


def _schedule(args, cadence_default):
    cadence = args.cadence if args.cadence is not None else cadence_default
    return PowerSchedule(s0=-abs(args.s0), gamma=args.gamma, cadence=cadence)


def _seeds(args):
    if args.seeds < 1:
        raise InvalidInput(f"--seeds must be >= 1, got {args.seeds}")
    return list(range(args.seed_base, args.seed_base + args.seeds))


# job functions live at module level so a process pool can pickle them

def _single_job(X, labels, k, sigma, D, schedule, tol, max_iter, seed):
    t0 = time.perf_counter()
    try:
        res = fit_kpkm(X, k, KernelSpec(sigma), D=D, schedule=schedule, seed=seed,
                       tol=tol, max_iter=max_iter)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        raise SolverFailure(f"seed {seed}: {exc}") from exc
    elapsed = time.perf_counter() - t0
    metrics = evaluate(res.assignments, labels) if labels is not None else {}
    config = {"k": k, "D": int(res.rff.n_components), "sigma": sigma, "s0": schedule.initial(),
              "gamma": schedule.gamma, "cadence": schedule.cadence, "tol": tol,
              "max_iter": max_iter, "iterations": res.iterations_run,
              "converged": bool(res.converged), "dead_cluster_events": len(res.events)}
    return RunRecord(solver="kpkm", seed=seed, config=config, trace=trace_rows(res.objective_trace),
                     metrics=metrics, assignments=[int(a) for a in res.assignments],
                     timing={"fit_seconds": elapsed, "started": time.time()})


def _multi_job(views, labels, k, sigmas, D, config_kw, seed):
    t0 = time.perf_counter()
    config = MkpkmConfig(seed=seed, D=D, **config_kw)
    try:
        res = fit_mkpkm(views, k, [KernelSpec(s) for s in sigmas], config)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        raise SolverFailure(f"seed {seed}: {exc}") from exc
    elapsed = time.perf_counter() - t0
    metrics = evaluate(res.assignments, labels) if labels is not None else {}
    sched = config.schedule
    cfg = {"k": k, "D": [int(r.n_components) for r in res.rffs], "sigma": list(sigmas),
           "s0": sched.initial(), "gamma": sched.gamma, "cadence": sched.cadence,
           "m": config.m, "lam": config.lam, "possibilistic": config.possibilistic,
           "tol": config.tol, "max_iter": config.max_iter, "iterations": res.iterations_run,
           "converged": bool(res.converged), "dead_cluster_events": len(res.events),
           "alpha": [float(a) for a in res.alpha]}
    return RunRecord(solver="mkpkm", seed=seed, config=cfg, trace=trace_rows(res.objective_trace),
                     metrics=metrics, assignments=[int(a) for a in res.assignments],
                     timing={"fit_seconds": elapsed, "started": time.time()})


def _run_jobs(fn, arg_lists, jobs):
    if jobs <= 1 or len(arg_lists) == 1:
        return [fn(*a) for a in arg_lists]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *a) for a in arg_lists]
        return [f.result() for f in futures]


def _fmt(x):
    return "nan" if x is None or not np.isfinite(x) else f"{x:.6f}"


def _metric_stats(records):
    out = {}
    for name in METRICS:
        vals = np.array([r.metrics[name] for r in records if name in r.metrics], dtype=float)
        out[name] = (float(vals.mean()), float(vals.std())) if vals.size else (None, None)
    return out


def _write_tsv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(str(c) for c in row) + "\n")


def summarize(records, label=""):
    """One summary row: mean and std of each metric over seeds."""
    stats = _metric_stats(records)
    row = [label, len(records)]
    for name in METRICS:
        mean, std = stats[name]
        row += [_fmt(mean), _fmt(std)]
    return row


SUMMARY_HEADER = ["setting", "n_seeds"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")]


def rff_probe(d, sigma, dims, pairs=100, seed=0, repeats=1):
    """Kernel approximation error of the random feature map.

    For every D, ``repeats`` independent draws each sample ``pairs`` point
    pairs uniformly in the unit ball of R^d and a fresh frequency matrix; the
    per-draw maximum absolute and relative errors are reduced by the median
    over draws.  Returns a list of ``(D, max_abs_error, max_rel_error)``.
    """
    if d < 1 or pairs < 1 or repeats < 1:
        raise InvalidInput("d, pairs and repeats must be positive")
    spec = KernelSpec(sigma)
    rows = []
    for D in dims:
        abs_err, rel_err = [], []
        for r in range(repeats):
            rng = np.random.default_rng([seed, r])
            pts = rng.standard_normal((2 * pairs, d))
            pts /= np.linalg.norm(pts, axis=1, keepdims=True)
            pts *= rng.uniform(size=(2 * pairs, 1)) ** (1.0 / d)
            x, y = pts[:pairs], pts[pairs:]
            rff_seed = int(np.random.SeedSequence([seed, r, int(D)]).generate_state(1)[0])
            rff = sample_rff(d, int(D), spec, seed=rff_seed)
            approx = np.sum(map_features(x, rff) * map_features(y, rff), axis=1)
            exact = gaussian_kernel(x, y, spec)
            err = np.abs(approx - exact)
            abs_err.append(err.max())
            rel_err.append((err / exact).max())
        rows.append((int(D), float(np.median(abs_err)), float(np.median(rel_err))))
    return rows


def dim_sweep(X, labels, k, dims, seeds, sigma=DEFAULT_BANDWIDTH, schedule=PowerSchedule(),
              tol=1e-6, max_iter=300, jobs=1):
    """Mean and std of ACC over ``seeds`` for each D; returns (D, mean, std) rows."""
    rows = []
    for D in dims:
        recs = _run_jobs(_single_job, [(X, labels, k, sigma, int(D), schedule, tol, max_iter, s)
                                       for s in seeds], jobs)
        accs = np.array([r.metrics["acc"] for r in recs])
        rows.append((int(D), float(accs.mean()), float(accs.std())))
    return rows


def _positive_int_list(text):
    return [int(v) for v in text.replace(",", " ").split()]


def _add_solver_flags(p, cadence_help):
    p.add_argument("-k", "--clusters", type=int, required=True, help="number of clusters")
    p.add_argument("--dim", type=int, default=None,
                   help="random frequencies D per view (default: ceil(4 ln(2k)^3))")
    p.add_argument("--sigma", type=float, default=DEFAULT_BANDWIDTH,
                   help="Gaussian kernel bandwidth (default: %(default)g)")
    p.add_argument("--s0", type=float, default=15.0,
                   help="magnitude of the initial power exponent; the solver starts at s = -|s0| "
                        "(default: %(default)g)")
    p.add_argument("--gamma", type=float, default=1.04,
                   help="annealing factor, s <- gamma * s (default: %(default)g)")
    p.add_argument("--cadence", type=int, default=None, help=cadence_help)
    p.add_argument("--tol", type=float, default=1e-6, help="relative objective tolerance")
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--seeds", type=int, default=20, help="number of consecutive seeds")
    p.add_argument("--seed-base", type=int, default=0, help="first seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel seed jobs")
    p.add_argument("--out-dir", default=None,
                   help=f"output directory (default: ${OUT_DIR_ENV} or ./rffkpkm_runs)")


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV (or .csv.gz) feature file")
    p.add_argument("--header", action="store_true", help="first row is a header")
    p.add_argument("--label-column", default=None,
                   help="column with ground-truth labels (index or header name)")


def build_parser():
    parser = argparse.ArgumentParser(prog="rffkpkm", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="single-view kernel power k-means")
    _add_data_flags(p)
    _add_solver_flags(p, "iterations between exponent updates (default: 3)")

    p = sub.add_parser("cluster-multi", help="possibilistic multiple-kernel power k-means")
    p.add_argument("--manifest", required=True, help="JSON manifest listing the views")
    _add_solver_flags(p, "iterations between exponent updates (default: 2)")
    p.add_argument("--m", type=float, default=2.0, help="fuzzifier of the typicalities")
    p.add_argument("--lam", type=float, nargs="+", default=[1.0],
                   help="entropy weight(s); several values run a sweep")
    p.add_argument("--no-possibilistic", action="store_true",
                   help="freeze typicalities at 1 (ablation)")

    p = sub.add_parser("dim-sweep", help="accuracy versus feature dimension")
    _add_data_flags(p)
    _add_solver_flags(p, "iterations between exponent updates (default: 3)")
    p.add_argument("--dims", type=_positive_int_list, default=list(range(5, 101, 5)),
                   help="comma or space separated D values (default: 5..100 step 5)")

    p = sub.add_parser("rff-probe", help="kernel approximation error per D")
    p.add_argument("--d", type=int, default=2, help="input dimension")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--dims", type=_positive_int_list, default=[64, 256, 1024, 4096])
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    return parser


def _label_column(value):
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        return value


def _write_records(records, out_dir, prefix=""):
    for r in records:
        write_run(r, out_dir, stem=f"{prefix}{r.solver}_seed{r.seed}")
    log.debug("wrote %d run records to %s", len(records), out_dir)


def cmd_cluster(args):
    X, labels = load_csv(args.data, has_header=args.header,
                         label_column=_label_column(args.label_column))
    schedule = _schedule(args, 3)
    out_dir = Path(args.out_dir or _default_out_dir())
    jobs = [(X, labels, args.clusters, args.sigma, args.dim, schedule, args.tol, args.max_iter, s)
            for s in _seeds(args)]
    records = _run_jobs(_single_job, jobs, args.jobs)
    _write_records(records, out_dir)
    seed_rows = [[r.seed, r.config["iterations"], int(r.config["converged"])]
                 + [_fmt(r.metrics.get(m)) for m in METRICS] for r in records]
    _write_tsv(out_dir / "seeds.tsv", ["seed", "iterations", "converged", *METRICS], seed_rows)
    summary = summarize(records, "kpkm")
    _write_tsv(out_dir / "summary.tsv", SUMMARY_HEADER, [summary])
    print("\t".join(SUMMARY_HEADER))
    print("\t".join(str(c) for c in summary))
    return EXIT_OK


def cmd_cluster_multi(args):
    data = load_manifest(args.manifest)
    sigmas = [b if b is not None else args.sigma for b in data.bandwidths]
    schedule = _schedule(args, 2)
    out_dir = Path(args.out_dir or _default_out_dir())
    L = len(data.views)
    summaries, seed_rows = [], []
    for lam in args.lam:
        config_kw = {"m": args.m, "lam": lam, "schedule": schedule, "tol": args.tol,
                     "max_iter": args.max_iter, "possibilistic": not args.no_possibilistic}
        MkpkmConfig(**config_kw)  # validate before spawning jobs
        jobs = [(data.views, data.labels, args.clusters, sigmas, args.dim, config_kw, s)
                for s in _seeds(args)]
        records = _run_jobs(_multi_job, jobs, args.jobs)
        prefix = f"lam{lam:g}_" if len(args.lam) > 1 else ""
        _write_records(records, out_dir, prefix)
        for r in records:
            seed_rows.append([f"{lam:g}", r.seed, r.config["iterations"], int(r.config["converged"])]
                             + [_fmt(r.metrics.get(m)) for m in METRICS]
                             + [repr(a) for a in r.config["alpha"]])
        summaries.append(summarize(records, f"lam={lam:g}"))
    _write_tsv(out_dir / "seeds.tsv",
               ["lam", "seed", "iterations", "converged", *METRICS]
               + [f"alpha_{l + 1}" for l in range(L)], seed_rows)
    _write_tsv(out_dir / "summary.tsv", SUMMARY_HEADER, summaries)
    print("\t".join(SUMMARY_HEADER))
    for row in summaries:
        print("\t".join(str(c) for c in row))
    return EXIT_OK


def cmd_dim_sweep(args):
    X, labels = load_csv(args.data, has_header=args.header,
                         label_column=_label_column(args.label_column))
    if labels is None:
        raise InvalidInput("dim-sweep needs ground-truth labels (--label-column)")
    if not args.dims or min(args.dims) < 1:
        raise InvalidInput("--dims must list positive integers")
    out_dir = Path(args.out_dir or _default_out_dir())
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = dim_sweep(X, labels, args.clusters, args.dims, _seeds(args), args.sigma,
                     _schedule(args, 3), args.tol, args.max_iter, args.jobs)
    rows = [(D, f"{m:.6f}", f"{s:.6f}") for D, m, s in rows]
    _write_tsv(out_dir / "dim_sweep.tsv", ["D", "mean_acc", "std_acc"], rows)
    print("D\tmean_acc\tstd_acc")
    for row in rows:
        print("\t".join(str(c) for c in row))
    return EXIT_OK


def cmd_rff_probe(args):
    if not args.dims or min(args.dims) < 1:
        raise InvalidInput("--dims must list positive integers")
    if not args.sigma > 0:
        raise InvalidInput("--sigma must be positive")
    out_dir = Path(args.out_dir or _default_out_dir())
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = rff_probe(args.d, args.sigma, args.dims, args.pairs, args.seed, args.repeats)
    rows = [(D, repr(a), repr(r)) for D, a, r in rows]
    _write_tsv(out_dir / "rff_probe.tsv", ["D", "max_abs_error", "max_rel_error"], rows)
    print("D\tmax_abs_error\tmax_rel_error")
    for row in rows:
        print("\t".join(str(c) for c in row))
    return EXIT_OK


COMMANDS = {"cluster": cmd_cluster, "cluster-multi": cmd_cluster_multi,
            "dim-sweep": cmd_dim_sweep, "rff-probe": cmd_rff_probe}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FileNotFoundError, ParseError, ValidationError, InvalidInput, OSError) as exc:
        print(f"rffkpkm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"rffkpkm: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
