"""Command-line front end.

Exit codes: 0 success, 1 invalid input or parameters, 2 numerical failure.
Set ``DISC_NUM_THREADS`` to cap the BLAS thread pool.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data_io import (DataMatrix, align, file_checksum, load_csv, save_csv, save_result, update_summary,
                      write_labels, write_matrix, write_table)
from .errors import InputError, NumericError, ParameterError
from .feature_graph import FIXED, SELF_TUNING, KernelSpec, build_graph, standardize

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2
THREADS_ENV = "DISC_NUM_THREADS"


def _kernel(args) -> KernelSpec:
    if args.kernel == "fixed":
        return KernelSpec(FIXED, bandwidth=args.bandwidth)
    return KernelSpec(SELF_TUNING, knn_k=args.knn_k)


def _add_kernel_args(p):
    p.add_argument("--kernel", choices=["self-tuning", "fixed"], default="self-tuning")
    p.add_argument("--bandwidth", type=float, help="RBF bandwidth for --kernel fixed")
    p.add_argument("--knn-k", type=int, help="neighbour index for the self-tuning scale (default ceil(log p))")
    p.add_argument("--zscore", action="store_true", help="standardize each column before building graphs")


def _load(path, args) -> DataMatrix:
    data = load_csv(path, has_header=not args.no_header)
    return standardize(data) if getattr(args, "zscore", False) else data


def _base_summary(args, kernel: KernelSpec, p: int) -> dict:
    info = kernel.describe(p)
    return dict(command=args.command, version=__version__, seed=args.seed, kernel=info["kernel"],
                bandwidth=info["bandwidth"], knn_k=info["knn_k"], zscore=bool(getattr(args, "zscore", False)),
                p=p)


def cmd_run(args) -> int:
    from .downstream import cluster_features, significance_elbow
    from .spectral import default_r, disc_pair

    a = _load(args.a, args)
    b = _load(args.b, args)
    b = align(a, b).apply(b)
    p = a.feature_count
    kernel = _kernel(args)
    r = default_r(p) if args.r is None else args.r
    res_a, res_b = disc_pair(a, b, args.d_a, args.d_b, r, kernel)
    out = Path(args.out)
    summary = _base_summary(args, kernel, p)
    summary.update(d_a=args.d_a, d_b=args.d_b, r=r, n_a=a.sample_count, n_b=b.sample_count,
                   inputs={"a": str(args.a), "b": str(args.b)},
                   checksums={"a": file_checksum(args.a), "b": file_checksum(args.b)},
                   sigma_a=res_a.significance, sigma_b=res_b.significance)
    if r >= 2:
        summary.update(elbow_a=significance_elbow(res_a.significance),
                       elbow_b=significance_elbow(res_b.significance))
    save_result(res_a, out, "a", a.feature_ids)
    save_result(res_b, out, "b", a.feature_ids)
    if args.clusters:
        labels = {}
        for tag, res in (("a", res_a), ("b", res_b)):
            m = args.cluster_vectors or summary.get(f"elbow_{tag}", max(r, 1))
            cl = cluster_features(res.vectors[:, :m], args.clusters, args.seed)
            labels[tag] = cl.labels
            summary[f"cluster_inertia_{tag}"] = cl.inertia
            summary[f"cluster_vectors_{tag}"] = m
        write_table(out / "clusters.csv", ["feature_id", "label_a", "label_b"],
                    [(f, int(x), int(y)) for f, x, y in zip(a.feature_ids, labels["a"], labels["b"])])
        summary["k_clusters"] = args.clusters
    if args.dump_graph:
        for tag, data in (("a", a), ("b", b)):
            g = build_graph(data, kernel)
            write_matrix(out / f"w_{tag}.csv", g.weights, data.feature_ids, data.feature_ids)
    update_summary(out, summary)
    print(f"sigma_a: {' '.join(f'{x:.4g}' for x in res_a.significance)}")
    print(f"sigma_b: {' '.join(f'{x:.4g}' for x in res_b.significance)}")
    return EXIT_OK


def cmd_multi(args) -> int:
    from .downstream import significance_elbow
    from .spectral import default_r, disc_multi

    data = [_load(path, args) for path in args.inputs]
    if len(data) < 2:
        raise ParameterError("multi needs at least two input files")
    p = data[0].feature_count
    d = args.d[0] if len(args.d) == 1 else args.d
    kernel = _kernel(args)
    r = default_r(p) if args.r is None else args.r
    results = disc_multi(data, d, r, kernel)
    out = Path(args.out)
    summary = _base_summary(args, kernel, p)
    summary.update(d=d, r=r, n=[x.sample_count for x in data], inputs=[str(x) for x in args.inputs],
                   checksums=[file_checksum(x) for x in args.inputs],
                   dropped_columns=[res.dropped_columns for res in results])
    for m, res in enumerate(results, start=1):
        save_result(res, out, str(m), data[0].feature_ids)
        summary[f"sigma_{m}"] = res.significance
        if r >= 2:
            summary[f"elbow_{m}"] = significance_elbow(res.significance)
        print(f"sigma_{m}: {' '.join(f'{x:.4g}' for x in res.significance)}")
    update_summary(out, summary)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import ToySpec, generate

    spec = ToySpec(args.problem, args.n, args.seed, args.rho)
    toy = generate(spec)
    out = Path(args.out)
    for name, data in zip(toy.names, toy.datasets):
        save_csv(data, out / f"{name}.csv")
    text = json.dumps(toy.ground_truth_dict(), indent=2) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    (out / "ground_truth.json").write_text(text)
    update_summary(out, dict(command="synth", version=__version__, problem=spec.problem, n=spec.n,
                             seed=spec.seed, rho=spec.rho, files=[f"{x}.csv" for x in toy.names]))
    print(f"wrote {', '.join(f'{x}.csv' for x in toy.names)} to {out}")
    return EXIT_OK


def cmd_sbm_validate(args) -> int:
    from .sbm import recovery_experiment, slope_experiment

    if len(args.l) < 3:
        raise ParameterError("need at least three values of l to fit a slope")
    slopes, records = slope_experiment(args.l, args.alpha, args.p, args.q, args.trials, args.seed)
    out = Path(args.out)
    write_table(out / "slopes.csv", ["alpha", "quantity", "fitted_slope", "theoretical_slope"],
                [(float(s["alpha"]), s["quantity"], s["fitted_slope"], s["theoretical_slope"]) for s in slopes])
    write_table(out / "sbm_records.csv", ["alpha", "l", "trial", "quantity", "value"],
                [(float(x["alpha"]), x["l"], x["trial"], x["quantity"], x["value"]) for x in records])
    rec_rows, rec_means = [], {}
    if args.recovery_trials > 0:
        for alpha in args.alpha:
            means, rec = recovery_experiment(args.l, alpha, args.p, args.q, args.recovery_trials, args.seed)
            rec_means[str(alpha)] = {str(k): v for k, v in means.items()}
            rec_rows.extend((float(x["alpha"]), x["l"], x["trial"], x["error_rate"], x["v_gamma_distance"])
                            for x in rec)
        write_table(out / "recovery.csv", ["alpha", "l", "trial", "error_rate", "v_gamma_distance"], rec_rows)
    update_summary(out, dict(command="sbm-validate", version=__version__, l=args.l, alpha=args.alpha,
                             p=args.p, q=args.q, trials=args.trials, recovery_trials=args.recovery_trials,
                             seed=args.seed, slopes=slopes, mean_error_rate=rec_means))
    for s in slopes:
        print(f"alpha={s['alpha']:.2f} {s['quantity']:<9} fitted={s['fitted_slope']:.3f} "
              f"theory={s['theoretical_slope']:.3f}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    from .data_io import load_result
    from .downstream import cluster_features, significance_elbow

    res = load_result(args.dir, args.tag)
    m = args.n_vectors or (significance_elbow(res.significance) if res.count >= 2 else res.count)
    cl = cluster_features(res.vectors[:, :m], args.k, args.seed)
    out = Path(args.out or args.dir)
    write_labels(out / "clusters.csv", res.feature_ids, cl.labels)
    update_summary(out, dict(k_clusters=args.k, cluster_vectors=m, cluster_seed=args.seed,
                             cluster_inertia=cl.inertia, cluster_tag=args.tag))
    print(f"k={args.k} inertia={cl.inertia:.6g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .downstream import evaluate_protocol

    train = [_load(x, args) for x in args.train]
    test = [_load(x, args) for x in args.test]
    if len(train) != len(test):
        raise ParameterError("give one test file per training class")
    ref = train[0]
    train = [ref] + [align(ref, x).apply(x) for x in train[1:]]
    test = [align(ref, x).apply(x) for x in test]
    test_X = np.vstack([x.values for x in test])
    test_y = np.concatenate([np.full(x.sample_count, c) for c, x in enumerate(test)])
    if args.shuffle_labels:
        # control run: break the link between samples and classes
        pooled = np.vstack([x.values for x in train])
        perm = np.random.default_rng(args.seed).permutation(len(pooled))
        sizes = np.cumsum([x.sample_count for x in train])[:-1]
        train = [DataMatrix(part, ref.feature_ids) for part in np.split(pooled[perm], sizes)]
    kernel = _kernel(args)
    rows = []
    for d in args.d:
        rep = evaluate_protocol(train, test_X, test_y, d=d, n_vectors=args.n_vectors,
                                k_clusters=args.k_clusters, seed=args.seed, kernel=kernel)
        rows.append((d, rep.accuracy))
        print(f"d={d:<4d} accuracy={rep.accuracy:.4f}")
    out = Path(args.out)
    write_table(out / "eval.csv", ["d", "accuracy"], rows)
    summary = _base_summary(args, kernel, ref.feature_count)
    summary.update(d=args.d, n_vectors=args.n_vectors, k_clusters=args.k_clusters,
                   shuffle_labels=args.shuffle_labels, accuracy={str(d): a for d, a in rows},
                   train=[str(x) for x in args.train], test=[str(x) for x in args.test],
                   checksums=[file_checksum(x) for x in [*args.train, *args.test]])
    update_summary(out, summary)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="disc", description="Differential feature groups across datasets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_required=True, reads_csv=True):
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        if reads_csv:
            p.add_argument("--no-header", action="store_true", help="input CSVs have no header row")

    p = sub.add_parser("run", help="differential vectors of two datasets")
    p.add_argument("a", help="CSV for dataset A (samples x features)")
    p.add_argument("b", help="CSV for dataset B")
    p.add_argument("--d-a", type=int, default=20)
    p.add_argument("--d-b", type=int, default=20)
    p.add_argument("--r", type=int, default=None, help="vectors to keep (default min(10, p))")
    p.add_argument("--clusters", type=int, default=0, help="k-means the features into this many groups")
    p.add_argument("--cluster-vectors", type=int, default=0,
                   help="vectors used for clustering (default: significance elbow)")
    p.add_argument("--dump-graph", action="store_true", help="also write w_a.csv and w_b.csv")
    _add_kernel_args(p)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("multi", help="differential vectors of each dataset against all others")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--d", type=int, nargs="+", default=[20], help="one value, or one per dataset")
    p.add_argument("--r", type=int, default=None)
    _add_kernel_args(p)
    common(p)
    p.set_defaults(func=cmd_multi)

    p = sub.add_parser("synth", help="write a synthetic dataset pair or triple")
    p.add_argument("--problem", default="newly_connected",
                   choices=["newly_connected", "split_groups", "split_both", "multi3", "partial_corr"])
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--rho", type=float, default=1.0)
    common(p, reads_csv=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sbm-validate", help="block-model scaling experiments")
    p.add_argument("--l", type=int, nargs="+", default=[500, 1000, 2000])
    p.add_argument("--alpha", type=float, nargs="+", default=[0.6, 0.7, 0.8, 0.9])
    p.add_argument("--p", type=float, default=0.8)
    p.add_argument("--q", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--recovery-trials", type=int, default=10, help="0 skips the recovery runs")
    common(p, reads_csv=False)
    p.set_defaults(func=cmd_sbm_validate)

    p = sub.add_parser("cluster", help="k-means over saved differential vectors")
    p.add_argument("dir", help="directory written by `run` or `multi`")
    p.add_argument("--tag", default="a")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n-vectors", type=int, default=0, help="default: significance elbow")
    common(p, out_required=False, reads_csv=False)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("eval", help="classification accuracy of cluster-mean meta-features")
    p.add_argument("--train", nargs="+", required=True, help="one CSV per class")
    p.add_argument("--test", nargs="+", required=True, help="one CSV per class, same order")
    p.add_argument("--d", type=int, nargs="+", default=[20], help="several values run a sweep")
    p.add_argument("--n-vectors", type=int, default=3)
    p.add_argument("--k-clusters", type=int, default=10)
    p.add_argument("--shuffle-labels", action="store_true", help="permute training labels (control)")
    _add_kernel_args(p)
    common(p)
    p.set_defaults(func=cmd_eval)
    return parser


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    from threadpoolctl import threadpool_limits
    try:
        n = int(value)
    except ValueError:
        raise ParameterError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        limiter = _thread_limit()
        try:
            return args.func(args)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
