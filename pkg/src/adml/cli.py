"""Command-line entry point: ``adml <verb> [flags]``.

Exit codes: 0 success, 1 data or numerical error, 2 usage error.
Every successful run prints one ``RESULT key=value ...`` line on stdout.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import aggregate, dataset, evaluate, runtime
from .errors import ADMLError, MissingDense
from .model import MetricModel
from .patch import PatchSpec
from .solver import AUTO, DIRECT, GRAM

log = logging.getLogger("adml")


def _result(**kv) -> None:
    parts = []
    for k, v in kv.items():
        if isinstance(v, float):
            v = format(v, ".6g")
        parts.append(f"{k}={v}")
    print("RESULT " + " ".join(parts))


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _maybe_normalize(args, ref, *others):
    if not getattr(args, "normalize", False):
        return (ref, *others)
    ref_n, stats = dataset.normalize(ref)
    return (ref_n, *(stats.apply(o) for o in others))


def _model_or_identity(path, d):
    if path is None:
        return MetricModel(np.eye(d), "euclidean")
    model = MetricModel.load(path)
    if model.d != d:
        raise ADMLError(f"model dimension {model.d} does not match data dimension {d}")
    return model


def _job_config(args, q, algo, collect_dense=False) -> runtime.JobConfig:
    subset_size, K = args.subset_size, args.k
    if subset_size is None and K is None:
        subset_size = 600
    return runtime.JobConfig(
        spec=PatchSpec(args.kw, args.kb, args.beta), q=q, algo=algo,
        subset_size=subset_size, K=K, workers=args.workers, seed=args.seed,
        solver_mode=args.solver, ridge=args.ridge, collect_dense_R=collect_dense,
        normalize=args.normalize, dense_cap=args.dense_cap)


# ---------------------------------------------------------------------------
# verbs


def cmd_gen(args):
    ds = dataset.gen_coiled_surfaces(args.n_per_class, args.noise, args.z_halfwidth, args.turns,
                                     args.seed)
    dataset.write_csv(ds, args.out)
    _result(verb="gen", n=ds.n_samples, d=ds.dim, out=args.out)


def cmd_split(args):
    ds = dataset.load_csv(args.data, args.mode)
    _, plan = dataset.random_split(ds, K=args.k, subset_size=args.subset_size, seed=args.seed)
    with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "subset"])
        for sid, k in zip(ds.sample_ids, plan.assignment):
            w.writerow([int(sid), int(k)])
    sizes = np.bincount(plan.assignment)[1:]
    _result(verb="split", K=plan.K, min_size=int(sizes.min()), max_size=int(sizes.max()))


def cmd_train(args):
    ds = dataset.load_csv(args.data, args.mode)
    cfg = _job_config(args, args.q, args.algo)
    model = runtime.train(ds, cfg)
    model.save(args.out)
    t = model.metadata.get("timings", {})
    _result(verb="train", algo=args.algo, d=model.d, q=model.q, K=model.metadata.get("K", 1),
            seconds=float(sum(t.values())), out=args.out)


def cmd_eval(args):
    mode = dataset.MULTILABEL if args.task == "annotate" else dataset.CATEGORICAL
    ref = dataset.load_csv(args.train, mode)
    test = dataset.load_csv(args.test, mode)
    ref, test = _maybe_normalize(args, ref, test)
    model = _model_or_identity(args.model, ref.dim)
    if args.task == "knn":
        pred = evaluate.knn_classify_batch(ref, model, test.features, args.k)
        acc = float(np.mean(pred == test.labels))
        if args.out:
            with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["sample_id", "label", "predicted"])
                for sid, lab, p in zip(test.sample_ids, test.labels, pred):
                    w.writerow([int(sid), int(lab), int(p)])
        print(f"accuracy={acc:.6f}")
        _result(verb="eval", task="knn", k=args.k, accuracy=acc, n=test.n_samples)
    else:
        if args.k > 15:
            raise SystemExit(_usage_error(args, "annotate uses at most 15 neighbours"))
        stats = evaluate.tag_stats(ref)
        pred = evaluate.annotate_batch(ref, stats, model, test.features, args.k)
        per_tag, macro = evaluate.f1_scores(pred, list(test.labels), stats.vocabulary)
        if args.out:
            with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["tag", "f1"])
                for t, f in per_tag.items():
                    w.writerow([t, format(f, ".17g")])
        print(f"macro_f1={macro:.6f}")
        _result(verb="eval", task="annotate", k=args.k, macro_f1=macro, n=test.n_samples)


def cmd_bounds(args):
    ds = dataset.load_csv(args.data, args.mode)
    model = MetricModel.load(args.model)
    target = MetricModel.load(args.wholistic_model)
    if model.d != ds.dim or target.W.shape != model.W.shape:
        raise ADMLError("model, wholistic model and data dimensions disagree")
    algo = model.algo if model.algo in (runtime.ADML1, runtime.ADML2) else runtime.ADML2
    cfg = _job_config(args, model.q, algo, collect_dense=True)
    if cfg.normalize:
        ds, _ = dataset.normalize(ds)
    if ds.dim > cfg.dense_cap:
        raise MissingDense(f"d={ds.dim} exceeds the dense cap {cfg.dense_cap}; bound "
                           "diagnostics need dense R_k (adml1 would also risk SingularAggregate)")
    subsets, _ = dataset.random_split(ds, K=cfg.K, subset_size=cfg.subset_size, seed=cfg.seed)
    results, _ = runtime.run_map(subsets, cfg)
    inputs = runtime.aggregation_input(results).aligned()
    D = None
    if algo == runtime.ADML2:
        _, D, _ = aggregate.aggregate_svd(inputs)
    report = aggregate.bound_report(inputs, model.W, target.W, D)
    print(report.to_text())
    if args.csv:
        path = Path(args.csv)
        new = not path.exists()
        with path.open("a", encoding="utf-8") as fh:
            if new:
                fh.write(report.csv_header() + "\n")
            fh.write(report.csv_row() + "\n")
    flags = report.as_dict()
    _result(verb="bounds", algo=algo, K=report.K, lhs=report.lhs,
            **{k: flags[k] for k in ("bound1", "bound2", "bound3", "bound3_corrected")})


def cmd_hist(args):
    ds = dataset.load_csv(args.data, args.mode)
    (ds,) = _maybe_normalize(args, ds)
    model = _model_or_identity(args.model, ds.dim)
    h = evaluate.pair_histogram(ds, model, args.pairs, args.bins, args.seed)
    h.to_csv(args.out)
    _result(verb="hist", pairs=h.n_pairs, bins=args.bins, mean_within=h.mean_within,
            mean_between=h.mean_between, normalizer=h.normalizer)


def cmd_project(args):
    ds = dataset.load_csv(args.data, args.mode)
    (ds,) = _maybe_normalize(args, ds)
    model = _model_or_identity(args.model, ds.dim)
    evaluate.write_projection_csv(ds, model, args.out)
    _result(verb="project", n=ds.n_samples, q=model.q, out=args.out)


# ---------------------------------------------------------------------------
# parser


def _add_patch_flags(p, with_q=True):
    p.add_argument("--kw", type=int, default=10, help="within-class neighbours")
    p.add_argument("--kb", type=_positive_int, default=20, help="between-class neighbours")
    p.add_argument("--beta", type=float, default=0.1)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--subset-size", type=_positive_int, default=None)
    g.add_argument("--k", type=_positive_int, default=None, help="number of subsets")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", choices=(AUTO, DIRECT, GRAM), default=AUTO)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--dense-cap", type=_positive_int, default=2000)
    p.add_argument("--normalize", action="store_true")
    if with_q:
        p.add_argument("--q", type=_positive_int, default=2, help="subspace dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adml", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen", help="generate the two-spiral synthetic dataset")
    p.add_argument("--n-per-class", type=_positive_int, default=1000)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--z-halfwidth", type=float, default=1.5)
    p.add_argument("--turns", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("split", help="write a seeded subset assignment")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=(dataset.CATEGORICAL, dataset.MULTILABEL),
                   default=dataset.CATEGORICAL)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--k", type=_positive_int)
    g.add_argument("--subset-size", type=_positive_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="learn a metric and write a model file")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=(dataset.CATEGORICAL, dataset.MULTILABEL),
                   default=dataset.CATEGORICAL)
    p.add_argument("--algo", choices=runtime.ALGOS, default=runtime.ADML2)
    _add_patch_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="kNN accuracy or tag-annotation F1 under a model")
    p.add_argument("--task", choices=("knn", "annotate"), default="knn")
    p.add_argument("--model", help="model file (omit for Euclidean)")
    p.add_argument("--train", required=True, help="reference set")
    p.add_argument("--test", required=True)
    p.add_argument("--k", type=_positive_int, default=1)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bounds", help="consistency-bound report against a wholistic model")
    p.add_argument("--model", required=True)
    p.add_argument("--wholistic-model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=(dataset.CATEGORICAL, dataset.MULTILABEL),
                   default=dataset.CATEGORICAL)
    _add_patch_flags(p, with_q=False)
    p.add_argument("--csv", help="append the report as one CSV row")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("hist", help="within/between pair-distance histograms")
    p.add_argument("--model")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=(dataset.CATEGORICAL, dataset.MULTILABEL),
                   default=dataset.CATEGORICAL)
    p.add_argument("--pairs", type=_positive_int, default=10000)
    p.add_argument("--bins", type=_positive_int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("project", help="write W^T x for every sample")
    p.add_argument("--model")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=(dataset.CATEGORICAL, dataset.MULTILABEL),
                   default=dataset.CATEGORICAL)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)
    return parser


def _usage_error(args, msg):
    print(f"adml {args.verb}: error: {msg}", file=sys.stderr)
    return 2


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except SystemExit as exc:
        return int(exc.code)
    except (ADMLError, ValueError, OSError) as exc:
        print(f"adml {args.verb}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
