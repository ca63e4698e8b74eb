"""Command-line interface.

Every command writes its artifacts to files, logs to stderr and prints one
JSON summary line to stdout. Exit codes: 0 success, 2 usage error,
3 data/format error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import io
from .core import METRICS, metric
from .datasets import make_extractor_fixture
from .ensemble import EnsembleSpec, ensemble_predict, evaluate
from .exceptions import DataError, FormatError, InvalidInput, NumericalFailure
from .laplace import (block_eigenvalues, diagonal_dominance, hessian_blocks,
                      hessian_dump, log_evidence, posterior_weights,
                      write_hessian_csv)
from .map_trainer import TrainConfig, predict_probs, train_map
from .oma import OmaConfig, fit_oma, zeroshot_prior_weights

logger = logging.getLogger("bmaoma")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _non_negative_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _load_probs(paths):
    return [io.read_fmat(p) for p in paths]


def _model_id(path):
    # "informative.head.fmat" -> "informative"
    return Path(path).name.split(".")[0]


# -- commands ---------------------------------------------------------------

def cmd_train_map(args):
    X = io.read_fmat(args.features)
    y, n_classes = io.read_lbl(args.labels)
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                      batch_size=args.batch, seed=args.seed,
                      grad_tol=args.grad_tol)
    logger.info("training MAP head on %d x %d features, C=%d, alpha=%g",
                X.shape[0], X.shape[1], n_classes, args.alpha)
    head = train_map(X, y, args.alpha, cfg, n_classes=n_classes)
    io.write_head(head, args.out)
    return {"command": "train-map", "out": str(args.out),
            "converged": head.converged, "grad_inf_norm": head.grad_inf_norm,
            "objective": head.objective, "n_train": head.n_train,
            "alpha": head.alpha}


def cmd_evidence(args):
    X = io.read_fmat(args.features)
    y, n_classes = io.read_lbl(args.labels)
    head = io.read_head(args.head)
    if head.n_classes != n_classes:
        raise DataError(f"head has C={head.n_classes}, labels have C={n_classes}")
    if args.subsample is not None and args.subsample > X.shape[0]:
        logger.warning("--subsample %d exceeds N=%d; clamped to N",
                       args.subsample, X.shape[0])
    h = hessian_blocks(X, head, subsample=args.subsample, seed=args.seed)
    record = log_evidence(X, y, head, block_eigenvalues(h),
                          minibatch_likelihood=args.minibatch_likelihood,
                          subsample=args.subsample, seed=args.seed,
                          model_id=args.id or _model_id(args.head))
    io.write_evidence(record, args.out)
    return {"command": "evidence", "out": str(args.out),
            "subsample": h.subsample, **record.to_dict()}


def cmd_bma_weights(args):
    records = [io.read_evidence(p) for p in args.evidence]
    ids = [r.model_id or _model_id(p) for r, p in zip(records, args.evidence)]
    w = posterior_weights(records)
    io.write_weights(w, args.out, ids=ids, kind="bma")
    return {"command": "bma-weights", "out": str(args.out), "ids": ids,
            "weights": w.tolist()}


def cmd_probs(args):
    X = io.read_fmat(args.features)
    head = io.read_head(args.head)
    P = predict_probs(head, X)
    io.write_fmat(P, args.out)
    return {"command": "probs", "out": str(args.out), "rows": P.shape[0],
            "cols": P.shape[1]}


def _spec_from_args(args, n_members):
    mode = "output_avg" if args.mode == "avg" else args.mode
    ids = [_model_id(p) for p in args.probs]
    if mode == "output_avg":
        if args.weights is not None:
            logger.warning("--mode avg ignores --weights")
        return EnsembleSpec(mode=mode, member_ids=ids)
    if args.weights is None:
        raise UsageError(f"--mode {args.mode} requires --weights")
    w, wids = io.read_weights(args.weights, with_ids=True)
    if w.size != n_members:
        raise DataError(f"{args.weights} has {w.size} weights for "
                        f"{n_members} members")
    return EnsembleSpec(mode=mode, weights=w, member_ids=wids or ids)


def cmd_predict(args):
    probs = _load_probs(args.probs)
    spec = _spec_from_args(args, len(probs))
    P = ensemble_predict(spec, probs)
    io.write_fmat(P, args.out)
    return {"command": "predict", "out": str(args.out), "mode": spec.mode,
            "weights": spec.effective_weights(len(probs)).tolist()}


def cmd_oma_fit(args):
    probs = _load_probs(args.probs)
    prior = io.read_weights(args.prior_weights) if args.prior_weights else None
    cfg = OmaConfig(lam=args.lam, learning_rate=args.lr, epochs=args.epochs,
                    seed=args.seed, prior_weights=prior)
    beta, trace = fit_oma(probs, cfg, return_trace=True)
    ids = [_model_id(p) for p in args.probs]
    io.write_weights(beta, args.out, ids=ids, kind="oma")
    logger.info("OMA objective %.6g -> %.6g", trace[0], trace[-1])
    return {"command": "oma-fit", "out": str(args.out), "ids": ids,
            "weights": beta.tolist(), "objective_start": trace[0],
            "objective_final": trace[-1]}


def cmd_eval(args):
    y, n_classes = io.read_lbl(args.labels)
    if args.metric != "accuracy" and n_classes != 2:
        raise UsageError(f"--metric {args.metric} is binary-only, labels have "
                         f"C={n_classes}")
    if args.pred is not None:
        P = io.read_fmat(args.pred)
        if P.shape[1] != n_classes:
            raise DataError(f"{args.pred} has {P.shape[1]} columns, labels "
                            f"have C={n_classes}")
        value = metric(P, y, args.metric)
        return {"command": "eval", "metric": args.metric, "value": value}
    probs = _load_probs(args.probs)
    spec = _spec_from_args(args, len(probs))
    report = evaluate(spec, probs, y, args.metric)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(io.dumps(report) + "\n")
    return {"command": "eval", "metric": args.metric, **report}


def cmd_hessian_dump(args):
    X = io.read_fmat(args.features)
    head = io.read_head(args.head)
    table, classes, dims = hessian_dump(X, head, args.classes, args.dims,
                                        seed=args.seed, subsample=args.subsample)
    write_hessian_csv(table, args.out)
    return {"command": "hessian-dump", "out": str(args.out),
            "classes": classes.tolist(), "dims": dims.tolist(),
            "diagonal_dominance": diagonal_dominance(table, len(dims))}


def cmd_zeroshot_prior(args):
    probs = _load_probs(args.probs)
    y, _ = io.read_lbl(args.labels)
    w = zeroshot_prior_weights(probs, y)
    ids = [_model_id(p) for p in args.probs]
    io.write_weights(w, args.out, ids=ids, kind="zeroshot")
    return {"command": "zeroshot-prior", "out": str(args.out), "ids": ids,
            "weights": w.tolist()}


def cmd_make_fixture(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fx = make_extractor_fixture(seed=args.seed)
    manifest = {"models": [], "splits": {}}
    for split in ("train", "val"):
        io.write_lbl(fx[split]["labels"], fx["n_classes"], out / f"{split}.lbl")
        manifest["splits"][split] = {"labels": f"{split}.lbl", "features": {}}
        for mid, X in zip(fx["ids"], fx[split]["features"]):
            name = f"{mid}_{split}.fmat"
            io.write_fmat(X, out / name)
            manifest["splits"][split]["features"][mid] = name
    for mid in fx["ids"]:
        manifest["models"].append({"id": mid, "kind": "map_head",
                                   "feature_file": f"{mid}_train.fmat",
                                   "probs_files": {}})
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return {"command": "make-fixture", "out": str(out), "ids": fx["ids"]}


# -- parser -----------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=None,
                        help="cap on BLAS worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="bmaoma",
        description="Ensemble frozen-feature classifiers by Bayesian model "
                    "averaging or entropy-optimized weights.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-map", parents=[common],
                       help="train a MAP linear head")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--alpha", type=_positive_float, required=True)
    p.add_argument("--lr", type=_positive_float, default=0.01)
    p.add_argument("--epochs", type=_positive_int, default=200)
    p.add_argument("--batch", type=_positive_int, default=1000)
    p.add_argument("--grad-tol", type=_positive_float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_map)

    p = sub.add_parser("evidence", parents=[common],
                       help="Laplace log evidence of a trained head")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--subsample", type=_positive_int, default=None)
    p.add_argument("--minibatch-likelihood", action="store_true")
    p.add_argument("--id", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evidence)

    p = sub.add_parser("bma-weights", parents=[common],
                       help="posterior model weights from evidence files")
    p.add_argument("--evidence", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bma_weights)

    p = sub.add_parser("probs", parents=[common],
                       help="class probabilities of a head on features")
    p.add_argument("--features", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_probs)

    p = sub.add_parser("predict", parents=[common],
                       help="combine member probabilities")
    p.add_argument("--mode", choices=("bma", "oma", "avg"), required=True)
    p.add_argument("--probs", nargs="+", required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("oma-fit", parents=[common],
                       help="fit entropy-minimizing ensemble weights")
    p.add_argument("--probs", nargs="+", required=True)
    p.add_argument("--prior-weights", default=None)
    p.add_argument("--lambda", dest="lam", type=_non_negative_float, default=0.0)
    p.add_argument("--lr", type=_positive_float, default=0.001)
    p.add_argument("--epochs", type=_positive_int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oma_fit)

    p = sub.add_parser("eval", parents=[common],
                       help="score a prediction or an ensemble report")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pred", default=None)
    src.add_argument("--probs", nargs="+", default=None)
    p.add_argument("--labels", required=True)
    p.add_argument("--metric", choices=METRICS, default="accuracy")
    p.add_argument("--mode", choices=("bma", "oma", "avg"), default="avg")
    p.add_argument("--weights", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("hessian-dump", parents=[common],
                       help="CSV of a class/dimension subset of the Hessian")
    p.add_argument("--features", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--classes", type=_positive_int, required=True)
    p.add_argument("--dims", type=_positive_int, required=True)
    p.add_argument("--subsample", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hessian_dump)

    p = sub.add_parser("zeroshot-prior", parents=[common],
                       help="prior weights from training log-likelihoods")
    p.add_argument("--probs", nargs="+", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_zeroshot_prior)

    p = sub.add_parser("make-fixture", parents=[common],
                       help="write the synthetic 3-extractor fixture")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_fixture)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s",
                        force=True)
    try:
        with threadpool_limits(limits=args.threads):
            summary = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bmaoma {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"bmaoma {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FormatError, DataError, InvalidInput, OSError) as exc:
        print(f"bmaoma {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(io.dumps(summary))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
