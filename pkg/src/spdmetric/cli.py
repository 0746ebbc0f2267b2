"""Command-line interface: ``spdmetric <command> [options]``.

Exit codes: 0 success, 2 input/parse error, 3 internal invariant
violation, 4 shape/config mismatch, 5 solver/protocol failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, _backend
from ._errors import (
    ConfigError,
    FormatError,
    InsufficientDataError,
    NumericalError,
    ShapeError,
    SpdMetricError,
)
from .descriptor import (
    DescriptorConfig,
    extract,
    read_descriptors,
    read_image,
    read_manifest,
    write_descriptors,
)
from .distances import KIND_NAMES, distance
from .evaluation import (
    ClusterDataset,
    PairDataset,
    baseline_match_eval,
    cluster_spd,
    kfold_match_eval,
    select_gamma_cv,
    split_train,
    synth_pairs,
    synth_spd_clusters,
    read_labels,
    read_pairs,
    write_labels,
    write_pairs,
    _child_seeds,
)
from .geodesic import geodesic_dist, learn_metric, load_model, save_model
from .itml import PAPER_GAMMA, ItmlConfig, read_constraints
from .linalg import read_matrix
from .report import accuracy_table, dumps_structured, kinds_table
from .representation import REPRESENTATIONS

log = logging.getLogger("spdmetric")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL, EXIT_SHAPE, EXIT_SOLVER = 0, 2, 3, 4, 5

DEFAULT_GAMMA_GRID = ",".join(f"{10 ** (e / 2):.10g}" for e in range(0, 9))


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- helpers ----------------------------------------------------------------

def _threads(value: str) -> int:
    if value == "auto":
        return os.cpu_count() or 1
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--threads expects an integer or 'auto', got {value!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("--threads must be >= 1")
    return n


def _size(value: str):
    if value.lower() == "none":
        return None
    try:
        w, h = (int(x) for x in value.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--resize expects WxH or 'none', got {value!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("--resize dimensions must be positive")
    return (w, h)


def _reps(value: str) -> list[str]:
    reps = [r.strip() for r in value.split(",") if r.strip()]
    bad = [r for r in reps if r not in REPRESENTATIONS]
    if bad or not reps:
        raise argparse.ArgumentTypeError(
            f"unknown representation(s) {bad}; choose from {', '.join(REPRESENTATIONS)}")
    return reps


def _floats(value: str) -> list[float]:
    try:
        out = [float(x) for x in value.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}") from None
    if not out or any(not g > 0 for g in out):
        raise argparse.ArgumentTypeError("values must be positive")
    return out


def _open_text(path: str, what: str):
    try:
        return open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read {what} {path}: {exc.strerror}") from None


def _load_descriptors(path: str):
    with _open_text(path, "descriptor file") as fh:
        try:
            ids, mats, header = read_descriptors(fh)
        except FormatError as exc:
            raise CliError(EXIT_INPUT, f"{path}: {exc}") from None
    if not mats:
        raise CliError(EXIT_INPUT, f"{path}: no descriptors")
    return ids, mats, header


def _itml_config(args) -> ItmlConfig:
    try:
        return ItmlConfig(gamma=args.gamma, a=args.a, b=args.b, max_sweeps=args.max_sweeps,
                          conv_tol=args.conv_tol, seed=args.seed)
    except ConfigError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from None


def _resolved(args) -> dict:
    skip = {"func", "handler"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _announce(args) -> None:
    print("# config: " + json.dumps(_resolved(args), sort_keys=True, default=str), file=sys.stderr)


def _write_reports(out: str, text: str, doc: dict) -> None:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "report.txt").write_text(text, encoding="utf-8")
    (d / "report.structured").write_text(dumps_structured(doc), encoding="utf-8")


def _modes(args) -> tuple[bool, bool]:
    mode = args.mode
    return mode in ("both", "unlearned"), mode in ("both", "learned")


# -- commands ---------------------------------------------------------------

def cmd_extract(args) -> int:
    with _open_text(args.manifest, "manifest") as fh:
        try:
            entries = read_manifest(fh)
        except FormatError as exc:
            raise CliError(EXIT_INPUT, str(exc)) from None
    if not entries:
        raise CliError(EXIT_INPUT, "empty manifest")
    try:
        config = DescriptorConfig(resize_to=args.resize, epsilon_scale=args.epsilon,
                                  unbiased=not args.biased)
    except ValueError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from None
    base = Path(args.manifest).parent

    def one(entry):
        path = entry[0]
        full = Path(path) if Path(path).is_absolute() else base / path
        try:
            img = read_image(full)
        except (OSError, FormatError, ValueError) as exc:
            raise CliError(EXIT_INPUT, f"cannot read image {path}: {exc}") from None
        try:
            return path, extract(img, config)
        except NumericalError as exc:
            raise CliError(EXIT_INTERNAL, f"{path}: {exc}") from None

    if args.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(args.threads) as pool:
            records = list(pool.map(one, entries))
    else:
        records = [one(e) for e in entries]
    with open(args.out, "w", encoding="utf-8") as fh:
        write_descriptors(records, fh, config.convention())
    if args.labels_out:
        labels = [lab for _, lab in entries]
        if any(lab is None for lab in labels):
            raise CliError(EXIT_INPUT, "--labels-out needs a label on every manifest line")
        with open(args.labels_out, "w", encoding="utf-8") as fh:
            for i, lab in enumerate(labels):
                fh.write(f"{i} {lab}\n")
    log.info("wrote %d descriptors to %s", len(records), args.out)
    return EXIT_OK


def _read_matrix_file(path: str):
    with _open_text(path, "matrix file") as fh:
        try:
            return read_matrix(fh, path)
        except FormatError as exc:
            raise CliError(EXIT_INPUT, str(exc)) from None


def cmd_dist(args) -> int:
    A = _read_matrix_file(args.a)
    B = _read_matrix_file(args.b)
    if A.shape != B.shape:
        raise CliError(EXIT_SHAPE, f"order mismatch: {A.shape[0]} vs {B.shape[0]}")
    if args.kind == "learned":
        if not args.model:
            raise CliError(EXIT_INPUT, "--kind learned requires --model")
        with _open_text(args.model, "model file") as fh:
            try:
                metric = load_model(fh)
            except (FormatError, NumericalError) as exc:
                raise CliError(EXIT_INPUT, f"{args.model}: {exc}") from None
        if metric.n != A.shape[0]:
            raise CliError(EXIT_SHAPE, f"model is for order {metric.n}, matrices have order {A.shape[0]}")
        d = geodesic_dist(metric, A, B)
    else:
        d = distance(args.kind, A, B)
    print(f"{d:.12g}")
    return EXIT_OK


def cmd_learn(args) -> int:
    _, mats, _ = _load_descriptors(args.descriptors)
    with _open_text(args.constraints, "constraint file") as fh:
        try:
            cons = read_constraints(fh)
        except FormatError as exc:
            raise CliError(EXIT_INPUT, str(exc)) from None
    N = len(mats)
    bad = [c for c in cons if not (0 <= c.i < N and 0 <= c.j < N) or c.i == c.j]
    if bad:
        raise CliError(EXIT_INPUT, f"constraint {tuple(bad[0])} references a missing item (have {N})")
    if not cons:
        raise CliError(EXIT_SOLVER, "no constraints")
    config = _itml_config(args)
    try:
        metric = learn_metric(mats, cons, config, args.representation)
    except (NumericalError, InsufficientDataError) as exc:
        raise CliError(EXIT_SOLVER, f"metric learning failed: {exc}") from None
    rep = metric.report
    degenerate = [c for c in rep.skipped if not cons[c].similar]
    if degenerate:
        raise CliError(EXIT_SOLVER,
                       f"dissimilar constraints between identical items cannot be satisfied: {degenerate[:10]}")
    with open(args.out, "w", encoding="utf-8") as fh:
        save_model(metric, fh)
    s = rep.summary()
    print(f"sweeps={s['sweeps']} converged={str(s['converged']).lower()} "
          f"objective={s['objective']:.10g} l={s['l']:.10g} u={s['u']:.10g} "
          f"max_rel_violation={s['max_rel_violation']:.3g}")
    return EXIT_OK


def cmd_match_eval(args) -> int:
    _, mats, header = _load_descriptors(args.descriptors)
    with _open_text(args.pairs, "pairs file") as fh:
        try:
            pairs, folds = read_pairs(fh)
        except FormatError as exc:
            raise CliError(EXIT_INPUT, str(exc)) from None
    try:
        ds = PairDataset(mats, pairs, folds)
    except ConfigError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from None
    want_base, want_learned = _modes(args)
    config = _itml_config(args)
    rows, details = {}, {}
    for rep in args.representations:
        try:
            res = kfold_match_eval(ds, rep, config, args.folds, args.seed, learned=want_learned,
                                   threads=args.threads)
        except ConfigError as exc:
            raise CliError(EXIT_SOLVER, str(exc)) from None
        except NumericalError as exc:
            raise CliError(EXIT_SOLVER, f"{rep}: {exc}") from None
        rows[rep] = (res.mean_unlearned, res.mean_learned)
        details[rep] = {
            "mean_unlearned": res.mean_unlearned,
            "mean_learned": res.mean_learned,
            "folds": [f.as_dict() for f in res.folds],
        }
    text = accuracy_table("Pair matching accuracy (%), mean over folds", rows)
    kinds = {}
    if want_base and args.kinds:
        for kind in args.kinds:
            kinds[kind] = float(np.mean(baseline_match_eval(ds, kind, args.folds, args.seed)))
        text += "\n" + kinds_table("Pair matching accuracy (%) with fixed distances", kinds)
    doc = {
        "command": "match-eval",
        "config": _resolved(args),
        "itml": config.echo(),
        "descriptor_header": header,
        "n_items": len(mats),
        "n_pairs": int(len(pairs)),
        "representations": details,
        "table": {rep: {"frobenius": b, "itml": l, "itml_gain": None if l is None else l - b}
                  for rep, (b, l) in rows.items()},
        "fixed_distances": kinds,
        "backend": _backend.BACKEND,
        "version": __version__,
    }
    _write_reports(args.out, text, doc)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_cluster_eval(args) -> int:
    _, mats, header = _load_descriptors(args.descriptors)
    with _open_text(args.labels, "labels file") as fh:
        try:
            labels = read_labels(fh, len(mats))
        except FormatError as exc:
            raise CliError(EXIT_INPUT, str(exc)) from None
    n_classes = int(np.unique(labels).size)
    k = args.k if args.k is not None else n_classes
    if k != n_classes:
        raise CliError(EXIT_SHAPE, f"--k {k} does not match the {n_classes} classes in {args.labels}")
    want_base, want_learned = _modes(args)
    base_cfg = _itml_config(args)
    seeds = _child_seeds(args.seed, args.repeats)
    per_rep = {rep: {"unlearned": [], "learned": [], "gamma": [], "cv_scores": [],
                     "cost_unlearned": [], "cost_learned": []} for rep in args.representations}
    for r, rseed in enumerate(seeds):
        try:
            mask = split_train(labels, args.train_fraction, rseed)
        except ConfigError as exc:
            raise CliError(EXIT_INPUT, str(exc)) from None
        ds = ClusterDataset(mats, labels, mask)
        for rep in args.representations:
            acc = per_rep[rep]
            try:
                if want_base:
                    res, a = cluster_spd(ds, rep, base_cfg, k, args.restarts, rseed, learned=False,
                                         threads=args.threads)
                    acc["unlearned"].append(a)
                    acc["cost_unlearned"].append(res.cost)
                if want_learned:
                    g, scores = select_gamma_cv(ds, rep, args.gamma_grid, base_cfg, k, args.restarts, rseed)
                    cfg = ItmlConfig(gamma=g, a=base_cfg.a, b=base_cfg.b, max_sweeps=base_cfg.max_sweeps,
                                     conv_tol=base_cfg.conv_tol, seed=rseed)
                    res, a = cluster_spd(ds, rep, cfg, k, args.restarts, rseed, learned=True,
                                         threads=args.threads)
                    acc["learned"].append(a)
                    acc["gamma"].append(g)
                    acc["cv_scores"].append(scores)
                    acc["cost_learned"].append(res.cost)
            except (NumericalError, InsufficientDataError) as exc:
                raise CliError(EXIT_SOLVER, f"repeat {r}, {rep}: {exc}") from None
            except ConfigError as exc:
                raise CliError(EXIT_SHAPE, f"repeat {r}, {rep}: {exc}") from None
    rows = {}
    for rep, acc in per_rep.items():
        b = float(np.mean(acc["unlearned"])) if acc["unlearned"] else None
        lrn = float(np.mean(acc["learned"])) if acc["learned"] else None
        rows[rep] = (b, lrn)
    text = accuracy_table(f"Clustering accuracy (%), mean over {args.repeats} repeats", rows)
    doc = {
        "command": "cluster-eval",
        "config": _resolved(args),
        "itml": base_cfg.echo(),
        "descriptor_header": header,
        "n_items": len(mats),
        "k": k,
        "repeat_seeds": seeds,
        "representations": per_rep,
        "table": {rep: {"frobenius": b, "itml": l,
                        "itml_gain": None if (l is None or b is None) else l - b}
                  for rep, (b, l) in rows.items()},
        "backend": _backend.BACKEND,
        "version": __version__,
    }
    _write_reports(args.out, text, doc)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.n < 1 or args.k < 1 or args.per_class < 1 or args.spread < 0 or args.nuisance < 0:
        raise CliError(EXIT_INPUT, "n, k, per-class must be positive; spread, nuisance nonnegative")
    try:
        ds = synth_spd_clusters(args.n, args.k, args.per_class, args.spread, args.nuisance, args.seed)
    except ConfigError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    convention = (f"synthetic;n={args.n};k={args.k};per_class={args.per_class};"
                  f"spread={args.spread!r};nuisance={args.nuisance!r};seed={args.seed}")
    with open(out / "descriptors.txt", "w", encoding="utf-8") as fh:
        write_descriptors([(f"item{i}", P) for i, P in enumerate(ds.items)], fh, convention)
    with open(out / "labels.txt", "w", encoding="utf-8") as fh:
        write_labels(ds.labels, fh)
    if args.mode == "pairs":
        try:
            pd = synth_pairs(ds, args.n_similar, args.n_dissimilar, args.folds, args.seed)
        except ConfigError as exc:
            raise CliError(EXIT_INPUT, str(exc)) from None
        with open(out / "pairs.txt", "w", encoding="utf-8") as fh:
            write_pairs(pd.pairs, fh, pd.folds)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _add_itml_flags(p) -> None:
    p.add_argument("--gamma", type=float, default=PAPER_GAMMA, help="slack tradeoff (default 10^3.5)")
    p.add_argument("--a", type=float, default=5.0, help="percentile for the similarity threshold")
    p.add_argument("--b", type=float, default=95.0, help="percentile for the dissimilarity threshold")
    p.add_argument("--max-sweeps", type=int, default=None)
    p.add_argument("--conv-tol", type=float, default=1e-3)


def _add_mode_flags(p) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--learned", dest="mode", action="store_const", const="learned")
    g.add_argument("--unlearned", dest="mode", action="store_const", const="unlearned")
    g.add_argument("--both", dest="mode", action="store_const", const="both")
    p.set_defaults(mode="both")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=_threads, default=argparse.SUPPRESS)
    common.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="spdmetric", description="Log-Euclidean metric learning for SPD matrices.",
        epilog="exit codes: 0 ok, 2 input/parse, 3 internal, 4 shape/config, 5 solver/protocol")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    parser.add_argument("--threads", type=_threads, default=1, help="worker threads or 'auto'")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="images -> covariance descriptors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resize", type=_size, default=(64, 64), help="WxH or 'none' (default 64x64)")
    p.add_argument("--epsilon", type=float, default=1e-6, help="relative ridge coefficient")
    p.add_argument("--biased", action="store_true", help="divide by N instead of N-1")
    p.add_argument("--labels-out", default=None, help="also write manifest labels here")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("dist", parents=[common], help="distance between two matrix files")
    p.add_argument("--kind", required=True, choices=list(KIND_NAMES) + ["learned"])
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--model", default=None)
    p.set_defaults(handler=cmd_dist)

    p = sub.add_parser("learn", parents=[common], help="learn a metric with ITML")
    p.add_argument("--descriptors", required=True)
    p.add_argument("--constraints", required=True)
    p.add_argument("--representation", choices=REPRESENTATIONS, default="log-euclidean")
    _add_itml_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_learn)

    p = sub.add_parser("match-eval", parents=[common], help="k-fold pair matching evaluation")
    p.add_argument("--descriptors", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--representations", type=_reps, default=list(REPRESENTATIONS))
    p.add_argument("--kinds", type=lambda v: [k for k in v.split(",") if k] if v != "none" else [],
                   default=list(KIND_NAMES), help="fixed distances to report, or 'none'")
    _add_mode_flags(p)
    _add_itml_flags(p)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(handler=cmd_match_eval)

    p = sub.add_parser("cluster-eval", parents=[common], help="semi-supervised K-means evaluation")
    p.add_argument("--descriptors", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--train-fraction", type=float, default=0.1)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--representations", type=_reps, default=list(REPRESENTATIONS))
    p.add_argument("--gamma-grid", type=_floats, default=_floats(DEFAULT_GAMMA_GRID))
    _add_mode_flags(p)
    _add_itml_flags(p)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(handler=cmd_cluster_eval)

    p = sub.add_parser("synth", parents=[common], help="synthetic labeled SPD data")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--spread", type=float, default=0.25)
    p.add_argument("--nuisance", type=float, default=1.5)
    p.add_argument("--mode", choices=["cluster", "pairs"], default="cluster")
    p.add_argument("--n-similar", type=int, default=300)
    p.add_argument("--n-dissimilar", type=int, default=300)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    _announce(args)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ShapeError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except (NumericalError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SpdMetricError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
