"""Command-line front end.

    gccfp fit   --edges E --view V1 [--view V2 ...] --k K [--labels L] --out-dir OUT
    gccfp sweep --edges E --view V1 --k K --labels L --out-dir OUT [--alpha A ...] [--lambda L ...]
    gccfp synth --n 120 --k 3 --p-in 0.3 --p-out 0.02 --out-dir OUT
    gccfp eval  --assignments A --labels L [--out-dir OUT]

Every command writes ``manifest.json`` into its output directory. Errors go
to stderr as ``<ErrorClass>: <message>`` with exit status 1.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import evaluate, extract_clusters, read_labels, write_labels
from .exceptions import GCCFPError, ShapeError, ValidationError
from .factors import Hyperparams, load_factors, prepare_data, save_factors
from .graph import LoadOptions, load_graph
from .optimizer import fit_data, row_peakedness
from .synthetic import PlantedSpec, generate, write_dataset

ALPHA_GRID = [0.1, 0.5, 1, 5, 10, 20, 50, 100]
LAMBDA_GRID = [0.001, 0.01, 0.1, 1, 5, 10, 50, 100]
DEFAULT_SEED = 20240501


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def write_manifest(out_dir, command, config, inputs, outputs):
    """Record config, seed and content hashes of inputs and outputs."""
    payload = {
        "command": command,
        "version": __version__,
        "config": config,
        "inputs": {name: {"path": str(p), "sha256": sha256(p)} for name, p in inputs},
        "outputs": {str(Path(p).relative_to(out_dir)): sha256(p) for p in outputs},
    }
    write_json(Path(out_dir) / "manifest.json", payload)


def _existing(path):
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return p


def hyperparams_from(args, k=None) -> Hyperparams:
    return Hyperparams(
        alpha=args.alpha if not isinstance(args.alpha, list) else args.alpha[0],
        lam=args.lam if not isinstance(args.lam, list) else args.lam[0],
        delta=args.delta,
        k_clusters=args.k if k is None else k,
        s_dim=args.s,
        t_max=args.t_max,
        epsilon=args.epsilon,
        epsilon_mode=args.epsilon_mode,
        convergence_on=args.convergence_on,
        seed=args.seed,
    )


def _load(args):
    edges = _existing(args.edges)
    views = [_existing(v) for v in args.view]
    graph = load_graph(edges, views, LoadOptions(strict_binary=args.strict_binary))
    inputs = [("edges", edges)] + [(f"view_{i}", v) for i, v in enumerate(views, start=1)]
    labels = None
    if args.labels is not None:
        lp = _existing(args.labels)
        labels = read_labels(lp)
        if labels.size != graph.n_vertices:
            raise ShapeError(f"{lp}: {labels.size} labels for {graph.n_vertices} vertices")
        inputs.append(("labels", lp))
    return graph, labels, inputs


def cmd_fit(args) -> int:
    out = Path(args.out_dir)
    graph, labels, inputs = _load(args)
    hp = hyperparams_from(args)
    data = prepare_data(graph)
    init = None
    if args.resume is not None:
        rp = _existing(args.resume)
        init = load_factors(rp)
        inputs.append(("resume", rp))
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out / "checkpoints"
    written = []

    def checkpoint(it, fa):
        ckpt_dir.mkdir(exist_ok=True)
        p = ckpt_dir / f"factors_{it:05d}.txt"
        save_factors(p, fa)
        written.append(p)

    fa, trace = fit_data(data, hp, init=init, checkpoint=checkpoint, checkpoint_every=args.checkpoint_every)
    assign = extract_clusters(fa.v)

    paths = {
        "assignments": out / "assignments.txt",
        "trace": out / "trace.csv",
        "factors": out / "factors.txt",
        "report": out / "report.json",
    }
    write_labels(paths["assignments"], assign)
    trace.write_csv(paths["trace"])
    save_factors(paths["factors"], fa)

    report = {
        "n_vertices": graph.n_vertices,
        "n_edges": graph.n_edges,
        "n_features": graph.n_features,
        "n_views": graph.n_views,
        "hyperparams": hp.to_dict(),
        "iterations": trace.n_iterations,
        "converged": trace.converged,
        "stop_reason": trace.stop_reason,
        "threshold": trace.threshold,
        "initial_objective": trace.initial.as_dict(),
        "final_objective": trace.final.as_dict(),
        "row_peakedness_c": row_peakedness(fa.c),
        "row_peakedness_w": row_peakedness(fa.w),
        "zero_membership_rows": assign.n_zero_rows,
        "cluster_sizes": np.bincount(assign.labels, minlength=hp.k_clusters).tolist(),
    }
    if trace.message:
        report["message"] = trace.message
    if labels is not None:
        report.update(evaluate(assign, labels).to_dict())
    write_json(paths["report"], report)

    config = {"hyperparams": hp.to_dict(), "strict_binary": args.strict_binary,
              "checkpoint_every": args.checkpoint_every}
    # trace.csv carries wall-clock timings, so it is not hashed
    deterministic = [paths["assignments"], paths["factors"], paths["report"]] + written
    write_manifest(out, "fit", config, inputs, deterministic)
    print(json.dumps({k: report[k] for k in ("iterations", "converged", "stop_reason")
                      + (("nmi", "accuracy") if labels is not None else ())}, default=_jsonable))
    return 0


def _sweep_cell(payload):
    data, labels, hp = payload
    try:
        fa, trace = fit_data(data, hp)
        res = evaluate(extract_clusters(fa.v), labels)
        return {"nmi": res.nmi, "accuracy": res.accuracy, "iterations": trace.n_iterations,
                "stop_reason": trace.stop_reason, "objective": trace.final.total, "error": ""}
    except GCCFPError as exc:
        return {"nmi": "", "accuracy": "", "iterations": "", "stop_reason": "", "objective": "",
                "error": f"{type(exc).__name__}: {exc}"}


def cmd_sweep(args) -> int:
    alphas = args.alpha if isinstance(args.alpha, list) else [args.alpha]
    lams = args.lam if isinstance(args.lam, list) else [args.lam]
    if not alphas or not lams:
        raise ValidationError("sweep grids must be non-empty")
    out = Path(args.out_dir)
    graph, labels, inputs = _load(args)
    data = prepare_data(graph)
    base = hyperparams_from(args)
    cells = [(a, l) for a, l in itertools.product(alphas, lams)]
    payloads = [(data, labels, base.with_(alpha=float(a), lam=float(l))) for a, l in cells]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_cell, payloads))
    else:
        results = [_sweep_cell(p) for p in payloads]

    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    cols = ["alpha", "lambda", "nmi", "accuracy", "iterations", "stop_reason", "objective", "error"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        wr.writeheader()
        for (a, l), res in zip(cells, results):
            row = {"alpha": repr(float(a)), "lambda": repr(float(l))}
            row.update({k: (repr(v) if isinstance(v, float) else v) for k, v in res.items()})
            wr.writerow(row)
    config = {"hyperparams": base.to_dict(), "alpha_grid": alphas, "lambda_grid": lams,
              "strict_binary": args.strict_binary}
    write_manifest(out, "sweep", config, inputs, [path])
    n_err = sum(1 for r in results if r["error"])
    print(json.dumps({"cells": len(results), "failed": n_err}))
    return 0


def cmd_synth(args) -> int:
    feats = args.view_features or [8]
    noise = args.noise or [0.05]
    if len(noise) == 1:
        noise = noise * len(feats)
    if len(noise) != len(feats):
        raise ValidationError("--noise must be given once or once per --view-features")
    spec = PlantedSpec(args.n, args.k, args.p_in, args.p_out, tuple(zip(feats, noise)), args.seed)
    graph, labels = generate(spec)
    paths = write_dataset(args.out_dir, graph, labels)
    files = [paths["edges"], *paths["views"], paths["labels"]]
    config = {"n_vertices": spec.n_vertices, "k_clusters": spec.k_clusters, "p_in": spec.p_in,
              "p_out": spec.p_out, "views": [list(v) for v in spec.views], "seed": spec.seed}
    write_manifest(args.out_dir, "synth", config, [], files)
    print(json.dumps({"n_vertices": graph.n_vertices, "n_edges": graph.n_edges,
                      "views": graph.view_sizes}))
    return 0


def cmd_eval(args) -> int:
    ap = _existing(args.assignments)
    lp = _existing(args.labels)
    pred = read_labels(ap)
    truth = read_labels(lp)
    if pred.size != truth.size:
        raise ShapeError(f"{pred.size} assignments vs {truth.size} labels")
    report = evaluate(pred, truth)
    text = report.to_json()
    print(text)
    if args.out_dir is not None:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.to_json(out / "report.json")
        write_manifest(out, "eval", {}, [("assignments", ap), ("labels", lp)], [out / "report.json"])
    return 0


def _add_data_args(p, labels_required=False):
    p.add_argument("--edges", required=True, help="edge list file")
    p.add_argument("--view", action="append", required=True,
                   help="feature view file; repeat in view order")
    p.add_argument("--labels", required=labels_required, help="ground-truth labels file")
    p.add_argument("--strict-binary", action="store_true", help="reject non-binary feature values")


def _add_model_args(p, grid=False):
    if grid:
        p.add_argument("--alpha", type=float, nargs="+", default=list(ALPHA_GRID))
        p.add_argument("--lambda", dest="lam", type=float, nargs="+", default=list(LAMBDA_GRID))
    else:
        p.add_argument("--alpha", type=float, default=5.0)
        p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e5)
    p.add_argument("--k", type=int, required=True, help="number of clusters")
    p.add_argument("--s", type=int, default=None, help="propagation latent size (default: K)")
    p.add_argument("--t-max", type=int, default=300)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--epsilon-mode", choices=["relative", "absolute"], default="relative")
    p.add_argument("--convergence-on", choices=["penalized", "objective"], default="penalized")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)


def build_parser():
    parser = argparse.ArgumentParser(prog="gccfp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the model and extract clusters")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", help="factor file to start from")
    p.add_argument("--checkpoint-every", type=int, default=50)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="grid over alpha and lambda")
    _add_data_args(p, labels_required=True)
    _add_model_args(p, grid=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a planted-partition dataset")
    p.add_argument("--n", type=int, default=120)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--p-in", type=float, default=0.3)
    p.add_argument("--p-out", type=float, default=0.02)
    p.add_argument("--view-features", type=int, action="append",
                   help="features per cluster for one view; repeat for more views")
    p.add_argument("--noise", type=float, action="append", help="bit-flip probability per view")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score saved assignments against labels")
    p.add_argument("--assignments", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GCCFPError, OSError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
