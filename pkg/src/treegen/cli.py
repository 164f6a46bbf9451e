"""Command-line front end: gen, train, infer, project, eval, gradcheck, render.

Exit codes: 0 success, 1 I/O error, 2 validation error, 3 numerical failure.
Every subcommand with an output directory writes a resolved-config snapshot
beside its outputs, so a run directory is self-describing and re-runnable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import lsystem, metrics, raster, scorer
from .graph import GraphError, SpatialGraph, load_graph, save_graph
from .mst import EdgeProbabilities, project
from .scorer import NumericalError, TrainConfig
from .sfs import suppression_table

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3


def _say(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg)


def _snapshot(out_dir: str, resolved: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Resolve settings as defaults < config file < explicit flags."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise GraphError(f"unknown config keys: {sorted(unknown)}")
        resolved.update(file_cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            resolved[key] = val
    return resolved


# ---------------------------------------------------------------- gen

def cmd_gen(args) -> int:
    spec = lsystem.LSystemSpec.load(args.spec) if args.spec else lsystem.LSystemSpec()
    resolved = _merge_config(
        args,
        {
            "subcommand": "gen",
            "count": 100,
            "seed": 0,
            "render": False,
            "resample_px": None,
            "threads": 1,
        },
    )
    resolved["spec"] = spec.to_obj()
    _snapshot(args.out, resolved)
    lsystem.generate_dataset(
        spec,
        resolved["count"],
        resolved["seed"],
        args.out,
        render=resolved["render"],
        resample_interval_px=resolved["resample_px"],
        threads=resolved["threads"],
    )
    _say(args, f"generated {resolved['count']} samples in {args.out}")
    return EXIT_OK


def _load_dataset(data_dir: str) -> list[SpatialGraph]:
    manifest_path = os.path.join(data_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise GraphError(f"{data_dir}: missing manifest.json (not a dataset directory)")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    graphs = []
    for rec in manifest["samples"]:
        graphs.append(load_graph(os.path.join(data_dir, "graphs", f"{rec['index']:06d}.json")))
    return graphs


def _split(graphs, val_fraction: float, seed: int):
    rng = np.random.default_rng((seed, 3))
    order = rng.permutation(len(graphs))
    n_val = max(1, int(round(len(graphs) * val_fraction))) if val_fraction > 0 else 0
    val_idx = set(order[:n_val].tolist())
    train = [graphs[i] for i in range(len(graphs)) if i not in val_idx]
    val = [graphs[i] for i in sorted(val_idx)]
    return train, val


# ---------------------------------------------------------------- train

def cmd_train(args) -> int:
    resolved = _merge_config(
        args,
        {
            "subcommand": "train",
            "mode": "ours",
            "seed": 0,
            "lam": 10.0,
            "lr": 0.05,
            "momentum": 0.9,
            "epochs": 100,
            "hidden": 64,
            "sigma": 0.005,
            "val_fraction": 0.1,
        },
    )
    cfg = TrainConfig(
        lam=resolved["lam"],
        lr=resolved["lr"],
        momentum=resolved["momentum"],
        epochs=int(resolved["epochs"]),
        sigma=resolved["sigma"],
        seed=int(resolved["seed"]),
        mode=resolved["mode"],
        hidden=int(resolved["hidden"]),
    )
    _snapshot(args.out, resolved)
    graphs = _load_dataset(args.data)
    train_graphs, val_graphs = _split(graphs, resolved["val_fraction"], cfg.seed)
    train_instances = scorer.prepare_instances(train_graphs, cfg.sigma, cfg.seed)
    val_instances = scorer.prepare_instances(val_graphs, cfg.sigma, cfg.seed + 1)

    log: list[dict] = []
    models_dir = os.path.join(args.out, "models")
    logs_dir = os.path.join(args.out, "logs")
    os.makedirs(models_dir, exist_ok=True)
    os.makedirs(logs_dir, exist_ok=True)
    try:
        model = scorer.train(train_instances, val_instances, cfg, log=log)
    finally:
        with open(os.path.join(logs_dir, "train.jsonl"), "w", encoding="utf-8") as fh:
            for rec in log:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    scorer.save_model(model, os.path.join(models_dir, "model.json"))
    _say(args, f"trained {cfg.mode} model: {os.path.join(models_dir, 'model.json')}")
    return EXIT_OK


# ---------------------------------------------------------------- infer

def cmd_infer(args) -> int:
    resolved = _merge_config(
        args,
        {"subcommand": "infer", "mode": "ours", "seed": 0, "sigma": 0.005, "threads": 1},
    )
    _snapshot(args.out, resolved)
    model = scorer.load_model(args.model)
    graphs = _load_dataset(args.data)
    pred_dir = os.path.join(args.out, "pred")
    ref_dir = os.path.join(args.out, "ref")
    os.makedirs(pred_dir, exist_ok=True)
    os.makedirs(ref_dir, exist_ok=True)
    instances = scorer.prepare_instances(graphs, resolved["sigma"], int(resolved["seed"]))
    for idx, (coords, gt_edges) in enumerate(instances):
        pred = scorer.infer(model, coords, resolved["mode"])
        save_graph(pred, os.path.join(pred_dir, f"{idx:06d}.json"))
        save_graph(SpatialGraph(tuple(coords), gt_edges), os.path.join(ref_dir, f"{idx:06d}.json"))
    _say(args, f"wrote {len(instances)} predictions to {pred_dir}")
    return EXIT_OK


# ---------------------------------------------------------------- project

def cmd_project(args) -> int:
    probs = EdgeProbabilities.load(args.probs)
    edges, delta = project(probs)
    obj = {
        "n": probs.n,
        "edges": [[i, j] for i, j in sorted(edges)],
        "added": [[i, j] for i, j in sorted(delta.added)],
        "removed": [[i, j] for i, j in sorted(delta.removed)],
    }
    text = json.dumps(obj, indent=2) + "\n"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "projection.json"), "w", encoding="utf-8") as fh:
            fh.write(text)
        _say(args, f"wrote {os.path.join(args.out, 'projection.json')}")
    else:
        print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    resolved = _merge_config(
        args,
        {"subcommand": "eval", "k_points": metrics.DEFAULT_K, "topo_radius": metrics.DEFAULT_RADIUS},
    )
    samples: list[dict] = []
    report = metrics.evaluate_dataset(
        args.pred, args.gt, k=int(resolved["k_points"]), radius=resolved["topo_radius"]
        , samples_out=samples
    )
    if args.out:
        _snapshot(args.out, resolved)
        reports_dir = os.path.join(args.out, "reports")
        os.makedirs(reports_dir, exist_ok=True)
        metrics.write_report(report, samples, os.path.join(reports_dir, "report.json"))
        with open(os.path.join(reports_dir, "samples.jsonl"), "w", encoding="utf-8") as fh:
            for rec in samples:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    _say(args, json.dumps(report.to_obj(), indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- gradcheck

def cmd_gradcheck(args) -> int:
    from . import gradcheck

    seed = args.seed if args.seed is not None else 0
    trials = args.trials if args.trials is not None else 200
    tol = 1e-6

    print("suppression constants:")
    for lam, eps in suppression_table():
        print(f"  lambda={lam:<6g} exp(-lambda) = {eps}")

    result = gradcheck.check_sfs_gradients(trials, seed)
    reports = gradcheck.check_case_table(seed + 1, trials_per_case=50)
    print(f"\ncase table ({reports[0].trials} trials per case):")
    for rep in reports:
        status = "PASS" if rep.ok else "FAIL"
        print(
            f"  case {rep.case}: {status}  sign/zero pattern "
            f"{'ok' if rep.sign_ok else 'BAD'}, norm ordering "
            f"{'ok' if rep.norm_ok else 'BAD'}"
        )
    ok = result["max_rel_err"] <= tol and result["max_suppressed_grad"] == 0.0
    ok &= all(rep.ok for rep in reports)
    verdict = "PASS" if ok else "FAIL"
    print(f"\n{verdict}, max rel err = {result['max_rel_err']:.3e} (tolerance {tol:g})")
    return EXIT_OK if ok else EXIT_NUMERICAL


# ---------------------------------------------------------------- render

def cmd_render(args) -> int:
    g = load_graph(args.graph)
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.graph))[0]
    img = raster.rasterize(g, args.width, args.height, args.stroke)
    img.save(os.path.join(args.out, stem + ".png"))
    raster.write_svg(g, os.path.join(args.out, stem + ".svg"), args.width, args.height, args.stroke)
    _say(args, f"rendered {stem}.png / {stem}.svg in {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treegen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=out_required)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--quiet", action="store_true")
        p.add_argument("--config", default=None, help="JSON config file (flags override)")

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--spec", default=None, help="generator spec JSON (defaults built in)")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--render", action="store_const", const=True, default=None)
    p.add_argument("--resample-px", dest="resample_px", type=float, default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train an edge scorer")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=scorer.MODES, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="predict graphs for a dataset")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=scorer.MODES, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("project", help="MST-project an edge probability file")
    common(p, out_required=False)
    p.add_argument("--probs", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("eval", help="evaluate predictions against ground truth")
    common(p, out_required=False)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--k-points", dest="k_points", type=int, default=None)
    p.add_argument("--topo-radius", dest="topo_radius", type=float, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the suppression layer")
    common(p, out_required=False)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("render", help="render a graph file to PNG and SVG")
    common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--stroke", type=int, default=3)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
