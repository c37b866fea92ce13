"""``acttend`` command line: gen, train, assess, bench {dims, mnist, grid}.

Exit codes: 0 success, 1 runtime error, 2 usage error (bad flags, missing output dir).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import baselines, evaluation, nn
from .datagen import (
    ConfigError,
    GenConfig,
    derive_seed,
    gen_clustered,
    gen_uniform,
    read_dataset,
    standardize,
    write_dataset,
)
from .graphrep import EdgeStrategy, GraphConfig, LshConfig, graph_for
from .mnist import find_idx_files, load_idx, prepare_pools

log = logging.getLogger("acttend")


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _strategy(text: str) -> EdgeStrategy:
    try:
        return EdgeStrategy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _out_path(path: str) -> Path:
    p = Path(path)
    if not p.parent.exists():
        raise UsageError(f"output directory {p.parent} does not exist")
    return p


def _out_dir(path: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"output directory {p} does not exist")
    return p


def _add_gen_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("synthetic generator")
    g.add_argument("--n-min", type=_positive_int, default=100)
    g.add_argument("--n-max", type=_positive_int, default=500)
    g.add_argument("--k-min", type=_positive_int, default=2)
    g.add_argument("--k-max", type=_positive_int, default=6)
    g.add_argument("--std-min", type=float, default=0.05)
    g.add_argument("--std-max", type=float, default=0.5)
    g.add_argument("--halfwidth", type=float, default=1.0)


def _gen_cfg(args, dim: int = 2) -> GenConfig:
    return GenConfig(
        n_points=(args.n_min, args.n_max),
        dim=dim,
        k_clusters=(args.k_min, args.k_max),
        cluster_std=(args.std_min, args.std_max),
        box_halfwidth=args.halfwidth,
    )


def _add_graph_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("graph construction")
    g.add_argument("--strategy", type=_strategy, default=EdgeStrategy("rbf", 2.0), help="unweighted | euclidean | cosine | rbf:<sigma> (default rbf:2)")
    g.add_argument("--neighbor-pct", type=float, default=0.6, help="fraction of nearest neighbours connected (default 0.6)")
    g.add_argument("--lsh-tables", type=_positive_int, default=8)
    g.add_argument("--lsh-bits", type=_positive_int, default=10)
    g.add_argument("--lsh-pct", type=float, default=0.1)
    g.add_argument("--lsh-cap", type=_positive_int, default=50)


def _graph_cfg(args, seed: int) -> GraphConfig:
    return GraphConfig(
        lsh=LshConfig(args.lsh_tables, args.lsh_bits, args.lsh_pct, args.lsh_cap, seed=0),
        strategy=args.strategy,
        neighbor_pct=args.neighbor_pct,
    )


def _add_train_flags(p: argparse.ArgumentParser, n_default: int = 2000):
    g = p.add_argument_group("training")
    g.add_argument("--n-datasets", type=_positive_int, default=n_default, help="training corpus size (even)")
    g.add_argument("--epochs", type=_positive_int, default=100)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--batch-size", type=_positive_int, default=16)
    g.add_argument("--hidden", type=_positive_int, default=32)


def _train_cfg(args, seed: int) -> nn.TrainConfig:
    return nn.TrainConfig(hidden_dim=args.hidden, learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=seed)


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    if args.dim < 1 or args.n < 2:
        raise UsageError(f"--n must be >= 2 and --dim >= 1 (got n={args.n}, dim={args.dim})")
    out = _out_path(args.out)
    if args.uniform:
        ds = gen_uniform(args.n, args.dim, args.halfwidth, seed=args.seed)
    else:
        cfg = GenConfig(
            n_points=(args.n, args.n),
            dim=args.dim,
            k_clusters=(args.k_min, args.k_max),
            cluster_std=(args.std_min, args.std_max),
            box_halfwidth=args.halfwidth,
            seed=args.seed,
        )
        ds = gen_clustered(cfg)
    write_dataset(ds, out)
    log.info("wrote %s (%d x %d, label=%s)", out, ds.n, ds.dim, ds.label)
    return 0


def cmd_train(args) -> int:
    out = _out_path(args.out)
    log_path = _out_path(args.log) if args.log else out.with_suffix(".log.csv")
    gen_cfg = _gen_cfg(args)
    gcfg = _graph_cfg(args, args.seed)
    tcfg = _train_cfg(args, derive_seed(args.seed, 7))
    params, tlog = evaluation.train_model(args.n_datasets, args.dims, gen_cfg, gcfg, tcfg, master_seed=args.seed)
    nn.save_checkpoint(params, out)
    tlog.to_csv(log_path)
    final = tlog.epoch_accuracy[-1]
    print(json.dumps({"checkpoint": str(out), "log": str(log_path), "final_train_accuracy": final}))
    return 0


def _load_model(path) -> nn.ModelParams:
    return nn.load_checkpoint(path)


def cmd_assess(args) -> int:
    ds = read_dataset(args.data)
    params = _load_model(args.checkpoint)
    trained_dims = params.extra.get("train_corpus", {}).get("dims")
    if trained_dims and ds.dim not in trained_dims and not args.allow_dim_mismatch:
        raise nn.CheckpointFormatError(
            f"data has dim {ds.dim} but checkpoint was trained on dims {trained_dims} (pass --allow-dim-mismatch to override)"
        )
    gcfg = evaluation.graph_config_of(params)
    results = []
    prob = nn.gcn_forward(graph_for(ds.points, gcfg), params)
    results.append({"method": "gnn", "score": prob, "decision": prob >= args.threshold, "threshold": args.threshold})
    if args.with_baselines:
        x = standardize(ds.points)
        if ds.n >= 10:
            h = baselines.hopkins_statistic(x, seed=derive_seed(args.seed, 1)).score
            results.append({"method": "hopkins", "score": h, "decision": h >= args.hopkins_threshold, "threshold": args.hopkins_threshold})
        s, k = baselines.silhouette_best(x, seed=derive_seed(args.seed, 2))
        results.append({"method": "silhouette", "score": s, "best_k": k, "decision": s >= args.silhouette_threshold, "threshold": args.silhouette_threshold})
    for r in results:
        print(json.dumps(r))
    if args.json:
        _out_path(args.json).write_text(json.dumps({"data": str(args.data), "checkpoint": str(args.checkpoint), "results": results}, indent=1) + "\n")
    return 0


def _bench_models(args, dims) -> dict[int, nn.ModelParams] | nn.ModelParams:
    if args.checkpoint:
        return _load_model(args.checkpoint)
    models = {}
    for d in dims:
        params, tlog = evaluation.train_model(
            args.n_datasets,
            [d],
            _gen_cfg(args, d),
            _graph_cfg(args, args.seed),
            _train_cfg(args, derive_seed(args.seed, 7, d)),
            master_seed=derive_seed(args.seed, 11, d),
        )
        log.info("trained dim=%d model, final train acc %.3f", d, tlog.epoch_accuracy[-1])
        models[d] = params
        if args.save_models:
            nn.save_checkpoint(params, Path(args.out_dir) / f"model_dim{d}.json")
    return models


def cmd_bench_dims(args) -> int:
    out_dir = _out_dir(args.out_dir)
    models = _bench_models(args, args.dims)
    report = evaluation.run_dimension_sweep(
        args.dims,
        args.n_test,
        models,
        args.hopkins_thresholds,
        args.silhouette_thresholds,
        master_seed=args.seed,
        gen_cfg=_gen_cfg(args),
        jobs=args.jobs,
    )
    report.config["cli"] = _echo(args)
    report.to_csv(out_dir / "dims.csv")
    report.to_json(out_dir / "dims.json")
    for row in evaluation.summary_rows(report):
        print(json.dumps(row))
    return 0


def cmd_bench_mnist(args) -> int:
    out_dir = _out_dir(args.out_dir)
    if args.mnist_dir:
        images_path, labels_path = find_idx_files(args.mnist_dir, args.split)
    elif args.images and args.labels:
        images_path, labels_path = Path(args.images), Path(args.labels)
    else:
        raise UsageError("bench mnist needs --mnist-dir or both --images and --labels")
    images, _ = load_idx(images_path, labels_path)
    model = _bench_models(args, [args.pca_dims])
    if isinstance(model, dict):
        model = model[args.pca_dims]
    report = evaluation.SweepReport("mnist")
    for variant in args.variant:
        pools = prepare_pools(images, args.pca_dims, fit_size=args.fit_size, seed=derive_seed(args.seed, 0))
        specs = evaluation.mnist_spec_grid(variant, args.p_grid, derive_seed(args.seed, variant))
        r = evaluation.run_mnist_experiment(pools, specs, model, args.hopkins_thresholds, args.silhouette_thresholds, master_seed=args.seed)
        report.cells += r.cells
        report.config.setdefault("runs", []).append(r.config)
        for method, cell in evaluation.best_onsets(r, variant).items():
            print(json.dumps({"variant": variant, **{k: cell[k] for k in ("method", "threshold", "first_positive", "stable_onset", "unstable", "accuracy")}}))
    report.config["cli"] = _echo(args)
    report.config["images"] = str(images_path)
    report.to_csv(out_dir / "mnist.csv")
    report.to_json(out_dir / "mnist.json")
    return 0


def cmd_bench_grid(args) -> int:
    out_dir = _out_dir(args.out_dir)
    strategies = [EdgeStrategy.parse(s) for s in args.strategies.split(",")] if args.strategies else list(evaluation.GRID_STRATEGIES)
    budget = evaluation.GridBudget(args.n_datasets, args.n_test, args.dim, (args.n_min, args.n_max), args.epochs)
    report = evaluation.run_grid_search(strategies, args.pcts, budget, master_seed=args.seed, jobs=args.jobs)
    report.config["cli"] = _echo(args)
    report.to_csv(out_dir / "grid.csv")
    report.to_json(out_dir / "grid.json")
    sys.stdout.write(evaluation.heatmap_csv(report, out_dir / "heatmap.csv"))
    return 0


def _echo(args) -> dict:
    out = {}
    for k, v in vars(args).items():
        if k == "func":
            continue
        if isinstance(v, EdgeStrategy):
            v = v.name
        out[k] = v
    return out


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acttend", description="Clustering-tendency assessment with a synthetically trained GCN.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate one synthetic dataset (CSV + JSON sidecar)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--clustered", action="store_true")
    kind.add_argument("--uniform", action="store_true")
    p.add_argument("--k-min", type=_positive_int, default=2)
    p.add_argument("--k-max", type=_positive_int, default=6)
    p.add_argument("--std-min", type=float, default=0.05)
    p.add_argument("--std-max", type=float, default=0.5)
    p.add_argument("--halfwidth", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="dataset.csv")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a GCN checkpoint on a synthetic corpus")
    p.add_argument("--dims", type=_int_list, default=[2])
    _add_gen_flags(p)
    _add_graph_flags(p)
    _add_train_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.json")
    p.add_argument("--log", default=None, help="training log CSV (default <out>.log.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("assess", help="assess one dataset CSV")
    p.add_argument("data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--with-baselines", action="store_true")
    p.add_argument("--hopkins-threshold", type=float, default=0.75)
    p.add_argument("--silhouette-threshold", type=float, default=0.5)
    p.add_argument("--allow-dim-mismatch", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", default=None, help="also write results to this JSON file")
    p.set_defaults(func=cmd_assess)

    bench = sub.add_parser("bench", help="run an experiment").add_subparsers(dest="bench", required=True)

    def common(bp, n_default):
        bp.add_argument("--checkpoint", default=None, help="use this model instead of training per dimension")
        bp.add_argument("--save-models", action="store_true")
        _add_gen_flags(bp)
        _add_graph_flags(bp)
        _add_train_flags(bp, n_default)
        bp.add_argument("--hopkins-thresholds", type=_float_list, default=list(evaluation.HOPKINS_THRESHOLDS))
        bp.add_argument("--silhouette-thresholds", type=_float_list, default=list(evaluation.SILHOUETTE_THRESHOLDS))
        bp.add_argument("--seed", type=int, default=0)
        bp.add_argument("--jobs", type=_positive_int, default=1)
        bp.add_argument("--out-dir", default=".")

    p = bench.add_parser("dims", help="dimension sweep (GNN vs Hopkins vs silhouette)")
    p.add_argument("--dims", type=_int_list, default=list(evaluation.SWEEP_DIMS))
    p.add_argument("--n-test", type=_positive_int, default=200)
    common(p, 2000)
    p.set_defaults(func=cmd_bench_dims)

    p = bench.add_parser("mnist", help="MNIST + uniform noise mixtures")
    p.add_argument("--variant", type=_int_list, default=[1, 2])
    p.add_argument("--mnist-dir", default=None)
    p.add_argument("--images", default=None)
    p.add_argument("--labels", default=None)
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--fit-size", type=int, default=10000)
    p.add_argument("--pca-dims", type=_positive_int, default=50)
    p.add_argument("--p-grid", type=_float_list, default=list(evaluation.P_GRID))
    common(p, 2000)
    p.set_defaults(func=cmd_bench_mnist)

    p = bench.add_parser("grid", help="edge strategy x neighbour percentage grid search")
    p.add_argument("--strategies", default=None, help="comma-separated, e.g. unweighted,rbf:2 (default: full grid)")
    p.add_argument("--pcts", type=_float_list, default=list(evaluation.GRID_PCTS))
    p.add_argument("--dim", type=_positive_int, default=2)
    p.add_argument("--n-test", type=_positive_int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--n-datasets", type=_positive_int, default=200, help="training corpus size per cell")
    p.add_argument("--n-min", type=_positive_int, default=100)
    p.add_argument("--n-max", type=_positive_int, default=200)
    p.add_argument("--epochs", type=_positive_int, default=20)
    p.set_defaults(func=cmd_bench_grid)
    return parser


def _setup_logging():
    level = os.environ.get("ACTTEND_LOG", "error").lower()
    logging.basicConfig(
        level={"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(level, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"acttend: usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported, nonzero exit
        log.debug("failure", exc_info=True)
        print(f"acttend: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
