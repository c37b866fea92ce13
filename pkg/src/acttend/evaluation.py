"""Metrics and experiment runners: dimension sweep, MNIST mixtures, edge grid search.

Runners return a :class:`SweepReport`: a flat list of cells, each carrying the
seed and config needed to recompute it on its own (see :func:`rerun_cell`).
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import baselines, nn
from .datagen import GenConfig, derive_seed, gen_corpus, standardize
from .graphrep import EdgeStrategy, GraphConfig, LshConfig, graph_for, node_features
from .mnist import MixSpec, MnistPools, Variant, mix

log = logging.getLogger(__name__)

HOPKINS_THRESHOLDS = tuple(round(0.6 + 0.05 * i, 2) for i in range(7))
SILHOUETTE_THRESHOLDS = tuple(round(0.3 + 0.05 * i, 2) for i in range(10))
SWEEP_DIMS = (2, 3, 5, 10, 20, 30, 50)
GRID_PCTS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99)
GRID_SIGMAS = (0.5, 1.0, 2.0, 5.0, 10.0)
GRID_STRATEGIES = (
    EdgeStrategy("unweighted", None),
    EdgeStrategy("euclidean", None),
    EdgeStrategy("cosine", None),
) + tuple(EdgeStrategy("rbf", s) for s in GRID_SIGMAS)
METHODS = ("gnn", "hopkins", "silhouette")


@dataclass
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compute_metrics(predictions: Sequence[bool], labels: Sequence[bool]) -> Metrics:
    pred = np.asarray(predictions, dtype=bool)
    true = np.asarray(labels, dtype=bool)
    if pred.shape != true.shape:
        raise ValueError(f"predictions ({pred.shape}) and labels ({true.shape}) differ in length")
    if pred.size == 0:
        raise ValueError("cannot compute metrics on an empty set")
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    tn = int(np.sum(~pred & ~true))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(tp, fp, fn, tn, (tp + tn) / pred.size, precision, recall, f1)


@dataclass
class SweepReport:
    name: str
    cells: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def select(self, **match) -> list[dict]:
        return [c for c in self.cells if all(c.get(k) == v for k, v in match.items())]

    def to_json(self, path: str | Path | None = None) -> str:
        nested: dict = {}
        for c in self.cells:
            nested.setdefault(c["method"], []).append(c)
        text = json.dumps({"name": self.name, "config": self.config, "results": nested}, indent=1)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def to_csv(self, path: str | Path | None = None) -> str:
        keys: list[str] = []
        for c in self.cells:
            keys += [k for k in c if k not in keys and not isinstance(c[k], (dict, list))]
        buf = io.StringIO()
        buf.write(f"# config: {json.dumps(self.config, sort_keys=True)}\n")
        writer = csv.DictWriter(buf, fieldnames=keys, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for c in self.cells:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in c.items() if k in keys})
        if path is not None:
            Path(path).write_text(buf.getvalue())
        return buf.getvalue()


# ---------------------------------------------------------------- scoring


def graph_corpus(datasets, gcfg: GraphConfig) -> list[tuple]:
    return [(graph_for(ds.points, gcfg), bool(ds.label)) for ds in datasets]


def train_model(
    n_datasets: int,
    dims: Sequence[int],
    gen_cfg: GenConfig | None = None,
    gcfg: GraphConfig | None = None,
    tcfg: nn.TrainConfig | None = None,
    master_seed: int = 0,
) -> tuple[nn.ModelParams, nn.TrainLog]:
    """Generate a synthetic corpus, build its graphs and fit a model on it.

    The graph config and corpus provenance are stored in ``params.extra`` so a
    checkpoint knows how its inputs were built.
    """
    gen_cfg = gen_cfg or GenConfig()
    gcfg = gcfg or GraphConfig()
    tcfg = tcfg or nn.TrainConfig(seed=derive_seed(master_seed, 7))
    corpus = graph_corpus(gen_corpus(n_datasets, list(dims), gen_cfg, master_seed), gcfg)
    params, tlog = nn.train(corpus, tcfg)
    params.extra = {
        "graph_config": gcfg.to_dict(),
        "train_corpus": {
            "n_datasets": n_datasets,
            "dims": list(dims),
            "gen_config": gen_cfg.to_dict(),
            "master_seed": master_seed,
        },
        "train_config": tcfg.to_dict(),
    }
    return params, tlog


def graph_config_of(params: nn.ModelParams) -> GraphConfig:
    cfg = params.extra.get("graph_config")
    return GraphConfig.from_dict(cfg) if cfg else GraphConfig()


def score_points(
    points: np.ndarray,
    methods: Sequence[str],
    model: nn.ModelParams | None,
    gcfg: GraphConfig,
    seed: int,
) -> dict[str, float]:
    """Raw detector scores: GNN probability, Hopkins statistic, best silhouette."""
    out = {}
    if "gnn" in methods:
        out["gnn"] = nn.gcn_forward(graph_for(points, gcfg), model)
    x = standardize(points) if gcfg.standardize else np.asarray(points, dtype=np.float64)
    if "hopkins" in methods:
        out["hopkins"] = baselines.hopkins_statistic(x, seed=derive_seed(seed, 1)).score
    if "silhouette" in methods:
        out["silhouette"] = baselines.silhouette_best(x, seed=derive_seed(seed, 2))[0]
    return out


def _thresholds_for(method, thresholds_h, thresholds_s):
    return {"gnn": (0.5,), "hopkins": tuple(thresholds_h), "silhouette": tuple(thresholds_s)}[method]


def _model_for(model, dim):
    if isinstance(model, Mapping):
        return model[dim]
    return model


# ---------------------------------------------------------------- dimension sweep


def _dimension_cell_scores(dim, n_test, gen_cfg, model, methods, seed):
    corpus = gen_corpus(n_test, [dim], gen_cfg, seed)
    model = _model_for(model, dim) if "gnn" in methods else None
    gcfg = graph_config_of(model) if model is not None else GraphConfig()
    scores = {m: [] for m in methods}
    for ds in corpus:
        s = score_points(ds.points, methods, model, gcfg, ds.seed)
        for m in methods:
            scores[m].append(s[m])
    return scores, [bool(ds.label) for ds in corpus]


def _metric_cells(base: dict, method, scores, labels, thresholds):
    cells = []
    for t in thresholds:
        pred = [s >= t for s in scores]
        cells.append({**base, "method": method, "threshold": t, **compute_metrics(pred, labels).to_dict()})
    return cells


def run_dimension_sweep(
    dims: Sequence[int] = SWEEP_DIMS,
    n_test: int = 200,
    model: nn.ModelParams | Mapping[int, nn.ModelParams] | None = None,
    thresholds_h: Sequence[float] = HOPKINS_THRESHOLDS,
    thresholds_s: Sequence[float] = SILHOUETTE_THRESHOLDS,
    master_seed: int = 0,
    gen_cfg: GenConfig | None = None,
    methods: Sequence[str] = METHODS,
    jobs: int = 1,
) -> SweepReport:
    """Per dimension: a fresh balanced test corpus scored by every method.

    ``model`` is one checkpoint for all dims or a ``{dim: params}`` mapping.
    Baselines get one cell per threshold; the GNN one cell at 0.5.
    """
    gen_cfg = gen_cfg or GenConfig()
    methods = tuple(methods)
    if "gnn" in methods and model is None:
        raise ValueError("run_dimension_sweep needs a model when 'gnn' is among the methods")
    seeds = {d: derive_seed(master_seed, d) for d in dims}
    args = [(d, n_test, replace(gen_cfg, dim=d), model, methods, seeds[d]) for d in dims]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_dimension_cell_scores, *zip(*args)))
    else:
        results = [_dimension_cell_scores(*a) for a in args]
    report = SweepReport(
        "dimension_sweep",
        config={
            "dims": list(dims),
            "n_test": n_test,
            "gen_config": gen_cfg.to_dict(),
            "methods": list(methods),
            "thresholds_hopkins": list(thresholds_h),
            "thresholds_silhouette": list(thresholds_s),
            "master_seed": master_seed,
        },
    )
    for d, (scores, labels) in zip(dims, results):
        base = {"dim": d, "seed": seeds[d], "n_test": n_test}
        for m in methods:
            report.cells += _metric_cells(base, m, scores[m], labels, _thresholds_for(m, thresholds_h, thresholds_s))
    return report


def best_cells(report: SweepReport, key: str = "accuracy", axis: str = "dim") -> dict[tuple, dict]:
    """The best-``key`` threshold cell per ``(method, axis value)``; ties keep the lower threshold."""
    best: dict[tuple, dict] = {}
    for c in report.cells:
        k = (c["method"], c[axis])
        if k not in best or c[key] > best[k][key]:
            best[k] = c
    return best


def summary_rows(report: SweepReport) -> list[dict]:
    rows = []
    for (method, dim), c in sorted(best_cells(report).items(), key=lambda kv: (kv[0][1], METHODS.index(kv[0][0]))):
        rows.append({k: c[k] for k in ("dim", "method", "threshold", "accuracy", "f1", "precision", "recall")})
    return rows


def rerun_cell(cell: dict, report_config: dict, model=None) -> dict:
    """Recompute one dimension-sweep cell from its recorded seed and config."""
    gen_cfg = GenConfig(**{**report_config["gen_config"], "dim": cell["dim"]})
    scores, labels = _dimension_cell_scores(cell["dim"], cell["n_test"], gen_cfg, model, (cell["method"],), cell["seed"])
    base = {"dim": cell["dim"], "seed": cell["seed"], "n_test": cell["n_test"]}
    return _metric_cells(base, cell["method"], scores[cell["method"]], labels, [cell["threshold"]])[0]


# ---------------------------------------------------------------- MNIST mixtures


P_GRID = tuple(range(0, 101, 10))


def mnist_spec_grid(variant: Variant | int, p_grid: Sequence[float] = P_GRID, master_seed: int = 0) -> list[MixSpec]:
    return [MixSpec(Variant(variant), p, seed=derive_seed(master_seed, int(round(p * 100)))) for p in p_grid]


def detection_onset(ps: Sequence[float], decisions: Sequence[bool]) -> dict:
    """First positive ``p``, whether it stays positive afterwards, and the stable onset.

    The stable onset is the smallest ``p`` from which every decision is positive
    (``None`` if the last decision is negative).
    """
    order = np.argsort(ps)
    ps = [ps[i] for i in order]
    dec = [bool(decisions[i]) for i in order]
    first = next((p for p, d in zip(ps, dec) if d), None)
    stable = None
    for p, d in zip(reversed(ps), reversed(dec)):
        if not d:
            break
        stable = p
    return {"first_positive": first, "stable_onset": stable, "unstable": first is not None and first != stable}


def run_mnist_experiment(
    pools: MnistPools,
    specs: Sequence[MixSpec],
    model: nn.ModelParams,
    thresholds_h: Sequence[float] = HOPKINS_THRESHOLDS,
    thresholds_s: Sequence[float] = SILHOUETTE_THRESHOLDS,
    methods: Sequence[str] = METHODS,
    master_seed: int = 0,
) -> SweepReport:
    """Score every mixture; cells hold raw scores, decisions and per-method onsets."""
    gcfg = graph_config_of(model)
    report = SweepReport(
        "mnist",
        config={
            "variants": sorted({s.variant.value for s in specs}),
            "specs": [{"variant": s.variant.value, "p": s.p_percent, "seed": s.seed} for s in specs],
            "thresholds_hopkins": list(thresholds_h),
            "thresholds_silhouette": list(thresholds_s),
            "master_seed": master_seed,
            "graph_config": gcfg.to_dict(),
        },
    )
    by_variant: dict[int, list] = {}
    for spec in specs:
        ds = mix(pools.structured, pools.noise, spec)
        s = score_points(ds.points, methods, model, gcfg, spec.seed)
        by_variant.setdefault(spec.variant.value, []).append((spec, ds, s))
        for m in methods:
            for t in _thresholds_for(m, thresholds_h, thresholds_s):
                report.cells.append(
                    {
                        "kind": "score",
                        "variant": spec.variant.value,
                        "p": spec.p_percent,
                        "n_points": ds.n,
                        "method": m,
                        "threshold": t,
                        "score": s[m],
                        "decision": bool(s[m] >= t),
                        "truth": bool(ds.label),
                        "seed": spec.seed,
                    }
                )
    for variant, rows in by_variant.items():
        ps = [spec.p_percent for spec, _, _ in rows]
        truth = [bool(ds.label) for _, ds, _ in rows]
        for m in methods:
            for t in _thresholds_for(m, thresholds_h, thresholds_s):
                dec = [s[m] >= t for _, _, s in rows]
                report.cells.append(
                    {
                        "kind": "onset",
                        "variant": variant,
                        "method": m,
                        "threshold": t,
                        **detection_onset(ps, dec),
                        "accuracy": compute_metrics(dec, truth).accuracy,
                    }
                )
    return report


def best_onsets(report: SweepReport, variant: int) -> dict[str, dict]:
    """Per method, the onset cell of its most accurate threshold (ties -> earliest stable onset)."""
    best: dict[str, dict] = {}
    for c in report.select(kind="onset", variant=variant):
        key = (c["accuracy"], -_onset_value(c))
        cur = best.get(c["method"])
        if cur is None or key > (cur["accuracy"], -_onset_value(cur)):
            best[c["method"]] = c
    return best


def _onset_value(cell) -> float:
    return np.inf if cell["stable_onset"] is None else cell["stable_onset"]


# ---------------------------------------------------------------- grid search


@dataclass(frozen=True)
class GridBudget:
    """Fixed per-cell training budget for the edge-strategy grid search."""

    n_train: int = 200
    n_test: int = 200
    dim: int = 2
    n_points: tuple[int, int] = (100, 200)
    epochs: int = 20

    def to_dict(self) -> dict:
        return {**self.__dict__, "n_points": list(self.n_points)}


def _grid_cell(strategy, pct, train_sets, test_sets, train_feats, test_feats, lsh, tcfg):
    gcfg = GraphConfig(lsh=lsh, strategy=strategy, neighbor_pct=pct)
    train = [(graph_for(d.points, gcfg, f), bool(d.label)) for d, f in zip(train_sets, train_feats)]
    test = [graph_for(d.points, gcfg, f) for d, f in zip(test_sets, test_feats)]
    params, _ = nn.train(train, tcfg)
    _, acc = nn.evaluate(test, [bool(d.label) for d in test_sets], params)
    return acc


def _grid_feats(datasets, lsh):
    return [node_features(standardize(d.points), lsh) for d in datasets]


def run_grid_search(
    strategies: Sequence[EdgeStrategy] = GRID_STRATEGIES,
    pcts: Sequence[float] = GRID_PCTS,
    budget: GridBudget | None = None,
    gen_cfg: GenConfig | None = None,
    tcfg: nn.TrainConfig | None = None,
    master_seed: int = 0,
    jobs: int = 1,
) -> SweepReport:
    """Train and test a fresh model for every ``(strategy, pct)`` cell.

    All cells share the same train/test corpora and initialisation seed, so
    differences between cells come from the graph construction alone.
    """
    budget = budget or GridBudget()
    gen_cfg = replace(gen_cfg or GenConfig(), dim=budget.dim, n_points=budget.n_points)
    train_seed, test_seed = derive_seed(master_seed, 0), derive_seed(master_seed, 1)
    tcfg = tcfg or nn.TrainConfig(epochs=budget.epochs, seed=derive_seed(master_seed, 2))
    lsh = GraphConfig().lsh
    train_sets = gen_corpus(budget.n_train, [budget.dim], gen_cfg, train_seed)
    test_sets = gen_corpus(budget.n_test, [budget.dim], gen_cfg, test_seed)
    train_feats, test_feats = _grid_feats(train_sets, lsh), _grid_feats(test_sets, lsh)
    grid = [(s, p) for s in strategies for p in pcts]
    common = (train_sets, test_sets, train_feats, test_feats, lsh, tcfg)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            futures = [ex.submit(_grid_cell, s, p, *common) for s, p in grid]
            accs = [f.result() for f in futures]
    else:
        accs = []
        for s, p in grid:
            accs.append(_grid_cell(s, p, *common))
            log.info("grid %s pct=%.2f acc=%.3f", s.name, p, accs[-1])
    report = SweepReport(
        "grid_search",
        config={
            "budget": budget.to_dict(),
            "gen_config": gen_cfg.to_dict(),
            "train_config": tcfg.to_dict(),
            "lsh": lsh.to_dict(),
            "train_seed": train_seed,
            "test_seed": test_seed,
            "master_seed": master_seed,
        },
    )
    for (s, p), acc in zip(grid, accs):
        report.cells.append({"method": "gnn", "strategy": s.name, "neighbor_pct": p, "accuracy": acc, "seed": master_seed})
    return report


def rerun_grid_cell(cell: dict, report_config: dict) -> dict:
    """Recompute one grid-search cell from the report's recorded seeds and config."""
    budget_d = report_config["budget"]
    budget = GridBudget(**{**budget_d, "n_points": tuple(budget_d["n_points"])})
    gen_cfg = GenConfig(**report_config["gen_config"])
    tcfg = nn.TrainConfig(**report_config["train_config"])
    lsh = LshConfig(**report_config["lsh"])
    train_sets = gen_corpus(budget.n_train, [budget.dim], gen_cfg, report_config["train_seed"])
    test_sets = gen_corpus(budget.n_test, [budget.dim], gen_cfg, report_config["test_seed"])
    strategy = EdgeStrategy.parse(cell["strategy"])
    acc = _grid_cell(
        strategy, cell["neighbor_pct"], train_sets, test_sets, _grid_feats(train_sets, lsh), _grid_feats(test_sets, lsh), lsh, tcfg
    )
    return {**cell, "accuracy": acc}


def heatmap_csv(report: SweepReport, path: str | Path | None = None) -> str:
    """Strategies as rows, neighbour percentages (as integers) as columns."""
    pcts = sorted({c["neighbor_pct"] for c in report.cells})
    strategies = list(dict.fromkeys(c["strategy"] for c in report.cells))
    acc = {(c["strategy"], c["neighbor_pct"]): c["accuracy"] for c in report.cells}
    lines = ["strategy," + ",".join(str(int(round(p * 100))) for p in pcts)]
    for s in strategies:
        lines.append(s + "," + ",".join(repr(acc.get((s, p), float("nan"))) for p in pcts))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
