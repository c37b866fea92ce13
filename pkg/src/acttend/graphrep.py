"""Dataset -> graph conversion.

Node features come from random-hyperplane LSH neighbourhoods; edges come from an
exact KNN graph (symmetrised) weighted by one of four strategies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .datagen import standardize

EDGE_KINDS = ("unweighted", "euclidean", "cosine", "rbf")


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True)
class LshConfig:
    n_tables: int = 8
    n_bits: int = 10
    neighbor_pct: float = 0.1
    neighbor_cap: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_bits <= 32:
            raise ValueError(f"n_bits must be in [1, 32], got {self.n_bits}")
        if self.n_tables < 1:
            raise ValueError(f"n_tables must be >= 1, got {self.n_tables}")
        if not 0 < self.neighbor_pct <= 1:
            raise ValueError(f"neighbor_pct must be in (0, 1], got {self.neighbor_pct}")
        if self.neighbor_cap < 1:
            raise ValueError(f"neighbor_cap must be >= 1, got {self.neighbor_cap}")

    def query_limit(self, n: int) -> int:
        return min(math.ceil(self.neighbor_pct * n), self.neighbor_cap)

    def to_dict(self) -> dict:
        return {
            "n_tables": self.n_tables,
            "n_bits": self.n_bits,
            "neighbor_pct": self.neighbor_pct,
            "neighbor_cap": self.neighbor_cap,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class EdgeStrategy:
    kind: str = "rbf"
    sigma: float | None = 2.0

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in EDGE_KINDS:
            raise ValueError(f"unknown edge strategy {self.kind!r}; expected one of {EDGE_KINDS}")
        if kind == "rbf":
            if self.sigma is None or not self.sigma > 0:
                raise ValueError(f"rbf strategy needs sigma > 0, got {self.sigma}")
        elif self.sigma is not None:
            object.__setattr__(self, "sigma", None)

    @property
    def name(self) -> str:
        return f"rbf(sigma={self.sigma:g})" if self.kind == "rbf" else self.kind

    @classmethod
    def parse(cls, text: str) -> "EdgeStrategy":
        """Parse ``unweighted``, ``euclidean``, ``cosine``, ``rbf`` or ``rbf:<sigma>``/``rbf(sigma=<s>)``."""
        text = text.strip().lower()
        if text.startswith("rbf"):
            rest = text[3:].strip("():= ").replace("sigma", "").strip(":= ")
            return cls("rbf", float(rest) if rest else 2.0)
        return cls(text, None)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}


@dataclass
class LshIndex:
    points: np.ndarray
    cfg: LshConfig
    hyperplanes: np.ndarray  # (n_tables, n_bits, d)
    keys: np.ndarray  # (n_tables, n) uint64 sign-pattern codes
    buckets: list[dict[int, np.ndarray]]

    @property
    def n(self) -> int:
        return self.points.shape[0]


def lsh_index(points: np.ndarray, cfg: LshConfig) -> LshIndex:
    points = np.asarray(points, dtype=np.float64)
    n, d = points.shape
    if n < 2:
        raise ValueError(f"lsh_index needs n >= 2, got {n}")
    rng = np.random.default_rng(cfg.seed)
    planes = rng.standard_normal((cfg.n_tables, cfg.n_bits, d))
    bits = np.einsum("tbd,nd->tnb", planes, points) >= 0
    weights = np.uint64(1) << np.arange(cfg.n_bits, dtype=np.uint64)
    keys = (bits.astype(np.uint64) * weights).sum(axis=2, dtype=np.uint64)
    buckets = []
    for t in range(cfg.n_tables):
        table: dict[int, list[int]] = {}
        for i, key in enumerate(keys[t].tolist()):
            table.setdefault(key, []).append(i)
        buckets.append({k: np.asarray(v) for k, v in table.items()})
    return LshIndex(points, cfg, planes, keys, buckets)


def lsh_query_neighbors(index: LshIndex, i: int) -> list[tuple[int, float]]:
    """Nearest bucket-mates of node ``i``, sorted by (distance, id)."""
    if not 0 <= i < index.n:
        raise IndexError(f"node id {i} out of range [0, {index.n})")
    cand = set()
    for t, table in enumerate(index.buckets):
        cand.update(table[int(index.keys[t, i])].tolist())
    cand.discard(i)
    if not cand:
        return []
    ids = np.array(sorted(cand))
    dist = cdist(index.points[i : i + 1], index.points[ids])[0]
    order = np.argsort(dist, kind="stable")[: index.cfg.query_limit(index.n)]
    return [(int(ids[o]), float(dist[o])) for o in order]


def _same_bucket(keys: np.ndarray) -> np.ndarray:
    share = np.zeros((keys.shape[1], keys.shape[1]), dtype=bool)
    for row in keys:
        share |= row[:, None] == row[None, :]
    np.fill_diagonal(share, False)
    return share


def node_features(points: np.ndarray, cfg: LshConfig | None = None) -> np.ndarray:
    """Rows ``[mean neighbour distance, neighbour count, distance variance]``.

    Equivalent to calling :func:`lsh_query_neighbors` for every node, but
    vectorised over the whole point set.
    """
    cfg = cfg or LshConfig()
    index = lsh_index(points, cfg)
    n = index.n
    limit = cfg.query_limit(n)
    dist = cdist(index.points, index.points)
    dist[~_same_bucket(index.keys)] = np.inf
    order = np.argsort(dist, axis=1, kind="stable")[:, :limit]
    near = np.take_along_axis(dist, order, axis=1)
    valid = np.isfinite(near)
    count = valid.sum(axis=1)
    near = np.where(valid, near, 0.0)
    safe = np.maximum(count, 1)
    mean = near.sum(axis=1) / safe
    var = (np.where(valid, near - mean[:, None], 0.0) ** 2).sum(axis=1) / safe
    return np.column_stack([mean, count.astype(np.float64), var])


def knn_k(n: int, neighbor_pct: float) -> int:
    # half-up rounding, at least one neighbour
    return max(1, int(math.floor(neighbor_pct * (n - 1) + 0.5)))


def knn_edges(points: np.ndarray, neighbor_pct: float, dist: np.ndarray | None = None) -> np.ndarray:
    """Undirected KNN edge list ``(E, 2)`` with ``i < j``, sorted lexicographically."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        raise ValueError(f"knn_edges needs n >= 2, got {n}")
    if not 0 < neighbor_pct <= 1:
        raise ValueError(f"neighbor_pct must be in (0, 1], got {neighbor_pct}")
    k = knn_k(n, neighbor_pct)
    if dist is None:
        dist = cdist(points, points)
    dist = dist.copy()
    np.fill_diagonal(dist, np.inf)
    nbrs = np.argsort(dist, axis=1, kind="stable")[:, :k]
    adj = np.zeros((n, n), dtype=bool)
    adj[np.repeat(np.arange(n), k), nbrs.ravel()] = True
    adj |= adj.T
    i, j = np.nonzero(np.triu(adj, 1))
    return np.column_stack([i, j]).astype(np.int64)


def edge_weights(points: np.ndarray, edges: np.ndarray, strategy: EdgeStrategy) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= len(points)):
        raise IndexError("edge endpoint out of range")
    xi, xj = points[edges[:, 0]], points[edges[:, 1]]
    if strategy.kind == "unweighted":
        return np.ones(len(edges))
    if strategy.kind == "euclidean":
        return np.sqrt(((xi - xj) ** 2).sum(axis=1))
    if strategy.kind == "cosine":
        norms = np.linalg.norm(points, axis=1)
        zero = np.nonzero(norms[edges].min(axis=1) == 0)[0] if edges.size else []
        if len(zero):
            i, j = edges[zero[0]]
            node = int(i) if norms[i] == 0 else int(j)
            raise DegenerateInputError(f"cosine weight undefined: node {node} has zero norm")
        w = (xi * xj).sum(axis=1) / (norms[edges[:, 0]] * norms[edges[:, 1]])
        return np.clip(w, -1.0, 1.0)
    sq = ((xi - xj) ** 2).sum(axis=1)
    return np.exp(-sq / (2.0 * strategy.sigma**2))


@dataclass
class GraphRep:
    n_nodes: int
    node_features: np.ndarray
    edges: np.ndarray
    edge_weights: np.ndarray
    strategy: EdgeStrategy

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "node_features": self.node_features.tolist(),
            "edges": self.edges.tolist(),
            "weights": self.edge_weights.tolist(),
            "strategy": self.strategy.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GraphRep":
        strat = obj["strategy"]
        strategy = EdgeStrategy(**strat) if isinstance(strat, dict) else EdgeStrategy.parse(strat)
        return cls(
            n_nodes=int(obj["n_nodes"]),
            node_features=np.asarray(obj["node_features"], dtype=np.float64).reshape(-1, 3),
            edges=np.asarray(obj["edges"], dtype=np.int64).reshape(-1, 2),
            edge_weights=np.asarray(obj["weights"], dtype=np.float64),
            strategy=strategy,
        )

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "GraphRep":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class GraphConfig:
    """Everything needed to turn raw points into a :class:`GraphRep`."""

    lsh: LshConfig = LshConfig()
    strategy: EdgeStrategy = EdgeStrategy()
    neighbor_pct: float = 0.6
    standardize: bool = True

    def to_dict(self) -> dict:
        return {
            "lsh": self.lsh.to_dict(),
            "strategy": self.strategy.to_dict(),
            "neighbor_pct": self.neighbor_pct,
            "standardize": self.standardize,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GraphConfig":
        return cls(
            lsh=LshConfig(**obj["lsh"]),
            strategy=EdgeStrategy(**obj["strategy"]),
            neighbor_pct=float(obj["neighbor_pct"]),
            standardize=bool(obj.get("standardize", True)),
        )


def build_graph(
    dataset,
    lsh: LshConfig | None = None,
    strategy: EdgeStrategy | None = None,
    neighbor_pct: float = 0.6,
    features: np.ndarray | None = None,
) -> GraphRep:
    """Compose node features, KNN edges and edge weights for one dataset.

    ``dataset`` may be a :class:`~acttend.datagen.Dataset` or a raw matrix.
    Precomputed ``features`` skip the LSH step (they only depend on ``lsh``).
    """
    points = getattr(dataset, "points", dataset)
    points = np.asarray(points, dtype=np.float64)
    strategy = strategy or EdgeStrategy()
    if features is None:
        features = node_features(points, lsh or LshConfig())
    edges = knn_edges(points, neighbor_pct)
    weights = edge_weights(points, edges, strategy)
    return GraphRep(points.shape[0], features, edges, weights, strategy)


def graph_for(points: np.ndarray, cfg: GraphConfig | None = None, features: np.ndarray | None = None) -> GraphRep:
    """Standardise (per ``cfg``) and build the graph of a raw point matrix."""
    cfg = cfg or GraphConfig()
    points = getattr(points, "points", points)
    if cfg.standardize:
        points = standardize(points)
    return build_graph(points, cfg.lsh, cfg.strategy, cfg.neighbor_pct, features=features)
