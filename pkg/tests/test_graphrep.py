import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from acttend.datagen import GenConfig, gen_clustered, gen_uniform
from acttend.graphrep import (
    DegenerateInputError,
    EdgeStrategy,
    GraphConfig,
    GraphRep,
    LshConfig,
    build_graph,
    edge_weights,
    graph_for,
    knn_edges,
    knn_k,
    lsh_index,
    lsh_query_neighbors,
    node_features,
)

RBF2 = EdgeStrategy("rbf", 2.0)


# ---------------------------------------------------------------- LSH


def test_identical_points_share_keys():
    x = np.array([[1.0, -2.0, 0.5], [1.0, -2.0, 0.5], [3.0, 1.0, -1.0]])
    idx = lsh_index(x, LshConfig(n_tables=6, n_bits=12, seed=4))
    assert np.array_equal(idx.keys[:, 0], idx.keys[:, 1])


def test_antipodal_points_split_on_one_plane():
    x = np.array([[0.3, -1.2], [-0.3, 1.2]])
    idx = lsh_index(x, LshConfig(n_tables=1, n_bits=1, seed=0))
    assert idx.keys[0, 0] != idx.keys[0, 1]


def test_hyperplanes_deterministic():
    x = np.random.default_rng(0).standard_normal((20, 4))
    a = lsh_index(x, LshConfig(seed=9))
    b = lsh_index(x, LshConfig(seed=9))
    assert np.array_equal(a.hyperplanes, b.hyperplanes)
    assert np.array_equal(a.keys, b.keys)


def test_lsh_config_bounds():
    with pytest.raises(ValueError):
        LshConfig(n_bits=33)
    with pytest.raises(ValueError):
        LshConfig(neighbor_pct=0.0)


def test_two_identical_points_query():
    idx = lsh_index(np.array([[1.0, 1.0], [1.0, 1.0]]), LshConfig())
    assert lsh_query_neighbors(idx, 0) == [(1, 0.0)]
    assert lsh_query_neighbors(idx, 1) == [(0, 0.0)]


def test_query_invalid_id():
    idx = lsh_index(np.eye(3), LshConfig())
    with pytest.raises(IndexError):
        lsh_query_neighbors(idx, 3)


def test_query_sorted_and_limited():
    x = np.random.default_rng(1).standard_normal((300, 3))
    cfg = LshConfig(n_tables=8, n_bits=6, neighbor_pct=0.1, neighbor_cap=20, seed=2)
    idx = lsh_index(x, cfg)
    for i in range(0, 300, 17):
        res = lsh_query_neighbors(idx, i)
        d = [r[1] for r in res]
        assert d == sorted(d)
        assert len(res) <= cfg.query_limit(300) == 20
        assert i not in [r[0] for r in res]


def test_candidate_recall_against_exact_knn():
    x = np.random.default_rng(3).standard_normal((200, 2))
    cfg = LshConfig(n_tables=8, n_bits=8, seed=5)
    idx = lsh_index(x, cfg)
    limit = cfg.query_limit(200)
    dist = cdist(x, x)
    np.fill_diagonal(dist, np.inf)
    recalls = []
    for i in range(200):
        cand = set()
        for t, table in enumerate(idx.buckets):
            cand.update(table[int(idx.keys[t, i])].tolist())
        cand.discard(i)
        exact = set(np.argsort(dist[i], kind="stable")[:limit].tolist())
        recalls.append(len(exact & cand) / limit)
    assert np.mean(recalls) >= 0.5


# ---------------------------------------------------------------- node features


def test_features_of_identical_points():
    f = node_features(np.ones((12, 3)), LshConfig())
    assert np.all(f[:, 0] == 0) and np.all(f[:, 2] == 0)
    assert np.all(f[:, 1] >= 1)


def test_features_of_two_points_at_distance_five():
    # collinear with the origin, so every hyperplane gives them the same sign
    f = node_features(np.array([[3.0, 4.0], [6.0, 8.0]]), LshConfig())
    assert np.allclose(f, [[5.0, 1.0, 0.0], [5.0, 1.0, 0.0]], rtol=0, atol=1e-15)


def test_vectorised_features_match_per_node_queries():
    x = np.random.default_rng(7).standard_normal((150, 4))
    cfg = LshConfig(n_tables=5, n_bits=6, neighbor_pct=0.2, neighbor_cap=12, seed=3)
    f = node_features(x, cfg)
    idx = lsh_index(x, cfg)
    for i in range(len(x)):
        d = np.array([r[1] for r in lsh_query_neighbors(idx, i)])
        want = [d.mean(), len(d), d.var()] if len(d) else [0.0, 0.0, 0.0]
        assert np.allclose(f[i], want, rtol=1e-12, atol=1e-14)


def test_isolated_nodes_get_zero_rows():
    # many bits in high dimension: most points land alone
    x = np.random.default_rng(0).standard_normal((30, 50))
    f = node_features(x, LshConfig(n_tables=1, n_bits=32, seed=1))
    empty = f[:, 1] == 0
    assert empty.any()
    assert np.all(f[empty] == 0)


# ---------------------------------------------------------------- KNN edges


def brute_knn_edges(points, pct):
    n = len(points)
    k = max(1, math.floor(pct * (n - 1) + 0.5))
    edges = set()
    for i in range(n):
        ranked = sorted((math.sqrt(sum((a - b) ** 2 for a, b in zip(points[i], points[j]))), j) for j in range(n) if j != i)
        for _, j in ranked[:k]:
            edges.add((min(i, j), max(i, j)))
    return sorted(edges)


def test_collinear_three_points():
    x = np.array([[0.0], [1.0], [3.0]])
    assert knn_k(3, 0.5) == 1
    assert knn_edges(x, 0.5).tolist() == [[0, 1], [1, 2]]


def test_full_percentage_gives_complete_graph():
    x = np.random.default_rng(0).standard_normal((9, 2))
    assert len(knn_edges(x, 1.0)) == 9 * 8 // 2


def test_k_rounding():
    assert knn_k(4, 0.34) == 1
    assert knn_k(101, 0.6) == 60
    assert knn_k(2, 0.01) == 1


@pytest.mark.parametrize("trial", range(50))
def test_knn_matches_brute_force(trial):
    rng = np.random.default_rng(trial)
    n = int(rng.integers(2, 40))
    d = int(rng.integers(1, 5))
    x = rng.integers(-3, 4, size=(n, d)).astype(float) if trial % 2 else rng.standard_normal((n, d))
    pct = float(rng.uniform(0.01, 1.0))
    assert knn_edges(x, pct).tolist() == [list(e) for e in brute_knn_edges(x.tolist(), pct)]


# ---------------------------------------------------------------- edge weights


def test_rbf_weights():
    x = np.array([[1.0, 1.0], [1.0, 1.0], [3.0, 1.0]])
    w = edge_weights(x, np.array([[0, 1], [0, 2]]), RBF2)
    assert w[0] == 1.0
    assert w[1] == pytest.approx(math.exp(-4 / 8), rel=1e-15)
    assert w[1] == pytest.approx(0.60653, abs=1e-5)


def test_cosine_and_euclidean_weights():
    x = np.array([[0.0, 0.0], [3.0, 4.0], [1.0, 0.0], [0.0, 2.0]])
    assert edge_weights(x, np.array([[2, 3]]), EdgeStrategy("cosine"))[0] == 0.0
    assert edge_weights(x, np.array([[0, 1]]), EdgeStrategy("euclidean"))[0] == 5.0
    assert edge_weights(x, np.array([[0, 1]]), EdgeStrategy("unweighted"))[0] == 1.0


def test_cosine_zero_norm_names_node():
    x = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(DegenerateInputError, match="node 1"):
        edge_weights(x, np.array([[0, 1]]), EdgeStrategy("cosine"))


def test_strategy_validation_and_parse():
    with pytest.raises(ValueError):
        EdgeStrategy("rbf", None)
    with pytest.raises(ValueError):
        EdgeStrategy("manhattan")
    assert EdgeStrategy.parse("rbf:5") == EdgeStrategy("rbf", 5.0)
    assert EdgeStrategy.parse("rbf(sigma=0.5)") == EdgeStrategy("rbf", 0.5)
    assert EdgeStrategy.parse("Cosine") == EdgeStrategy("cosine")
    assert EdgeStrategy("euclidean", 3.0).sigma is None


def scalar_weight(a, b, strategy):
    diff2 = sum((p - q) ** 2 for p, q in zip(a, b))
    if strategy.kind == "unweighted":
        return 1.0
    if strategy.kind == "euclidean":
        return math.sqrt(diff2)
    if strategy.kind == "cosine":
        dot = sum(p * q for p, q in zip(a, b))
        return dot / (math.sqrt(sum(p * p for p in a)) * math.sqrt(sum(q * q for q in b)))
    return math.exp(-diff2 / (2 * strategy.sigma**2))


coords = st.lists(st.floats(-50, 50, allow_nan=False).filter(lambda v: abs(v) > 1e-3), min_size=3, max_size=3)


@settings(max_examples=200, deadline=None)
@given(a=coords, b=coords, kind=st.sampled_from(["unweighted", "euclidean", "cosine", "rbf"]), sigma=st.floats(0.1, 20))
def test_weights_match_scalar_reference(a, b, kind, sigma):
    strategy = EdgeStrategy(kind, sigma if kind == "rbf" else None)
    got = edge_weights(np.array([a, b]), np.array([[0, 1]]), strategy)[0]
    want = scalar_weight(a, b, strategy)
    assert abs(got - want) <= 1e-12 * max(abs(want), 1e-300) or (want == 0 and abs(got) < 1e-300)


def test_rbf_monotone_in_distance():
    x = np.column_stack([np.linspace(0, 6, 50), np.zeros(50)])
    edges = np.column_stack([np.zeros(49, dtype=int), np.arange(1, 50)])
    w = edge_weights(x, edges, RBF2)
    assert np.all(np.diff(w) < 0)


# ---------------------------------------------------------------- build_graph


def test_square_graph():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    g = build_graph(x, LshConfig(), RBF2, neighbor_pct=0.34)
    assert g.n_nodes == 4
    assert len(g.edges) > 0
    assert np.all((g.edge_weights > 0) & (g.edge_weights <= 1))


def check_invariants(g: GraphRep, lsh: LshConfig):
    e = g.edges
    assert np.all(e[:, 0] < e[:, 1])
    assert len({tuple(p) for p in e.tolist()}) == len(e)
    assert np.all(np.isfinite(g.edge_weights))
    if g.strategy.kind == "rbf":
        assert np.all((g.edge_weights >= 0) & (g.edge_weights <= 1))
    elif g.strategy.kind == "cosine":
        assert np.all(np.abs(g.edge_weights) <= 1)
    elif g.strategy.kind == "euclidean":
        assert np.all(g.edge_weights >= 0)
    else:
        assert np.all(g.edge_weights == 1)
    assert np.all(g.node_features[:, 1] >= 0) and np.all(g.node_features[:, 1] <= lsh.neighbor_cap)
    assert np.all(g.node_features[:, 2] >= 0)


@pytest.mark.parametrize("seed", range(100))
def test_graph_invariants_random(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 8))
    if seed % 2:
        ds = gen_clustered(GenConfig(n_points=(20, 80), k_clusters=(2, 4), dim=d, seed=seed))
    else:
        ds = gen_uniform(int(rng.integers(20, 80)), d, seed=seed)
    kind = ["unweighted", "euclidean", "cosine", "rbf"][seed % 4]
    lsh = LshConfig(neighbor_cap=int(rng.integers(1, 10)), seed=seed)
    g = graph_for(ds.points, GraphConfig(lsh, EdgeStrategy(kind, 1.5 if kind == "rbf" else None), float(rng.uniform(0.05, 1))))
    check_invariants(g, lsh)


def test_build_deterministic():
    ds = gen_clustered(GenConfig(dim=3, seed=2))
    a, b = graph_for(ds.points), graph_for(ds.points)
    assert a.to_dict() == b.to_dict()


def canonical(g: GraphRep, points):
    out = []
    for (i, j), w in zip(g.edges.tolist(), g.edge_weights.tolist()):
        out.append((w, tuple(sorted([tuple(points[i]), tuple(points[j])]))))
    return sorted(out)


@pytest.mark.parametrize("seed", range(5))
def test_permutation_gives_isomorphic_graph(seed):
    x = np.random.default_rng(seed).standard_normal((60, 3))
    perm = np.random.default_rng(100 + seed).permutation(60)
    g = build_graph(x, LshConfig(seed=1), RBF2, 0.3)
    gp = build_graph(x[perm], LshConfig(seed=1), RBF2, 0.3)
    assert canonical(g, x.tolist()) == canonical(gp, x[perm].tolist())
    assert np.array_equal(gp.node_features, g.node_features[perm])


def test_graph_json_roundtrip(tmp_path):
    g = graph_for(gen_uniform(30, 2, seed=1).points)
    g.save(tmp_path / "g.json")
    back = GraphRep.load(tmp_path / "g.json")
    assert back.to_dict() == g.to_dict()
    assert set(g.to_dict()) == {"n_nodes", "node_features", "edges", "weights", "strategy"}
