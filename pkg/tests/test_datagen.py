import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acttend.datagen import (
    ConfigError,
    Dataset,
    GenConfig,
    derive_seed,
    gen_clustered,
    gen_corpus,
    gen_uniform,
    read_dataset,
    sample_blobs,
    sidecar_path,
    standardize,
    write_dataset,
)


def test_single_cluster_rejected():
    with pytest.raises(ConfigError, match="k_clusters"):
        GenConfig(k_clusters=(1, 3))


@pytest.mark.parametrize(
    "kwargs, bound",
    [
        ({"cluster_std": 0.0}, "cluster_std"),
        ({"box_halfwidth": -1.0}, "box_halfwidth"),
        ({"dim": 0}, "dim"),
        ({"n_points": (10, 20), "k_clusters": (2, 6)}, "k_clusters max"),
    ],
)
def test_invalid_config_names_bound(kwargs, bound):
    with pytest.raises(ConfigError, match=bound):
        GenConfig(**kwargs)


def test_two_coincident_pairs_at_plus_minus_five():
    base = GenConfig(n_points=4, dim=1, k_clusters=2, cluster_std=1e-12, box_halfwidth=5.0)
    for seed in range(200_000):
        _, centers = sample_blobs(replace(base, seed=seed))
        c = np.sort(centers[:, 0])
        if c[0] < -4.9 and c[1] > 4.9:
            break
    else:
        pytest.fail("no seed put the centers near +-5")
    pts = np.sort(gen_clustered(replace(base, seed=seed)).points[:, 0])
    assert abs(pts[1] - pts[0]) < 1e-9
    assert abs(pts[3] - pts[2]) < 1e-9
    assert pts[2] - pts[1] == pytest.approx(10.0, abs=0.2)


def test_clustered_deterministic():
    cfg = GenConfig(dim=3, seed=42)
    a, b = gen_clustered(cfg), gen_clustered(cfg)
    assert np.array_equal(a.points, b.points)
    assert a.label is True


def test_cluster_sizes_equalized():
    cfg = GenConfig(n_points=103, k_clusters=4, cluster_std=1e-9, dim=2, seed=1)
    pts, centers = sample_blobs(cfg)
    nearest = np.argmin(((pts[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    assert sorted(np.bincount(nearest, minlength=4).tolist()) == [25, 26, 26, 26]


def test_uniform_mean_and_support():
    ds = gen_uniform(1000, 2, 1.0, seed=3)
    assert np.all(np.abs(ds.points.mean(axis=0)) <= 0.1)
    assert np.all(np.abs(ds.points) <= 1.0)
    assert ds.label is False
    assert np.array_equal(ds.points, gen_uniform(1000, 2, 1.0, seed=3).points)


@pytest.mark.parametrize("seed", range(5))
def test_uniform_coarse_uniformity(seed):
    n, hw = 2000, 3.0
    pts = gen_uniform(n, 4, hw, seed=seed).points
    sigma = hw / np.sqrt(3.0)
    assert np.all(np.abs(pts.mean(axis=0)) <= 3 * sigma / np.sqrt(n))


def test_corpus_balanced_and_deterministic():
    corpus = gen_corpus(10, [2], GenConfig(), master_seed=5)
    assert sum(d.label for d in corpus) == 5
    again = gen_corpus(10, [2], GenConfig(), master_seed=5)
    assert all(np.array_equal(a.points, b.points) for a, b in zip(corpus, again))


def test_corpus_sizes_within_template_range():
    corpus = gen_corpus(40, [2], GenConfig(n_points=(100, 500)), master_seed=9)
    assert all(100 <= d.n <= 500 for d in corpus)
    assert all(d.dim == 2 for d in corpus)


def test_corpus_dims_cycle():
    corpus = gen_corpus(8, [2, 7], GenConfig(), master_seed=1)
    assert sorted(d.dim for d in corpus) == [2, 2, 2, 2, 7, 7, 7, 7]


def test_corpus_rejects_odd_count():
    with pytest.raises(ConfigError):
        gen_corpus(7, [2], GenConfig(), master_seed=0)


def test_separable_at_small_std():
    hits = 0
    for seed in range(100):
        cfg = GenConfig(k_clusters=2, cluster_std=0.02, box_halfwidth=1.0, dim=2, seed=seed)
        _, centers = sample_blobs(cfg)
        hits += np.linalg.norm(centers[0] - centers[1]) > 10 * 0.02
    assert hits >= 90


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(1, i) for i in range(1000)}) == 1000
    assert 0 <= derive_seed(2**64 - 1, 3) < 2**64


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**63),
    dim=st.integers(1, 6),
    n_lo=st.integers(12, 60),
    std=st.floats(0.01, 2.0),
)
def test_generation_is_pure(seed, dim, n_lo, std):
    cfg = GenConfig(n_points=(n_lo, n_lo + 20), k_clusters=(2, 6), cluster_std=std, dim=dim, seed=seed)
    a, b = gen_clustered(cfg), gen_clustered(cfg)
    assert np.array_equal(a.points, b.points)
    assert np.all(np.isfinite(a.points))
    assert n_lo <= a.n <= n_lo + 20


def test_standardize():
    x = np.column_stack([np.arange(10.0), np.full(10, 3.0)])
    z = standardize(x)
    assert np.allclose(z.mean(axis=0), 0.0)
    assert z[:, 0].std() == pytest.approx(1.0)
    assert np.all(z[:, 1] == 0.0)


def test_dataset_rejects_nonfinite():
    with pytest.raises(ValueError):
        Dataset(np.array([[0.0], [np.nan]]))


def test_csv_roundtrip(tmp_path):
    ds = gen_clustered(GenConfig(dim=3, seed=11))
    path = write_dataset(ds, tmp_path / "d.csv")
    back = read_dataset(path)
    assert np.array_equal(back.points, ds.points)
    assert back.label is True and back.seed == 11
    meta = json.loads(sidecar_path(path).read_text())
    assert meta == {"label": True, "seed": 11, "dim": 3, "n": ds.n}
