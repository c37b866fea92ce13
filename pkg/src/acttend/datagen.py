"""Synthetic corpora of clustered (Gaussian blob) and structureless (uniform box) datasets."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Raised when a generator or corpus configuration violates its bounds."""


def derive_seed(master_seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for ``(master_seed, *keys)``."""
    ss = np.random.SeedSequence([int(master_seed) % 2**64, *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class Dataset:
    points: np.ndarray
    label: bool | None = None
    seed: int | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError(f"points must be a 2-D matrix, got shape {self.points.shape}")
        n, d = self.points.shape
        if n < 2 or d < 1:
            raise ValueError(f"dataset needs n >= 2 and d >= 1, got n={n}, d={d}")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _as_range(value, name, cast):
    if isinstance(value, (tuple, list)):
        lo, hi = value
    else:
        lo = hi = value
    lo, hi = cast(lo), cast(hi)
    if lo > hi:
        raise ConfigError(f"{name} range is empty: [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class GenConfig:
    """Positive-class generator settings.

    ``n_points``, ``k_clusters`` and ``cluster_std`` are inclusive ``(min, max)``
    ranges sampled per dataset; a scalar pins the value. ``cluster_std`` is in
    units of ``box_halfwidth``.
    """

    n_points: tuple[int, int] = (100, 500)
    dim: int = 2
    k_clusters: tuple[int, int] = (2, 6)
    cluster_std: tuple[float, float] = (0.05, 0.5)
    box_halfwidth: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_points", _as_range(self.n_points, "n_points", int))
        object.__setattr__(self, "k_clusters", _as_range(self.k_clusters, "k_clusters", int))
        object.__setattr__(self, "cluster_std", _as_range(self.cluster_std, "cluster_std", float))
        self.validate()

    def validate(self):
        n_lo, _ = self.n_points
        k_lo, k_hi = self.k_clusters
        if n_lo < 2:
            raise ConfigError(f"n_points min must be >= 2, got {n_lo}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if k_lo < 2:
            raise ConfigError(f"k_clusters min must be >= 2, got {k_lo}")
        # every cluster keeps at least two points
        if k_hi > n_lo // 2:
            raise ConfigError(f"k_clusters max must be <= n_points min / 2 = {n_lo // 2}, got {k_hi}")
        if self.cluster_std[0] <= 0:
            raise ConfigError(f"cluster_std must be > 0, got {self.cluster_std[0]}")
        if self.box_halfwidth <= 0:
            raise ConfigError(f"box_halfwidth must be > 0, got {self.box_halfwidth}")

    def to_dict(self) -> dict:
        return {
            "n_points": list(self.n_points),
            "dim": self.dim,
            "k_clusters": list(self.k_clusters),
            "cluster_std": list(self.cluster_std),
            "box_halfwidth": self.box_halfwidth,
            "seed": self.seed,
        }


def sample_blobs(cfg: GenConfig) -> tuple[np.ndarray, np.ndarray]:
    """Points and cluster centers of the positive-class draw for ``cfg``."""
    rng = np.random.default_rng(cfg.seed)
    n = int(rng.integers(cfg.n_points[0], cfg.n_points[1] + 1))
    k = int(rng.integers(cfg.k_clusters[0], cfg.k_clusters[1] + 1))
    std = float(rng.uniform(*cfg.cluster_std)) if cfg.cluster_std[0] < cfg.cluster_std[1] else cfg.cluster_std[0]
    hw = cfg.box_halfwidth
    std *= hw  # spread is relative to the box
    centers = rng.uniform(-hw, hw, size=(k, cfg.dim))
    # equal sizes, remainder to the first clusters
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    labels = np.repeat(np.arange(k), sizes)
    points = centers[labels] + std * rng.standard_normal((n, cfg.dim))
    return points[rng.permutation(n)], centers


def gen_clustered(cfg: GenConfig) -> Dataset:
    points, _ = sample_blobs(cfg)
    return Dataset(points, label=True, seed=cfg.seed)


def gen_uniform(n: int, d: int, box_halfwidth: float = 1.0, seed: int = 0) -> Dataset:
    if n < 2 or d < 1:
        raise ConfigError(f"gen_uniform needs n >= 2 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    points = rng.uniform(-box_halfwidth, box_halfwidth, size=(n, d))
    return Dataset(points, label=False, seed=seed)


def gen_corpus(
    n_datasets: int,
    dims: list[int],
    cfg_template: GenConfig | None = None,
    master_seed: int = 0,
) -> list[Dataset]:
    """Class-balanced corpus: half ``gen_clustered``, half ``gen_uniform``.

    Pair ``j`` (one positive, one negative) uses dimension ``dims[j % len(dims)]``.
    Negatives draw their size from the same ``n_points`` range as positives so
    that graph size carries no label information.
    """
    if n_datasets <= 0 or n_datasets % 2:
        raise ConfigError(f"n_datasets must be a positive even number, got {n_datasets}")
    if not dims:
        raise ConfigError("dims must be nonempty")
    cfg_template = cfg_template or GenConfig()
    out = []
    for j in range(n_datasets // 2):
        d = int(dims[j % len(dims)])
        pos_seed = derive_seed(master_seed, 2 * j)
        neg_seed = derive_seed(master_seed, 2 * j + 1)
        out.append(gen_clustered(replace(cfg_template, dim=d, seed=pos_seed)))
        n_neg = int(np.random.default_rng(neg_seed).integers(cfg_template.n_points[0], cfg_template.n_points[1] + 1))
        out.append(gen_uniform(n_neg, d, cfg_template.box_halfwidth, seed=derive_seed(neg_seed, 1)))
    order = np.random.default_rng(derive_seed(master_seed, 2**32)).permutation(len(out))
    return [out[i] for i in order]


def standardize(points: np.ndarray) -> np.ndarray:
    """Per-column zero mean / unit variance; constant columns are only centered."""
    points = np.asarray(points, dtype=np.float64)
    mean = points.mean(axis=0)
    std = points.std(axis=0)
    std[std == 0] = 1.0
    return (points - mean) / std


def write_dataset(ds: Dataset, path: str | Path) -> Path:
    """Write ``<path>`` as headerless CSV plus a ``<path>.json`` sidecar."""
    path = Path(path)
    np.savetxt(path, ds.points, delimiter=",", fmt="%.17g")
    meta = {"label": ds.label, "seed": ds.seed, "dim": ds.dim, "n": ds.n}
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    points = np.loadtxt(path, delimiter=",", ndmin=2)
    label = seed = None
    meta_path = sidecar_path(path)
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        label, seed = meta.get("label"), meta.get("seed")
        if meta.get("n") not in (None, points.shape[0]) or meta.get("dim") not in (None, points.shape[1]):
            raise ValueError(f"{path}: sidecar shape ({meta.get('n')}, {meta.get('dim')}) != CSV shape {points.shape}")
    return Dataset(points, label=label, seed=seed)
