"""MNIST IDX ingestion, PCA, and structured/noise mixtures."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datagen import Dataset

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


class IdxFormatError(ValueError):
    pass


def _read_u32(buf: bytes, offset: int, path) -> int:
    if len(buf) < offset + 4:
        raise IdxFormatError(f"{path}: truncated header at offset {offset}")
    return struct.unpack_from(">I", buf, offset)[0]


def read_idx_images(path: str | Path) -> np.ndarray:
    """Raw ``(count, rows, cols)`` uint8 images."""
    buf = Path(path).read_bytes()
    magic = _read_u32(buf, 0, path)
    if magic != IMAGES_MAGIC:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{IMAGES_MAGIC:08x}")
    count, rows, cols = (_read_u32(buf, off, path) for off in (4, 8, 12))
    need = 16 + count * rows * cols
    if len(buf) < need:
        raise IdxFormatError(f"{path}: truncated payload, expected {need} bytes, file ends at offset {len(buf)}")
    return np.frombuffer(buf, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(count, rows, cols)


def read_idx_labels(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    magic = _read_u32(buf, 0, path)
    if magic != LABELS_MAGIC:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{LABELS_MAGIC:08x}")
    count = _read_u32(buf, 4, path)
    if len(buf) < 8 + count:
        raise IdxFormatError(f"{path}: truncated payload, expected {8 + count} bytes, file ends at offset {len(buf)}")
    return np.frombuffer(buf, dtype=np.uint8, count=count, offset=8).copy()


def write_idx_images(path: str | Path, images: np.ndarray):
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(path).write_bytes(struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols) + images.tobytes())


def write_idx_labels(path: str | Path, labels: np.ndarray):
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">II", LABELS_MAGIC, len(labels)) + labels.tobytes())


def load_idx(images_path: str | Path, labels_path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Flattened images scaled to [0, 1] and their labels."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise IdxFormatError(f"{images_path}: {len(images)} images but {labels_path} has {len(labels)} labels (count field, offset 4)")
    return images.reshape(len(images), -1).astype(np.float64) / 255.0, labels


def find_idx_files(directory: str | Path, split: str = "train") -> tuple[Path, Path]:
    """Locate the standard image/label files of ``split`` in ``directory`` (``.gz``-free)."""
    directory = Path(directory)
    names = TRAIN_FILES if split == "train" else TEST_FILES
    paths = []
    for name in names:
        candidates = [directory / name, directory / name.replace("-idx", ".idx")]
        found = next((p for p in candidates if p.exists()), None)
        if found is None:
            raise FileNotFoundError(f"{directory}: missing MNIST file {name}")
        paths.append(found)
    return paths[0], paths[1]


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def pca_fit(points: np.ndarray, r: int) -> PcaModel:
    """Top-``r`` eigenvectors of the sample covariance (ddof=1).

    Each component is sign-flipped so its largest-magnitude entry is positive.
    """
    x = np.asarray(points, dtype=np.float64)
    n, d = x.shape
    if not 1 <= r <= min(n - 1, d):
        raise ValueError(f"r={r} must be in [1, min(n-1, d)] = [1, {min(n - 1, d)}]")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1][:r]
    comps = evecs[:, order].T.copy()
    lead = np.abs(comps).argmax(axis=1)
    comps *= np.sign(comps[np.arange(r), lead])[:, None]
    return PcaModel(mean, comps, np.clip(evals[order], 0.0, None))


def pca_transform(model: PcaModel, points: np.ndarray) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.mean.shape[0]:
        raise ValueError(f"points have width {x.shape[-1]}, model expects {model.mean.shape[0]}")
    return (x - model.mean) @ model.components.T


def make_noise_like(structured: np.ndarray, m: int, seed: int = 0) -> np.ndarray:
    """``m`` points uniform on the per-coordinate range of ``structured``."""
    x = np.asarray(structured, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValueError("make_noise_like needs at least 2 structured points")
    rng = np.random.default_rng(seed)
    return rng.uniform(x.min(axis=0), x.max(axis=0), size=(m, x.shape[1]))


class Variant(enum.Enum):
    ADD_TO_NOISE = 1
    FIXED_BUDGET = 2


@dataclass(frozen=True)
class MixSpec:
    variant: Variant
    p_percent: float
    n_structured_pool: int = 200
    n_noise_base: int = 200
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.variant, int):
            object.__setattr__(self, "variant", Variant(self.variant))
        if not 0 <= self.p_percent <= 100:
            raise ValueError(f"p_percent must be in [0, 100], got {self.p_percent}")

    def n_structured(self) -> int:
        # floor; the small epsilon absorbs binary round-off such as 0.35 * 200 = 69.99...
        base = self.n_structured_pool if self.variant is Variant.ADD_TO_NOISE else self.n_noise_base
        return int(np.floor(self.p_percent * base / 100.0 + 1e-9))


def mix(structured_pool: np.ndarray, noise_pool: np.ndarray, spec: MixSpec) -> Dataset:
    """Variant 1 adds structured points to all noise; Variant 2 keeps a fixed total.

    Structured points come first in the returned matrix, then noise.
    """
    structured_pool = np.asarray(structured_pool, dtype=np.float64)
    noise_pool = np.asarray(noise_pool, dtype=np.float64)
    if len(structured_pool) < spec.n_structured_pool or len(noise_pool) < spec.n_noise_base:
        raise ValueError(
            f"pools too small: {len(structured_pool)} structured / {len(noise_pool)} noise, "
            f"spec needs {spec.n_structured_pool} / {spec.n_noise_base}"
        )
    rng = np.random.default_rng(spec.seed)
    n_s = spec.n_structured()
    s_idx = rng.choice(spec.n_structured_pool, size=n_s, replace=False)
    if spec.variant is Variant.ADD_TO_NOISE:
        n_idx = np.arange(spec.n_noise_base)
    else:
        n_idx = rng.choice(spec.n_noise_base, size=spec.n_noise_base - n_s, replace=False)
    points = np.concatenate([structured_pool[s_idx], noise_pool[n_idx]], axis=0)
    return Dataset(points, label=n_s > 0, seed=spec.seed)


@dataclass
class MnistPools:
    structured: np.ndarray
    noise: np.ndarray
    pca: PcaModel


def prepare_pools(
    images: np.ndarray,
    n_components: int = 50,
    n_structured: int = 200,
    n_noise: int = 200,
    fit_size: int | None = 10000,
    seed: int = 0,
) -> MnistPools:
    """PCA on (a subsample of) the split, then sample the structured pool and matching noise."""
    rng = np.random.default_rng(seed)
    images = np.asarray(images, dtype=np.float64)
    fit = images
    if fit_size is not None and fit_size < len(images):
        fit = images[rng.choice(len(images), size=fit_size, replace=False)]
    model = pca_fit(fit, n_components)
    structured = pca_transform(model, images[rng.choice(len(images), size=n_structured, replace=False)])
    noise = make_noise_like(structured, n_noise, seed=int(rng.integers(2**63)))
    return MnistPools(structured, noise, model)
