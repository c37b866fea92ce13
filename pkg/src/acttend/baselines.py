"""Hopkins-statistic and k-means/silhouette clustering-tendency baselines."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .datagen import derive_seed


_HOPKINS_KEY = 0x686F706B


@dataclass
class HopkinsResult:
    score: float
    m_probes: int
    seed: int


@dataclass
class KmeansResult:
    assignment: np.ndarray
    centers: np.ndarray
    inertia: float
    iterations: int
    inertia_history: list[float] = field(default_factory=list)


def hopkins_statistic(points: np.ndarray, m: int | None = None, seed: int = 0) -> HopkinsResult:
    """Hopkins statistic with d-th power distances.

    ``m`` real points (without replacement) and ``m`` uniform probes from the
    data's bounding box; ``score = sum(u^d) / (sum(u^d) + sum(w^d))`` where
    ``w`` is each sampled point's nearest *other* real point distance and ``u``
    each probe's nearest real point distance. Sums are formed in log space, so
    large ``d`` does not overflow.
    """
    x = np.asarray(points, dtype=np.float64)
    n, d = x.shape
    if n < 10:
        raise ValueError(f"hopkins_statistic needs n >= 10, got {n}")
    if m is None:
        m = max(1, n // 10)
    if not 1 <= m <= n // 2:
        raise ValueError(f"m must be in [1, n/2] = [1, {n // 2}], got {m}")
    # derived stream: a raw default_rng(seed) would replay the generator's draws when seeds coincide
    rng = np.random.default_rng(derive_seed(seed, _HOPKINS_KEY))
    lo, hi = x.min(axis=0), x.max(axis=0)
    flat = hi <= lo
    if flat.any():
        pad = np.finfo(np.float64).eps * np.maximum(1.0, np.abs(lo[flat]))
        lo[flat] -= pad
        hi[flat] += pad
        warnings.warn(f"degenerate bounding box on axes {np.nonzero(flat)[0].tolist()}; widened by machine epsilon", RuntimeWarning, stacklevel=2)

    sample = rng.choice(n, size=m, replace=False)
    probes = rng.uniform(lo, hi, size=(m, d))
    dx = cdist(x[sample], x)
    dx[np.arange(m), sample] = np.inf
    w = dx.min(axis=1)
    u = cdist(probes, x).min(axis=1)
    with np.errstate(divide="ignore"):
        log_u = logsumexp(d * np.log(u))
        log_w = logsumexp(d * np.log(w))
    if np.isneginf(log_u) and np.isneginf(log_w):
        score = 0.5
    else:
        # u / (u + w) = 1 / (1 + exp(log_w - log_u))
        score = float(1.0 / (1.0 + np.exp(log_w - log_u)))
    return HopkinsResult(score, m, seed)


def hopkins_classify(points: np.ndarray, threshold: float = 0.75, m: int | None = None, seed: int = 0) -> bool:
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    return hopkins_statistic(points, m, seed).score >= threshold


def _sq_dist(x, c):
    return cdist(x, c, "sqeuclidean")


def _inertia(x, assignment, centers) -> float:
    return float(((x - centers[assignment]) ** 2).sum())


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dist(x, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(rng.integers(n))
        centers[c] = x[idx]
        closest = np.minimum(closest, _sq_dist(x, centers[c : c + 1])[:, 0])
    return centers


def _update_centers(x, assignment, centers):
    k = centers.shape[0]
    counts = np.bincount(assignment, minlength=k)
    sums = np.zeros_like(centers)
    np.add.at(sums, assignment, x)
    new = centers.copy()
    filled = counts > 0
    new[filled] = sums[filled] / counts[filled, None]
    if not filled.all():
        # reseed each empty center at the point farthest from its own center
        far = ((x - new[assignment]) ** 2).sum(axis=1)
        taken = np.zeros(len(x), dtype=bool)
        for c in np.nonzero(~filled)[0]:
            cand = np.where(taken, -1.0, far)
            idx = int(np.argmax(cand))
            new[c] = x[idx]
            taken[idx] = True
    return new


def _lloyd(x, k, max_iter, rng):
    centers = _kmeanspp(x, k, rng)
    assignment = np.argmin(_sq_dist(x, centers), axis=1)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        centers = _update_centers(x, assignment, centers)
        new = np.argmin(_sq_dist(x, centers), axis=1)
        history.append(_inertia(x, new, centers))
        if np.array_equal(new, assignment):
            break
        assignment = new
    else:
        assignment = new
    return KmeansResult(assignment, centers, _inertia(x, assignment, centers), it, history)


def kmeans(points: np.ndarray, k: int, max_iter: int = 300, n_init: int = 5, seed: int = 0) -> KmeansResult:
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` restarts."""
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points n={n}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        res = _lloyd(x, k, max_iter, rng)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def _silhouette_from_dist(dist: np.ndarray, assignment: np.ndarray) -> float:
    labels, inv = np.unique(assignment, return_inverse=True)
    k = len(labels)
    if k < 2:
        raise ValueError("silhouette needs at least 2 distinct clusters")
    onehot = np.zeros((len(inv), k))
    onehot[np.arange(len(inv)), inv] = 1.0
    sizes = onehot.sum(axis=0)
    sums = dist @ onehot
    own = sizes[inv]
    a = np.where(own > 1, sums[np.arange(len(inv)), inv] / np.maximum(own - 1, 1), 0.0)
    other = sums / sizes
    other[np.arange(len(inv)), inv] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def silhouette(points: np.ndarray, assignment: np.ndarray) -> float:
    """Mean silhouette coefficient; singleton clusters contribute 0."""
    x = np.asarray(points, dtype=np.float64)
    assignment = np.asarray(assignment)
    if x.shape[0] < 3:
        raise ValueError(f"silhouette needs n >= 3, got {x.shape[0]}")
    if len(assignment) != x.shape[0]:
        raise ValueError("assignment length does not match the number of points")
    return _silhouette_from_dist(cdist(x, x), assignment)


def silhouette_best(points: np.ndarray, k_max_cap: int = 20, seed: int = 0, n_init: int = 5) -> tuple[float, int]:
    """Best silhouette over k = 2..min(k_max_cap, n-1); ties go to the smaller k."""
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if n < 3:
        raise ValueError(f"silhouette_best needs n >= 3, got {n}")
    dist = cdist(x, x)
    best_score, best_k = -np.inf, 2
    for k in range(2, min(k_max_cap, n - 1) + 1):
        res = kmeans(x, k, n_init=n_init, seed=derive_seed(seed, k))
        if len(np.unique(res.assignment)) < 2:
            continue
        score = _silhouette_from_dist(dist, res.assignment)
        if score > best_score:
            best_score, best_k = score, k
    if not np.isfinite(best_score):
        best_score = 0.0
    return float(best_score), best_k


def silhouette_classify(points: np.ndarray, threshold: float = 0.5, k_max_cap: int = 20, seed: int = 0) -> bool:
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    return silhouette_best(points, k_max_cap, seed)[0] >= threshold
