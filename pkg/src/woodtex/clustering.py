"""Lloyd's k-means over descriptor vectors, seeded by k-means++.

Determinism contract: for a fixed seed the seeding draws, the
assignment tie-breaks (lowest centroid index) and the centroid update
reduction order (ascending point index) are all pinned, so repeated
runs produce bit-identical codebooks. Distance cross-terms go through
np.einsum with optimization disabled, which keeps the accumulation
order independent of the BLAS backend and its thread count.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .rng import SplitMix64

CODEBOOK_MAGIC = b"WTCB"
CODEBOOK_VERSION = 1


class DuplicateCentersWarning(UserWarning):
    """Seeding had to duplicate centers because k exceeds the distinct-point count."""


@dataclass
class ClusteringConfig:
    k: int
    max_iterations: int = 300
    tolerance: float = 1e-6  # relative WCSS change between iterations
    rng_seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgumentError(f"k must be >= 1, got {self.k}")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if self.tolerance < 0.0:
            raise InvalidArgumentError("tolerance must be >= 0")


@dataclass
class Codebook:
    """k learned centroids plus the config snapshot of the run that produced them."""

    centroids: np.ndarray  # (k, dim) float64
    rng_seed: int
    iterations_run: int = 0
    final_wcss: float = 0.0
    seeding_warnings: list[str] = field(default_factory=list)
    wcss_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise InvalidArgumentError("points must be a non-empty (n, dim) array")
    return pts


def sq_distances_to_centroids(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances, clipped at 0 against float cancellation."""
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    if points.shape[1] != centroids.shape[1]:
        raise InvalidArgumentError(
            f"dimension mismatch: points have dim {points.shape[1]}, "
            f"centroids dim {centroids.shape[1]}")
    p_sq = np.einsum("nd,nd->n", points, points)
    c_sq = np.einsum("kd,kd->k", centroids, centroids)
    cross = np.einsum("nd,kd->nk", points, centroids)
    d2 = p_sq[:, None] - 2.0 * cross + c_sq[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def assign_nearest(point, centroids) -> tuple[int, float]:
    """Index of the closest centroid and its squared distance; ties pick the lowest index."""
    point = np.asarray(point, dtype=np.float64)
    if point.ndim != 1:
        raise InvalidArgumentError("point must be a 1-D vector")
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim != 2 or centroids.shape[0] < 1:
        raise InvalidArgumentError("need at least one centroid")
    d2 = sq_distances_to_centroids(point[None, :], centroids)[0]
    idx = int(np.argmin(d2))
    return idx, float(d2[idx])


def assign_all(points, centroids) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized assign_nearest over a point set: (indices, squared distances)."""
    d2 = sq_distances_to_centroids(points, centroids)
    idx = np.argmin(d2, axis=1)
    return idx, d2[np.arange(len(idx)), idx]


def kmeanspp_seed(points, k: int, rng_seed: int) -> np.ndarray:
    """k-means++ seeding: first center uniform, then draws weighted by D(x)^2.

    When every remaining point coincides with a chosen center the squared
    distances are all zero; selection then falls back to a uniform draw over
    the points, which duplicates centers, and a DuplicateCentersWarning is
    emitted for the run report.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    rng = SplitMix64(rng_seed)
    chosen = np.empty(k, dtype=np.intp)
    chosen[0] = rng.integer(n)
    d2 = ((pts - pts[chosen[0]]) ** 2).sum(axis=1, dtype=np.float64)
    warned = False
    for i in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            chosen[i] = rng.choice_weighted(d2)
        else:
            if not warned:
                warnings.warn(
                    f"all candidate distances are zero at center {i}; "
                    f"k={k} exceeds the number of distinct points, duplicating centers",
                    DuplicateCentersWarning)
                warned = True
            chosen[i] = rng.integer(n)
        d2 = np.minimum(d2, ((pts - pts[chosen[i]]) ** 2).sum(axis=1, dtype=np.float64))
    return pts[chosen].copy()


def uniform_seed(points, k: int, rng_seed: int) -> np.ndarray:
    """Baseline seeding: k centers drawn uniformly without replacement."""
    pts = _as_points(points)
    n = pts.shape[0]
    if k > n:
        raise InvalidArgumentError(f"k={k} exceeds point count {n}")
    rng = SplitMix64(rng_seed)
    order = list(range(n))
    rng.shuffle(order)
    return pts[np.array(order[:k], dtype=np.intp)].copy()


def wcss(points, assignments, centroids) -> float:
    """Within-cluster sum of squares for an explicit assignment."""
    pts = np.asarray(points, dtype=np.float64)
    assigns = np.asarray(assignments)
    cents = np.asarray(centroids, dtype=np.float64)
    if pts.ndim != 2 or cents.ndim != 2 or pts.shape[1] != cents.shape[1]:
        raise InvalidArgumentError("points and centroids must share a dimension")
    if len(assigns) != len(pts):
        raise InvalidArgumentError("one assignment per point required")
    if assigns.min() < 0 or assigns.max() >= len(cents):
        raise InvalidArgumentError("assignment index out of range")
    diff = pts - cents[assigns]
    return float(np.einsum("nd,nd->", diff.astype(np.float64), diff.astype(np.float64)))


def _repair_empty_clusters(pts: np.ndarray, assigns: np.ndarray,
                           centroids: np.ndarray, counts: np.ndarray) -> None:
    # deterministic repair: move each empty centroid (ascending index) onto the
    # point farthest from it; ties fall to the lowest point index
    taken: set[int] = set()
    for ci in np.flatnonzero(counts == 0):
        d2 = ((pts - centroids[ci]) ** 2).sum(axis=1, dtype=np.float64)
        for t in taken:
            d2[t] = -1.0
        far = int(np.argmax(d2))
        taken.add(far)
        centroids[ci] = pts[far]


def kmeans(points, cfg: ClusteringConfig,
           init_centroids: np.ndarray | None = None) -> tuple[Codebook, np.ndarray]:
    """Alternate nearest-centroid assignment and mean updates until the
    relative WCSS change drops below tolerance or max_iterations is hit.

    Seeds come from kmeanspp_seed unless explicit init_centroids are
    given (e.g. to compare against a different seeding scheme). Returns
    the codebook (with iteration count and final WCSS) and the final
    per-point assignments. The per-iteration WCSS sequence is recorded
    on the codebook for monotonicity auditing.
    """
    pts = _as_points(points)
    n, dim = pts.shape
    if cfg.k > n:
        raise InvalidArgumentError(f"k={cfg.k} exceeds point count {n}")

    seed_warnings: list[str] = []
    if init_centroids is not None:
        centroids = np.asarray(init_centroids, dtype=np.float64).copy()
        if centroids.shape != (cfg.k, dim):
            raise InvalidArgumentError("init_centroids must have shape (k, dim)")
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DuplicateCentersWarning)
            centroids = kmeanspp_seed(pts, cfg.k, cfg.rng_seed)
        seed_warnings = [str(w.message) for w in caught
                         if issubclass(w.category, DuplicateCentersWarning)]

    wcss_history: list[float] = []
    assigns = np.zeros(n, dtype=np.intp)
    prev_wcss = np.inf
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        assigns, d2 = assign_all(pts, centroids)
        cur_wcss = float(d2.sum(dtype=np.float64))
        wcss_history.append(cur_wcss)

        counts = np.bincount(assigns, minlength=cfg.k)
        sums = np.zeros((cfg.k, dim), dtype=np.float64)
        np.add.at(sums, assigns, pts.astype(np.float64))
        nonempty = counts > 0
        centroids = centroids.copy()
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            _repair_empty_clusters(pts, assigns, centroids, counts)

        if cur_wcss == 0.0:
            break
        if np.isfinite(prev_wcss) and abs(prev_wcss - cur_wcss) < cfg.tolerance * prev_wcss:
            break
        prev_wcss = cur_wcss

    assigns, d2 = assign_all(pts, centroids)
    final_wcss = float(d2.sum(dtype=np.float64))
    book = Codebook(centroids=centroids, rng_seed=cfg.rng_seed,
                    iterations_run=iterations, final_wcss=final_wcss,
                    seeding_warnings=seed_warnings, wcss_history=wcss_history)
    return book, assigns


def save_codebook(book: Codebook, path: str | Path) -> None:
    """Binary codebook: magic, version, k, dim, seed, WCSS header, then
    centroids as little-endian float32."""
    with open(path, "wb") as fh:
        fh.write(CODEBOOK_MAGIC)
        fh.write(struct.pack("<IIIQd", CODEBOOK_VERSION, book.k, book.dim,
                             book.rng_seed & 0xFFFFFFFFFFFFFFFF, book.final_wcss))
        fh.write(book.centroids.astype("<f4").tobytes())


def load_codebook(path: str | Path) -> Codebook:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CODEBOOK_MAGIC:
            raise InvalidArgumentError(f"{path}: not a codebook file")
        version, k, dim, seed, final_wcss = struct.unpack("<IIIQd", fh.read(28))
        if version != CODEBOOK_VERSION:
            raise InvalidArgumentError(f"{path}: unsupported codebook version {version}")
        data = np.frombuffer(fh.read(4 * k * dim), dtype="<f4")
        if data.size != k * dim:
            raise InvalidArgumentError(f"{path}: truncated codebook payload")
    return Codebook(centroids=data.reshape(k, dim).astype(np.float64),
                    rng_seed=seed, final_wcss=final_wcss)


def export_codebook_text(book: Codebook, path: str | Path) -> None:
    """Tab-separated centroid dump for eyeballing a learned vocabulary."""
    with open(path, "w") as fh:
        fh.write(f"# k={book.k} dim={book.dim} seed={book.rng_seed} "
                 f"wcss={book.final_wcss!r}\n")
        for row in book.centroids:
            fh.write("\t".join(format(v, ".9g") for v in row) + "\n")
