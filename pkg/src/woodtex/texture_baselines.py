"""Whole-image texture baselines: LBP code histograms and GLCM statistics.

LBP: each interior pixel is coded by comparing its 8 neighbours to the
center (bit set when neighbour >= center), bits ordered clockwise from
the top-left neighbour, most significant bit first. The 256-bin code
histogram is normalized to unit mass.

GLCM: pixel values are quantized to a fixed number of uniform gray
levels; ordered co-occurrence counts at a directional offset are
symmetrized with their transpose and normalized. Six statistics
(energy, entropy, inverse difference moment, dissimilarity, contrast,
variance) are taken per direction and concatenated over the four
offsets 0, 45, 90 and 135 degrees into a 24-value feature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bow import METHOD_GLCM, METHOD_LBP, FeatureVector
from .errors import InvalidArgumentError
from .imagecore import GrayImage

# clockwise from the top-left neighbour; first entry is the most significant bit
_LBP_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]

# row/col offsets for 0, 45, 90, 135 degrees at unit distance
DIRECTION_OFFSETS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}
DIRECTION_ORDER = (0, 45, 90, 135)

GLCM_FEATURE_NAMES = ("energy", "entropy", "idm", "dissimilarity", "contrast", "variance")


@dataclass
class GlcmConfig:
    gray_levels: int = 16
    distance: int = 1

    def __post_init__(self):
        if self.gray_levels < 2:
            raise InvalidArgumentError("gray_levels must be >= 2")
        if self.distance < 1:
            raise InvalidArgumentError("distance must be >= 1")


def lbp_histogram(img: GrayImage) -> FeatureVector:
    """256-bin histogram of 8-neighbour binary codes, normalized to sum 1."""
    p = img.pixels
    h, w = p.shape
    if h < 3 or w < 3:
        raise InvalidArgumentError(f"LBP requires at least a 3x3 image, got {w}x{h}")
    center = p[1:-1, 1:-1]
    codes = np.zeros(center.shape, dtype=np.uint16)
    for bit, (dy, dx) in enumerate(_LBP_OFFSETS):
        neighbour = p[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        codes |= ((neighbour >= center).astype(np.uint16) << (7 - bit))
    hist = np.bincount(codes.ravel(), minlength=256).astype(np.float64)
    return FeatureVector(values=hist / hist.sum(), method=METHOD_LBP)


def quantize_gray(pixels: np.ndarray, levels: int) -> np.ndarray:
    """Uniform quantization of [0, 1] values into integer bins 0..levels-1."""
    return np.minimum((pixels * levels).astype(np.intp), levels - 1)


def glcm_matrix(img: GrayImage, direction_deg: int, cfg: GlcmConfig) -> np.ndarray:
    """Symmetric normalized co-occurrence matrix for one direction."""
    if direction_deg not in DIRECTION_OFFSETS:
        raise InvalidArgumentError(f"direction must be one of {DIRECTION_ORDER}")
    dy, dx = DIRECTION_OFFSETS[direction_deg]
    dy, dx = dy * cfg.distance, dx * cfg.distance
    q = quantize_gray(img.pixels, cfg.gray_levels)
    h, w = q.shape
    if h <= abs(dy) or w <= abs(dx):
        raise InvalidArgumentError(
            f"image {w}x{h} too small for offset ({dy},{dx})")

    y0, y1 = max(0, -dy), min(h, h - dy)
    x0, x1 = max(0, -dx), min(w, w - dx)
    a = q[y0:y1, x0:x1]
    b = q[y0 + dy:y1 + dy, x0 + dx:x1 + dx]
    pairs = a.ravel() * cfg.gray_levels + b.ravel()
    counts = np.bincount(pairs, minlength=cfg.gray_levels ** 2).astype(np.float64)
    m = counts.reshape(cfg.gray_levels, cfg.gray_levels)
    m = m + m.T
    total = m.sum()
    if total == 0.0:
        raise InvalidArgumentError("no pixel pairs for the requested offset")
    return m / total


def glcm_features(matrix: np.ndarray) -> np.ndarray:
    """Six statistics of a normalized co-occurrence matrix.

    energy = sum p^2; entropy = -sum p ln p (0 ln 0 := 0);
    idm = sum p / (1 + (i-j)^2); dissimilarity = sum p |i-j|;
    contrast = sum p (i-j)^2; variance = sum (i - mu)^2 p with
    mu the mean of the row marginal. Indices stay on the quantized scale.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError("co-occurrence matrix must be square")
    if m.min() < 0.0 or abs(m.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError("matrix must be normalized with non-negative entries")
    n = m.shape[0]
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    diff = i - j
    energy = float((m ** 2).sum())
    nz = m > 0.0
    entropy = float(-(m[nz] * np.log(m[nz])).sum())
    idm = float((m / (1.0 + diff ** 2)).sum())
    dissimilarity = float((m * np.abs(diff)).sum())
    contrast = float((m * diff ** 2).sum())
    row_marginal = m.sum(axis=1)
    mu = float((np.arange(n) * row_marginal).sum())
    variance = float(((np.arange(n) - mu) ** 2 * row_marginal).sum())
    return np.array([energy, entropy, idm, dissimilarity, contrast, variance])


def glcm_feature_vector(img: GrayImage, cfg: GlcmConfig | None = None) -> FeatureVector:
    """24-value feature: the six statistics per direction, directions in
    the fixed order 0, 45, 90, 135 degrees."""
    cfg = cfg or GlcmConfig()
    parts = [glcm_features(glcm_matrix(img, d, cfg)) for d in DIRECTION_ORDER]
    return FeatureVector(values=np.concatenate(parts), method=METHOD_GLCM)
