"""Scale-space keypoint detection and 128-dim gradient descriptors.

The detector builds a Gaussian pyramid, differences successive blur
levels, and keeps samples that are strict extrema against all 26
neighbours in their 3x3x3 scale-space cube. Candidates get one
quadratic sub-pixel refinement step, a contrast test on the refined
response, and a principal-curvature-ratio edge test. Each surviving
keypoint is given one or more dominant gradient orientations, which
rotate the descriptor sampling frame; the descriptor itself is a 4x4
grid of 8-bin orientation histograms, trilinearly interpolated,
Gaussian weighted, L2-normalized, clamped at 0.2 and renormalized.

Position, scale and orientation are carried only as keypoint metadata;
the feature consumed downstream is the 128-bin vector alone.

The input image is treated as blur-free: octave o, level i of the
pyramid carries absolute blur base_sigma * 2**(o + i/intervals). No
initial upsampling is applied.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .imagecore import GrayImage, blur_array

DESCRIPTOR_LEN = 128
_GRID = 4            # spatial cells per side
_ORI_BINS = 8        # orientation bins per cell
_SAMPLES = 16        # descriptor samples per side
_ORI_HIST_BINS = 36
_PEAK_KEEP_RATIO = 0.8
_TWO_PI = 2.0 * math.pi

MIN_IMAGE_SIDE = 32
_MIN_OCTAVE_SIDE = 8


@dataclass
class ScaleSpaceConfig:
    base_sigma: float = 1.6
    intervals_per_octave: int = 3
    octave_count: int | None = None  # None: floor(log2(min_side / 8))
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0

    def __post_init__(self):
        if self.base_sigma <= 0.0:
            raise InvalidArgumentError("base_sigma must be positive")
        if self.intervals_per_octave < 1:
            raise InvalidArgumentError("intervals_per_octave must be >= 1")
        if self.contrast_threshold < 0.0:
            raise InvalidArgumentError("contrast_threshold must be >= 0")
        if self.edge_ratio < 1.0:
            raise InvalidArgumentError("edge_ratio must be >= 1")


@dataclass
class Keypoint:
    x: float                 # sub-pixel coordinates in input-image pixels
    y: float
    octave: int
    scale_sigma: float       # absolute blur level in input-image pixels
    orientation: float       # radians in [0, 2*pi); 0.0 until assigned
    peak_value: float        # refined DoG response
    level_index: int = 0     # Gaussian pyramid level used for gradients


@dataclass
class KeypointDescriptor:
    bins: np.ndarray         # (128,) float32, non-negative, unit L2 norm
    keypoint: Keypoint


@dataclass
class GaussianPyramid:
    octaves: list[list[np.ndarray]]
    cfg: ScaleSpaceConfig

    def level_sigma(self, octave: int, level: int) -> float:
        s = self.cfg.intervals_per_octave
        return self.cfg.base_sigma * 2.0 ** (octave + level / s)


def auto_octave_count(height: int, width: int) -> int:
    return max(1, int(math.floor(math.log2(min(height, width) / _MIN_OCTAVE_SIDE))))


def build_gaussian_pyramid(img: GrayImage, cfg: ScaleSpaceConfig) -> GaussianPyramid:
    """Blur levels base_sigma * 2**(o + i/s), s+3 levels per octave; each
    octave starts from the previous one's double-blur level downsampled 2x."""
    h, w = img.pixels.shape
    if min(h, w) < MIN_IMAGE_SIDE:
        raise InvalidArgumentError(
            f"image must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}, got {w}x{h}")
    s = cfg.intervals_per_octave
    n_oct = cfg.octave_count if cfg.octave_count is not None else auto_octave_count(h, w)
    if n_oct < 1:
        raise InvalidArgumentError("octave_count must be >= 1")

    # incremental blurs within an octave, in octave-local pixel units
    local = [cfg.base_sigma * 2.0 ** (i / s) for i in range(s + 3)]
    increments = [math.sqrt(local[i] ** 2 - local[i - 1] ** 2) for i in range(1, s + 3)]

    octaves: list[list[np.ndarray]] = []
    base = blur_array(img.pixels, cfg.base_sigma)
    for _ in range(n_oct):
        levels = [base]
        for inc in increments:
            levels.append(blur_array(levels[-1], inc))
        octaves.append(levels)
        base = levels[s][::2, ::2].copy()  # local blur 2*base_sigma -> base_sigma
    return GaussianPyramid(octaves=octaves, cfg=cfg)


def build_dog_pyramid(gauss: GaussianPyramid) -> list[list[np.ndarray]]:
    """Per octave, level d = gauss[d+1] - gauss[d]; one fewer level per octave."""
    return [[levels[i + 1] - levels[i] for i in range(len(levels) - 1)]
            for levels in gauss.octaves]


def scan_extrema_candidates(dog_levels: list[np.ndarray]) -> list[tuple[int, int, int]]:
    """Strict 26-neighbour extrema in one octave's DoG stack, as (level, y, x).

    Pre-refinement candidate set; exposed separately so it can be checked
    against an independent brute-force scan.
    """
    out: list[tuple[int, int, int]] = []
    h, w = dog_levels[0].shape
    if h < 3 or w < 3:
        return out
    for d in range(1, len(dog_levels) - 1):
        center = dog_levels[d][1:-1, 1:-1]
        gt = np.ones(center.shape, dtype=bool)
        lt = np.ones(center.shape, dtype=bool)
        for layer, skip_center in ((dog_levels[d - 1], False),
                                   (dog_levels[d], True),
                                   (dog_levels[d + 1], False)):
            for dy in range(3):
                for dx in range(3):
                    if skip_center and dy == 1 and dx == 1:
                        continue
                    neighbour = layer[dy:dy + h - 2, dx:dx + w - 2]
                    gt &= center > neighbour
                    lt &= center < neighbour
        ys, xs = np.nonzero(gt | lt)
        out.extend((d, int(y) + 1, int(x) + 1) for y, x in zip(ys, xs))
    return out


def _refine_candidate(dog_levels: list[np.ndarray], d: int, yi: int, xi: int,
                      ) -> tuple[np.ndarray, float, np.ndarray] | None:
    """One quadratic-fit step: returns (offset[s,y,x], refined value, spatial Hessian)."""
    prev_l, cur, next_l = dog_levels[d - 1], dog_levels[d], dog_levels[d + 1]
    g = np.array([
        0.5 * (next_l[yi, xi] - prev_l[yi, xi]),
        0.5 * (cur[yi + 1, xi] - cur[yi - 1, xi]),
        0.5 * (cur[yi, xi + 1] - cur[yi, xi - 1]),
    ])
    v = cur[yi, xi]
    dss = next_l[yi, xi] + prev_l[yi, xi] - 2.0 * v
    dyy = cur[yi + 1, xi] + cur[yi - 1, xi] - 2.0 * v
    dxx = cur[yi, xi + 1] + cur[yi, xi - 1] - 2.0 * v
    dsy = 0.25 * (next_l[yi + 1, xi] - next_l[yi - 1, xi]
                  - prev_l[yi + 1, xi] + prev_l[yi - 1, xi])
    dsx = 0.25 * (next_l[yi, xi + 1] - next_l[yi, xi - 1]
                  - prev_l[yi, xi + 1] + prev_l[yi, xi - 1])
    dyx = 0.25 * (cur[yi + 1, xi + 1] - cur[yi + 1, xi - 1]
                  - cur[yi - 1, xi + 1] + cur[yi - 1, xi - 1])
    hess = np.array([[dss, dsy, dsx],
                     [dsy, dyy, dyx],
                     [dsx, dyx, dxx]])
    try:
        offset = -np.linalg.solve(hess, g)
    except np.linalg.LinAlgError:
        offset = np.zeros(3)
    if not np.all(np.isfinite(offset)):
        offset = np.zeros(3)
    refined = v + 0.5 * float(g @ offset)
    spatial = np.array([[dyy, dyx], [dyx, dxx]])
    return offset, refined, spatial


def detect_extrema(dog: list[list[np.ndarray]], cfg: ScaleSpaceConfig) -> list[Keypoint]:
    """Strict-extremum candidates, refined once, filtered on contrast and edge ratio."""
    s = cfg.intervals_per_octave
    r = cfg.edge_ratio
    edge_limit = (r + 1.0) ** 2 / r
    keypoints: list[Keypoint] = []
    for oct_idx, dog_levels in enumerate(dog):
        if len(dog_levels) < 3:
            raise InvalidArgumentError("need at least 3 DoG levels per octave")
        h, w = dog_levels[0].shape
        scale = float(2 ** oct_idx)
        for d, yi, xi in scan_extrema_candidates(dog_levels):
            offset, refined, spatial = _refine_candidate(dog_levels, d, yi, xi)
            if abs(refined) < cfg.contrast_threshold:
                continue
            det = spatial[0, 0] * spatial[1, 1] - spatial[0, 1] * spatial[1, 0]
            tr = spatial[0, 0] + spatial[1, 1]
            if det <= 0.0 or tr * tr / det >= edge_limit:
                continue
            y_ref = yi + offset[1]
            x_ref = xi + offset[2]
            if not (0.0 <= y_ref <= h - 1 and 0.0 <= x_ref <= w - 1):
                continue
            interval = d + float(offset[0])
            level_index = int(np.clip(round(interval), 0, s + 2))
            keypoints.append(Keypoint(
                x=x_ref * scale,
                y=y_ref * scale,
                octave=oct_idx,
                scale_sigma=cfg.base_sigma * 2.0 ** (oct_idx + interval / s),
                orientation=0.0,
                peak_value=refined,
                level_index=level_index,
            ))
    return keypoints


def _gradients(level: np.ndarray, ys: np.ndarray, xs: np.ndarray):
    dx = 0.5 * (level[ys, xs + 1] - level[ys, xs - 1])
    dy = 0.5 * (level[ys + 1, xs] - level[ys - 1, xs])
    mag = np.sqrt(dx * dx + dy * dy)
    ang = np.mod(np.arctan2(dy, dx), _TWO_PI)
    return mag, ang


def assign_orientation(gauss: GaussianPyramid, kp: Keypoint) -> list[Keypoint]:
    """Dominant gradient directions from a 36-bin Gaussian-weighted histogram.

    One keypoint is emitted per local peak reaching 80% of the maximum,
    with the peak position refined by parabolic interpolation. A keypoint
    whose window has no usable gradient area is dropped (empty result).
    """
    level = gauss.octaves[kp.octave][kp.level_index]
    h, w = level.shape
    inv = 1.0 / 2 ** kp.octave
    xo, yo = kp.x * inv, kp.y * inv
    sigma_oct = kp.scale_sigma * inv
    sigma_w = 1.5 * sigma_oct
    radius = max(1, int(round(3.0 * sigma_w)))

    yi, xi = int(round(yo)), int(round(xo))
    y0, y1 = max(1, yi - radius), min(h - 2, yi + radius)
    x0, x1 = max(1, xi - radius), min(w - 2, xi + radius)
    if y0 > y1 or x0 > x1:
        return []

    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    ys, xs = ys.ravel(), xs.ravel()
    mag, ang = _gradients(level, ys, xs)
    weight = np.exp(-((xs - xo) ** 2 + (ys - yo) ** 2) / (2.0 * sigma_w ** 2))
    hist = np.zeros(_ORI_HIST_BINS)
    bins = (ang * (_ORI_HIST_BINS / _TWO_PI)).astype(np.intp) % _ORI_HIST_BINS
    np.add.at(hist, bins, mag * weight)

    vmax = hist.max()
    if vmax <= 0.0:
        return []
    out: list[Keypoint] = []
    for i in range(_ORI_HIST_BINS):
        left = hist[(i - 1) % _ORI_HIST_BINS]
        right = hist[(i + 1) % _ORI_HIST_BINS]
        if not (hist[i] > left and hist[i] > right and hist[i] >= _PEAK_KEEP_RATIO * vmax):
            continue
        denom = left - 2.0 * hist[i] + right
        shift = 0.0 if denom == 0.0 else 0.5 * (left - right) / denom
        theta = ((i + 0.5 + shift) * (_TWO_PI / _ORI_HIST_BINS)) % _TWO_PI
        out.append(replace(kp, orientation=theta))
    if not out:
        # plateau histogram (e.g. perfectly symmetric neighbourhood): keep the
        # argmax direction so the keypoint still yields one descriptor
        theta = ((int(np.argmax(hist)) + 0.5) * (_TWO_PI / _ORI_HIST_BINS)) % _TWO_PI
        out.append(replace(kp, orientation=theta))
    return out


def compute_descriptor(gauss: GaussianPyramid, kp: Keypoint) -> KeypointDescriptor | None:
    """4x4x8 orientation histogram over a 16x16 grid rotated to the keypoint
    orientation; Gaussian weighted, trilinearly interpolated, L2-normalized
    with a 0.2 clamp and renormalization. None when no gradient mass lands
    inside the image."""
    level = gauss.octaves[kp.octave][kp.level_index]
    h, w = level.shape
    inv = 1.0 / 2 ** kp.octave
    xo, yo = kp.x * inv, kp.y * inv
    sigma_oct = kp.scale_sigma * inv
    spacing = 0.75 * sigma_oct          # cell edge 3*sigma over 4 samples
    sigma_desc = 0.5 * (_SAMPLES * spacing)

    idx = np.arange(_SAMPLES) - (_SAMPLES - 1) / 2.0
    u, v = np.meshgrid(idx, idx, indexing="ij")   # u: row offset, v: col offset
    du = u.ravel() * spacing
    dv = v.ravel() * spacing
    cos_t, sin_t = math.cos(kp.orientation), math.sin(kp.orientation)
    # grid axis v maps onto the keypoint's orientation direction
    sample_x = xo + cos_t * dv - sin_t * du
    sample_y = yo + sin_t * dv + cos_t * du
    xs = np.round(sample_x).astype(np.intp)
    ys = np.round(sample_y).astype(np.intp)
    ok = (xs >= 1) & (xs <= w - 2) & (ys >= 1) & (ys <= h - 2)
    if not ok.any():
        return None

    mag, ang = _gradients(level, ys[ok], xs[ok])
    rel = np.mod(ang - kp.orientation, _TWO_PI)
    weight = np.exp(-(du[ok] ** 2 + dv[ok] ** 2) / (2.0 * sigma_desc ** 2))
    contrib = mag * weight

    # fractional bin coordinates; samples map onto the 4x4 cell grid
    row_bin = (u.ravel()[ok] + (_SAMPLES - 1) / 2.0 + 0.5) / (_SAMPLES / _GRID) - 0.5
    col_bin = (v.ravel()[ok] + (_SAMPLES - 1) / 2.0 + 0.5) / (_SAMPLES / _GRID) - 0.5
    ori_bin = rel * (_ORI_BINS / _TWO_PI)

    r0 = np.floor(row_bin).astype(np.intp)
    c0 = np.floor(col_bin).astype(np.intp)
    o0 = np.floor(ori_bin).astype(np.intp)
    fr, fc, fo = row_bin - r0, col_bin - c0, ori_bin - o0
    o0 %= _ORI_BINS

    hist = np.zeros((_GRID + 2, _GRID + 2, _ORI_BINS))
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dc, wc in ((0, 1.0 - fc), (1, fc)):
            for do, wo in ((0, 1.0 - fo), (1, fo)):
                np.add.at(hist,
                          (r0 + 1 + dr, c0 + 1 + dc, (o0 + do) % _ORI_BINS),
                          contrib * wr * wc * wo)
    vec = hist[1:-1, 1:-1, :].ravel()
    vec = normalize_clamp(vec)
    if vec is None:
        return None
    return KeypointDescriptor(bins=vec.astype(np.float32), keypoint=kp)


def normalize_clamp(vec: np.ndarray, clamp: float = 0.2) -> np.ndarray | None:
    """Descriptor finishing: L2-normalize, clamp each bin at `clamp`,
    renormalize. None for a zero vector (no gradient mass, nothing to scale)."""
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return None
    clamped = np.minimum(vec / norm, clamp)
    return clamped / np.linalg.norm(clamped)


def extract_keypoints(img: GrayImage, cfg: ScaleSpaceConfig | None = None,
                      ) -> list[KeypointDescriptor]:
    """Full detection + description; deterministic for fixed input and config.

    The result is sorted canonically (octave, y, x, scale, orientation) so
    downstream consumers see the same order however the stages were scheduled.
    """
    cfg = cfg or ScaleSpaceConfig()
    gauss = build_gaussian_pyramid(img, cfg)
    dog = build_dog_pyramid(gauss)
    descriptors: list[KeypointDescriptor] = []
    for kp in detect_extrema(dog, cfg):
        for oriented in assign_orientation(gauss, kp):
            desc = compute_descriptor(gauss, oriented)
            if desc is not None:
                descriptors.append(desc)
    descriptors.sort(key=lambda d: (d.keypoint.octave, d.keypoint.y, d.keypoint.x,
                                    d.keypoint.scale_sigma, d.keypoint.orientation))
    return descriptors


def descriptor_matrix(descriptors: list[KeypointDescriptor]) -> np.ndarray:
    """(n, 128) float32 matrix view of a descriptor list."""
    if not descriptors:
        return np.zeros((0, DESCRIPTOR_LEN), dtype=np.float32)
    return np.stack([d.bins for d in descriptors]).astype(np.float32)


# --- descriptor dump formats ------------------------------------------------

DESC_MAGIC = b"WTKD"
DESC_VERSION = 1


def save_descriptors_text(records: list[tuple[str, KeypointDescriptor]],
                          path: str | Path) -> None:
    """Tab-separated dump: image id, x, y, scale, orientation, 128 bin values."""
    with open(path, "w") as fh:
        header = ["image_id", "x", "y", "scale", "orientation"]
        header += [f"d{i}" for i in range(DESCRIPTOR_LEN)]
        fh.write("\t".join(header) + "\n")
        for image_id, desc in records:
            kp = desc.keypoint
            row = [image_id, format(kp.x, ".6f"), format(kp.y, ".6f"),
                   format(kp.scale_sigma, ".6f"), format(kp.orientation, ".6f")]
            row += [format(float(b), ".9g") for b in desc.bins]
            fh.write("\t".join(row) + "\n")


def save_descriptors_binary(records: list[tuple[str, KeypointDescriptor]],
                            path: str | Path) -> None:
    """Length-prefixed binary dump, little-endian float32 throughout.

    Layout: magic 'WTKD', u32 version, u64 record count, then per record a
    u32-length-prefixed UTF-8 image id, f32 x/y/scale/orientation, a u32
    bin count and that many f32 bins.
    """
    with open(path, "wb") as fh:
        fh.write(DESC_MAGIC)
        fh.write(struct.pack("<IQ", DESC_VERSION, len(records)))
        for image_id, desc in records:
            ident = image_id.encode("utf8")
            kp = desc.keypoint
            fh.write(struct.pack("<I", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<4f", kp.x, kp.y, kp.scale_sigma, kp.orientation))
            fh.write(struct.pack("<I", DESCRIPTOR_LEN))
            fh.write(desc.bins.astype("<f4").tobytes())


def load_descriptors_binary(path: str | Path) -> list[tuple[str, KeypointDescriptor]]:
    records: list[tuple[str, KeypointDescriptor]] = []
    with open(path, "rb") as fh:
        if fh.read(4) != DESC_MAGIC:
            raise InvalidArgumentError(f"{path}: not a descriptor dump")
        version, count = struct.unpack("<IQ", fh.read(12))
        if version != DESC_VERSION:
            raise InvalidArgumentError(f"{path}: unsupported version {version}")
        for _ in range(count):
            (ident_len,) = struct.unpack("<I", fh.read(4))
            image_id = fh.read(ident_len).decode("utf8")
            x, y, scale, orientation = struct.unpack("<4f", fh.read(16))
            (nbins,) = struct.unpack("<I", fh.read(4))
            bins = np.frombuffer(fh.read(4 * nbins), dtype="<f4").astype(np.float32)
            kp = Keypoint(x=x, y=y, octave=0, scale_sigma=scale,
                          orientation=orientation, peak_value=0.0)
            records.append((image_id, KeypointDescriptor(bins=bins, keypoint=kp)))
    return records
