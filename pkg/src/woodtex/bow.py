"""Bag-of-words encoding: descriptor sets to normalized keypoint histograms.

Each descriptor is assigned to its nearest codebook centroid; the
per-cluster occurrence counts divided by the total descriptor count
form the image's feature vector. No smoothing or reweighting is
applied, so every entry is an exact multiple of 1/descriptor_count.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import Codebook, assign_all
from .errors import InvalidArgumentError, NoKeypointsError
from .sift import DESCRIPTOR_LEN, KeypointDescriptor, descriptor_matrix

METHOD_SIFT_BOW = "sift-bow"
METHOD_LBP = "lbp"
METHOD_GLCM = "glcm"

FEATURE_MAGIC = b"WTFM"
FEATURE_VERSION = 1


@dataclass
class FeatureVector:
    values: np.ndarray   # (length,) float
    method: str          # sift-bow | lbp | glcm

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise InvalidArgumentError("feature values must be a 1-D vector")
        if self.method in (METHOD_SIFT_BOW, METHOD_LBP):
            if self.values.min() < 0.0:
                raise InvalidArgumentError(f"{self.method} features must be non-negative")
            if abs(float(self.values.sum()) - 1.0) > 1e-9:
                raise InvalidArgumentError(f"{self.method} features must sum to 1")

    @property
    def length(self) -> int:
        return self.values.shape[0]


def encode_histogram(descriptors: list[KeypointDescriptor] | np.ndarray,
                     codebook: Codebook) -> FeatureVector:
    """Nearest-centroid occurrence histogram normalized by descriptor count."""
    if isinstance(descriptors, np.ndarray):
        mat = descriptors.astype(np.float32)
    else:
        mat = descriptor_matrix(descriptors)
    if mat.shape[0] == 0:
        raise NoKeypointsError()
    if codebook.dim != DESCRIPTOR_LEN or mat.shape[1] != codebook.dim:
        raise InvalidArgumentError(
            f"codebook dim {codebook.dim} does not match descriptor dim {mat.shape[1]}")
    assigns, _ = assign_all(mat, codebook.centroids)
    counts = np.bincount(assigns, minlength=codebook.k).astype(np.float64)
    return FeatureVector(values=counts / mat.shape[0], method=METHOD_SIFT_BOW)


def encode_with_training_codebook(test_descriptors, codebook: Codebook) -> FeatureVector:
    """Encode held-out descriptors against an already-learned codebook.

    Same behaviour as encode_histogram; the separate name exists so the
    pipeline can state (and audit) that test-time descriptors only ever
    meet the codebook here, never the clustering step.
    """
    return encode_histogram(test_descriptors, codebook)


# --- feature matrix file ------------------------------------------------------

def save_feature_matrix(path: str | Path, method: str, vectors: list[FeatureVector],
                        image_ids: list[str], labels: list[int]) -> None:
    """Binary feature matrix plus a text sidecar mapping rows to images.

    Layout: magic 'WTFM', u32 version, u32-length-prefixed method tag,
    u32 feature length, u32 row count, then rows of little-endian float32.
    The sidecar '<path>.index.tsv' holds row, image id and label columns.
    """
    if not vectors:
        raise InvalidArgumentError("no feature vectors to save")
    if not (len(vectors) == len(image_ids) == len(labels)):
        raise InvalidArgumentError("vectors, image_ids and labels must align")
    length = vectors[0].length
    if any(v.length != length for v in vectors):
        raise InvalidArgumentError("inconsistent feature lengths")
    tag = method.encode("ascii")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", FEATURE_VERSION, len(tag)))
        fh.write(tag)
        fh.write(struct.pack("<II", length, len(vectors)))
        for v in vectors:
            fh.write(v.values.astype("<f4").tobytes())
    sidecar = path.with_name(path.name + ".index.tsv")
    with open(sidecar, "w") as fh:
        fh.write("row\timage_id\tlabel\n")
        for i, (ident, label) in enumerate(zip(image_ids, labels)):
            fh.write(f"{i}\t{ident}\t{label}\n")


def load_feature_matrix(path: str | Path) -> tuple[str, np.ndarray, list[str], list[int]]:
    """Returns (method, (n, length) float32 matrix, image ids, labels)."""
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(4) != FEATURE_MAGIC:
            raise InvalidArgumentError(f"{path}: not a feature matrix file")
        version, tag_len = struct.unpack("<II", fh.read(8))
        if version != FEATURE_VERSION:
            raise InvalidArgumentError(f"{path}: unsupported version {version}")
        method = fh.read(tag_len).decode("ascii")
        length, count = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(4 * length * count), dtype="<f4")
        if data.size != length * count:
            raise InvalidArgumentError(f"{path}: truncated feature payload")
    matrix = data.reshape(count, length).astype(np.float32)
    image_ids: list[str] = []
    labels: list[int] = []
    sidecar = path.with_name(path.name + ".index.tsv")
    if sidecar.exists():
        with open(sidecar) as fh:
            next(fh)
            for line in fh:
                _, ident, label = line.rstrip("\n").split("\t")
                image_ids.append(ident)
                labels.append(int(label))
    return method, matrix, image_ids, labels
