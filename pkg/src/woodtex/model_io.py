"""Trained-model container and its tagged binary file format.

A model file carries everything needed to classify a fresh image:
the feature method and its parameters (embedded codebook for keypoint
histograms, quantization config for co-occurrence features), optional
per-feature standardization, the class names and the classifier
payload. All floating-point payloads are little-endian float32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .bow import METHOD_GLCM, METHOD_LBP, METHOD_SIFT_BOW
from .classifiers import (KernelSpec, KnnModel, LabeledSet, MlpModel, Standardizer,
                          SvmBinary, SvmModel)
from .clustering import Codebook
from .errors import InvalidArgumentError
from .sift import ScaleSpaceConfig
from .texture_baselines import GlcmConfig

MODEL_MAGIC = b"WTMO"
MODEL_VERSION = 1


@dataclass
class TrainedModel:
    method: str                       # sift-bow | lbp | glcm
    class_names: list[str]
    classifier_kind: str              # knn | svm | mlp
    payload: KnnModel | SvmModel | MlpModel
    codebook: Codebook | None = None
    sift_config: ScaleSpaceConfig | None = None
    glcm_config: GlcmConfig | None = None
    standardizer: Standardizer | None = None
    resize_to: tuple[int, int] | None = None


def _w_str(fh: BinaryIO, text: str) -> None:
    raw = text.encode("utf8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _r_str(fh: BinaryIO) -> str:
    (n,) = struct.unpack("<I", fh.read(4))
    return fh.read(n).decode("utf8")


def _w_f32(fh: BinaryIO, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype="<f4")
    fh.write(struct.pack("<I", len(arr.shape)))
    fh.write(struct.pack(f"<{len(arr.shape)}I", *arr.shape))
    fh.write(arr.tobytes())


def _r_f32(fh: BinaryIO) -> np.ndarray:
    (ndim,) = struct.unpack("<I", fh.read(4))
    shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
    count = int(np.prod(shape)) if shape else 1
    return np.frombuffer(fh.read(4 * count), dtype="<f4").reshape(shape).astype(np.float64)


def _w_u32s(fh: BinaryIO, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype="<u4")
    fh.write(struct.pack("<I", arr.size))
    fh.write(arr.tobytes())


def _r_u32s(fh: BinaryIO) -> np.ndarray:
    (n,) = struct.unpack("<I", fh.read(4))
    return np.frombuffer(fh.read(4 * n), dtype="<u4").astype(np.intp)


def save_model(model: TrainedModel, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        _w_str(fh, model.method)
        _w_str(fh, model.classifier_kind)
        fh.write(struct.pack("<I", len(model.class_names)))
        for name in model.class_names:
            _w_str(fh, name)
        resize = model.resize_to or (0, 0)
        fh.write(struct.pack("<II", *resize))

        # feature-method parameters
        if model.method == METHOD_SIFT_BOW:
            if model.codebook is None or model.sift_config is None:
                raise InvalidArgumentError("sift-bow model requires codebook and config")
            sc = model.sift_config
            fh.write(struct.pack("<ffIfi", sc.base_sigma, sc.contrast_threshold,
                                 sc.intervals_per_octave, sc.edge_ratio,
                                 -1 if sc.octave_count is None else sc.octave_count))
            fh.write(struct.pack("<IIQd", model.codebook.k, model.codebook.dim,
                                 model.codebook.rng_seed & 0xFFFFFFFFFFFFFFFF,
                                 model.codebook.final_wcss))
            _w_f32(fh, model.codebook.centroids)
        elif model.method == METHOD_GLCM:
            gc = model.glcm_config or GlcmConfig()
            fh.write(struct.pack("<II", gc.gray_levels, gc.distance))
        elif model.method != METHOD_LBP:
            raise InvalidArgumentError(f"unknown feature method {model.method!r}")

        if model.standardizer is not None:
            fh.write(b"\x01")
            _w_f32(fh, model.standardizer.mean)
            _w_f32(fh, model.standardizer.std)
        else:
            fh.write(b"\x00")

        # classifier payload
        p = model.payload
        if model.classifier_kind == "knn":
            assert isinstance(p, KnnModel)
            _w_str(fh, p.weighting)
            fh.write(struct.pack("<I", p.k))
            _w_f32(fh, p.train.features)
            _w_u32s(fh, p.train.labels)
        elif model.classifier_kind == "svm":
            assert isinstance(p, SvmModel)
            k = p.kernel
            _w_str(fh, k.kind)
            fh.write(struct.pack("<ffIf", p.C, k.gamma, k.degree, k.coef0))
            fh.write(struct.pack("<III", p.n_classes, p.dim, len(p.machines)))
            for m in p.machines:
                fh.write(struct.pack("<IIf", m.class_pos, m.class_neg, m.bias))
                _w_f32(fh, m.support_vectors)
                _w_f32(fh, m.dual_coef)
                _w_f32(fh, m.alphas)
                _w_f32(fh, m.sv_labels)
        elif model.classifier_kind == "mlp":
            assert isinstance(p, MlpModel)
            _w_f32(fh, p.w1)
            _w_f32(fh, p.b1)
            _w_f32(fh, p.w2)
            _w_f32(fh, p.b2)
        else:
            raise InvalidArgumentError(f"unknown classifier kind {model.classifier_kind!r}")


def load_model(path: str | Path) -> TrainedModel:
    with open(path, "rb") as fh:
        if fh.read(4) != MODEL_MAGIC:
            raise InvalidArgumentError(f"{path}: not a model file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != MODEL_VERSION:
            raise InvalidArgumentError(f"{path}: unsupported model version {version}")
        method = _r_str(fh)
        classifier_kind = _r_str(fh)
        (n_classes,) = struct.unpack("<I", fh.read(4))
        class_names = [_r_str(fh) for _ in range(n_classes)]
        rw, rh = struct.unpack("<II", fh.read(8))
        resize_to = (rw, rh) if (rw, rh) != (0, 0) else None

        codebook = sift_config = glcm_config = None
        if method == METHOD_SIFT_BOW:
            base_sigma, contrast, intervals, edge_ratio, octaves = struct.unpack(
                "<ffIfi", fh.read(20))
            sift_config = ScaleSpaceConfig(
                base_sigma=base_sigma, intervals_per_octave=intervals,
                octave_count=None if octaves < 0 else octaves,
                contrast_threshold=contrast, edge_ratio=edge_ratio)
            k, dim, seed, wcss_val = struct.unpack("<IIQd", fh.read(24))
            centroids = _r_f32(fh).astype(np.float32)
            if centroids.shape != (k, dim):
                raise InvalidArgumentError(f"{path}: codebook shape mismatch")
            codebook = Codebook(centroids=centroids, rng_seed=seed, final_wcss=wcss_val)
        elif method == METHOD_GLCM:
            levels, distance = struct.unpack("<II", fh.read(8))
            glcm_config = GlcmConfig(gray_levels=levels, distance=distance)
        elif method != METHOD_LBP:
            raise InvalidArgumentError(f"{path}: unknown feature method {method!r}")

        standardizer = None
        if fh.read(1) == b"\x01":
            standardizer = Standardizer(mean=_r_f32(fh), std=_r_f32(fh))

        if classifier_kind == "knn":
            weighting = _r_str(fh)
            (k_neigh,) = struct.unpack("<I", fh.read(4))
            features = _r_f32(fh)
            labels = _r_u32s(fh)
            payload = KnnModel(train=LabeledSet(features=features, labels=labels),
                               k=k_neigh, weighting=weighting)
        elif classifier_kind == "svm":
            kind = _r_str(fh)
            c_val, gamma, degree, coef0 = struct.unpack("<ffIf", fh.read(16))
            spec = KernelSpec(kind=kind, gamma=float(gamma), degree=int(degree),
                              coef0=float(coef0))
            n_cls, dim, n_machines = struct.unpack("<III", fh.read(12))
            machines = []
            for _ in range(n_machines):
                cp, cn, bias = struct.unpack("<IIf", fh.read(12))
                machines.append(SvmBinary(
                    class_pos=cp, class_neg=cn, bias=float(bias),
                    support_vectors=_r_f32(fh), dual_coef=_r_f32(fh),
                    alphas=_r_f32(fh), sv_labels=_r_f32(fh)))
            payload = SvmModel(kernel=spec, C=float(c_val), n_classes=n_cls,
                               dim=dim, machines=machines)
        elif classifier_kind == "mlp":
            payload = MlpModel(w1=_r_f32(fh), b1=_r_f32(fh),
                               w2=_r_f32(fh), b2=_r_f32(fh))
        else:
            raise InvalidArgumentError(f"{path}: unknown classifier {classifier_kind!r}")

    return TrainedModel(method=method, class_names=class_names,
                        classifier_kind=classifier_kind, payload=payload,
                        codebook=codebook, sift_config=sift_config,
                        glcm_config=glcm_config, standardizer=standardizer,
                        resize_to=resize_to)
