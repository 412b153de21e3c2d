"""Dataset handling, splits, pipeline orchestration, metrics and experiments.

The pipeline runs decode -> grayscale -> resize -> feature extraction,
then for keypoint histograms pools the training partition's
descriptors, learns the codebook, and encodes every image against it;
a classifier is trained and evaluated on the held-out test split.
Test-image descriptors never reach the clustering step: the run report
carries an audit trail equating the k-means input count with the
training partition's descriptor total.

Everything stochastic draws from seeds derived off one master seed,
so a report's embedded config reproduces its metrics bit for bit.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bow import (METHOD_GLCM, METHOD_LBP, METHOD_SIFT_BOW, encode_histogram,
                  encode_with_training_codebook)
from .classifiers import (KernelSpec, LabeledSet, MlpTrainConfig, Standardizer,
                          knn_predict_batch, knn_train, mlp_predict_batch, mlp_train,
                          svm_predict_batch, svm_train)
from .clustering import ClusteringConfig, Codebook, kmeans
from .errors import ConfigError, DatasetError, InvalidArgumentError
from .imagecore import GrayImage, load_image, resize_bilinear, sniff_image_file, to_grayscale
from .model_io import TrainedModel
from .rng import SplitMix64, derive_seed
from .sift import ScaleSpaceConfig, descriptor_matrix, extract_keypoints
from .texture_baselines import GlcmConfig, glcm_feature_vector, lbp_histogram

SPLIT_TRAIN_TEST = "train-test"          # 80/20
SPLIT_TRAIN_VAL_TEST = "train-val-test"  # 60/20/20
SPLIT_KFOLD = "kfold"

DEFAULT_RESIZE = (600, 400)
DEFAULT_SWEEP_KS = (250, 300, 350, 400)
METHOD_COMPARISON_K = 300


# --- dataset ------------------------------------------------------------------

@dataclass
class Dataset:
    root: Path
    classes: list[str]
    files: dict[str, list[Path]]

    @property
    def n_images(self) -> int:
        return sum(len(v) for v in self.files.values())

    def samples(self) -> list[tuple[str, int, Path]]:
        """Flattened (image_id, class index, path) rows in canonical order."""
        out = []
        for ci, cls in enumerate(self.classes):
            for path in self.files[cls]:
                out.append((f"{cls}/{path.name}", ci, path))
        return out


def load_dataset(root: str | Path) -> Dataset:
    """Directory-per-class layout, ordered lexicographically throughout."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    if len(classes) < 2:
        raise DatasetError(f"dataset root {root} needs at least 2 class directories")
    files: dict[str, list[Path]] = {}
    for cls in classes:
        entries = sorted(p for p in (root / cls).iterdir() if p.is_file())
        if not entries:
            raise DatasetError(f"class directory {cls!r} contains no files")
        for p in entries:
            if not sniff_image_file(p):
                raise DatasetError(f"cannot decode {p}: not a PNG or JPEG file")
        files[cls] = entries
    return Dataset(root=root, classes=classes, files=files)


# --- splits ---------------------------------------------------------------

@dataclass
class SplitSpec:
    mode: str = SPLIT_TRAIN_TEST
    rng_seed: int = 0
    folds: int = 5

    def __post_init__(self):
        if self.mode not in (SPLIT_TRAIN_TEST, SPLIT_TRAIN_VAL_TEST, SPLIT_KFOLD):
            raise InvalidArgumentError(f"unknown split mode {self.mode!r}")
        if self.mode == SPLIT_KFOLD and self.folds < 2:
            raise InvalidArgumentError("k-fold splits need folds >= 2")


@dataclass
class SplitIndices:
    train: list[int]
    val: list[int]
    test: list[int]

    @property
    def training_partition(self) -> list[int]:
        """Indices whose descriptors may feed preprocessing (codebook, scaling)."""
        return self.train + self.val


def _class_shuffles(labels: list[int], n_classes: int, seed: int) -> list[list[int]]:
    by_class: list[list[int]] = [[] for _ in range(n_classes)]
    for idx, lab in enumerate(labels):
        by_class[lab].append(idx)
    shuffled = []
    for ci, members in enumerate(by_class):
        rng = SplitMix64(derive_seed(seed, f"split/class{ci}"))
        members = list(members)
        rng.shuffle(members)
        shuffled.append(members)
    return shuffled


def split_dataset(labels: list[int], n_classes: int, spec: SplitSpec) -> SplitIndices:
    """Stratified, seed-deterministic, disjoint, exhaustive partition.

    The 60/20/20 split refines the 80/20 split of the same seed: its
    train+validation side equals the 80/20 train side, so both modes
    share one preprocessing partition and one test set.
    """
    if spec.mode == SPLIT_KFOLD:
        raise InvalidArgumentError("use kfold_indices for k-fold specs")
    train: list[int] = []
    val: list[int] = []
    test: list[int] = []
    for ci, members in enumerate(_class_shuffles(labels, n_classes, spec.rng_seed)):
        n = len(members)
        n_hold = n - int(n * 0.8)
        if spec.mode == SPLIT_TRAIN_TEST:
            n_train = n - n_hold
            if n_train < 1 or n_hold < 1:
                raise InvalidArgumentError(
                    f"class {ci} has {n} images, too few for an 80/20 split")
            train.extend(members[:n_train])
            test.extend(members[n_train:])
        else:
            n_train = int(n * 0.6)
            n_val = (n - n_hold) - n_train
            if n_train < 1 or n_val < 1 or n_hold < 1:
                raise InvalidArgumentError(
                    f"class {ci} has {n} images, too few for a 60/20/20 split")
            train.extend(members[:n_train])
            val.extend(members[n_train:n_train + n_val])
            test.extend(members[n_train + n_val:])
    return SplitIndices(train=sorted(train), val=sorted(val), test=sorted(test))


def kfold_indices(labels: list[int], n_classes: int, spec: SplitSpec) -> list[list[int]]:
    """Stratified disjoint exhaustive folds (round-robin over shuffled classes)."""
    if spec.mode != SPLIT_KFOLD:
        raise InvalidArgumentError("kfold_indices requires a kfold SplitSpec")
    folds: list[list[int]] = [[] for _ in range(spec.folds)]
    for members in _class_shuffles(labels, n_classes, spec.rng_seed):
        if len(members) < spec.folds:
            raise InvalidArgumentError(
                f"a class has {len(members)} images, fewer than {spec.folds} folds")
        for pos, idx in enumerate(members):
            folds[pos % spec.folds].append(idx)
    return [sorted(f) for f in folds]


# --- metrics -------------------------------------------------------------

@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (C, C) int64, rows true, cols predicted

    @classmethod
    def from_predictions(cls, true_labels, predicted, n_classes: int) -> "ConfusionMatrix":
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        for t, p in zip(true_labels, predicted):
            counts[int(t), int(p)] += 1
        return cls(counts=counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        total = self.total
        return float(np.trace(self.counts)) / total if total else 0.0

    @property
    def per_class_recall(self) -> list[float]:
        row_sums = self.counts.sum(axis=1)
        return [float(self.counts[i, i]) / row_sums[i] if row_sums[i] else 0.0
                for i in range(self.counts.shape[0])]


# --- classifier grid specs -------------------------------------------------

@dataclass
class ClassifierSpec:
    family: str                  # knn | svm | mlp
    name: str = ""               # display label, defaults from parameters
    knn_k: int = 1
    knn_weighting: str = "uniform"
    svm_kernel: str = "linear"   # linear | rbf-medium | rbf-coarse | quadratic | cubic
    svm_c: float = 1.0
    mlp_hidden: int = 100

    def __post_init__(self):
        if self.family not in ("knn", "svm", "mlp"):
            raise InvalidArgumentError(f"unknown classifier family {self.family!r}")
        if not self.name:
            if self.family == "knn":
                tag = "weighted" if self.knn_weighting != "uniform" else f"k={self.knn_k}"
                self.name = f"knn-{tag}"
            elif self.family == "svm":
                self.name = f"svm-{self.svm_kernel}"
            else:
                self.name = f"mlp-{self.mlp_hidden}"

    def kernel_spec(self, dim: int) -> KernelSpec:
        if self.svm_kernel == "linear":
            return KernelSpec.linear()
        if self.svm_kernel == "rbf-medium":
            return KernelSpec.rbf_medium(dim)
        if self.svm_kernel == "rbf-coarse":
            return KernelSpec.rbf_coarse(dim)
        if self.svm_kernel == "quadratic":
            return KernelSpec.quadratic()
        if self.svm_kernel == "cubic":
            return KernelSpec.cubic()
        raise InvalidArgumentError(f"unknown svm kernel {self.svm_kernel!r}")


def knn_grid() -> list[ClassifierSpec]:
    return [ClassifierSpec(family="knn", knn_k=1),
            ClassifierSpec(family="knn", knn_k=10),
            ClassifierSpec(family="knn", knn_k=100),
            ClassifierSpec(family="knn", knn_k=10, knn_weighting="inverse-distance")]


def svm_grid() -> list[ClassifierSpec]:
    return [ClassifierSpec(family="svm", svm_kernel=k)
            for k in ("linear", "rbf-medium", "rbf-coarse", "quadratic", "cubic")]


def mlp_grid() -> list[ClassifierSpec]:
    return [ClassifierSpec(family="mlp", mlp_hidden=h) for h in (60, 80, 100, 120, 140)]


# --- pipeline ------------------------------------------------------------

@dataclass
class PipelineConfig:
    method: str = METHOD_SIFT_BOW
    clusters: int = METHOD_COMPARISON_K
    classifier: ClassifierSpec = field(default_factory=lambda: ClassifierSpec(family="knn"))
    split: SplitSpec = field(default_factory=SplitSpec)
    sift: ScaleSpaceConfig = field(default_factory=ScaleSpaceConfig)
    glcm: GlcmConfig = field(default_factory=GlcmConfig)
    clustering_max_iterations: int = 300
    clustering_tolerance: float = 1e-6
    resize_to: tuple[int, int] | None = DEFAULT_RESIZE
    seed: int = 0
    threads: int = 1

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "clusters": self.clusters,
            "classifier": vars(self.classifier).copy(),
            "split": {"mode": self.split.mode, "rng_seed": self.split.rng_seed,
                      "folds": self.split.folds},
            "sift": {"base_sigma": self.sift.base_sigma,
                     "intervals_per_octave": self.sift.intervals_per_octave,
                     "octave_count": self.sift.octave_count,
                     "contrast_threshold": self.sift.contrast_threshold,
                     "edge_ratio": self.sift.edge_ratio},
            "glcm": {"gray_levels": self.glcm.gray_levels, "distance": self.glcm.distance},
            "clustering": {"max_iterations": self.clustering_max_iterations,
                           "tolerance": self.clustering_tolerance},
            "resize_to": list(self.resize_to) if self.resize_to else None,
            "seed": self.seed,
            "threads": self.threads,
            "version": __version__,
        }


@dataclass
class RunReport:
    config: dict
    metrics: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)
    excluded_images: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def metrics_payload(self) -> dict:
        """The reproducible part of the report (everything but timings)."""
        return {"config": self.config, "metrics": self.metrics, "audit": self.audit,
                "excluded_images": self.excluded_images, "warnings": self.warnings}

    def to_json(self, indent: int = 2) -> str:
        doc = dict(self.metrics_payload())
        doc["timings"] = self.timings
        return json.dumps(doc, indent=indent)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def load_gray(path: Path, resize_to: tuple[int, int] | None) -> GrayImage:
    gray = to_grayscale(load_image(path))
    if resize_to is not None and (gray.width, gray.height) != tuple(resize_to):
        gray = resize_bilinear(gray, resize_to[0], resize_to[1])
    return gray


class FeatureCache:
    """Per-image feature and codebook memo shared across grid cells and seeds.

    Descriptor extraction does not depend on split or clustering seeds, and
    a codebook is a pure function of the pooled descriptors plus the
    clustering config, so experiment runners reuse both across cells.
    Purely an optimization: results are identical without it.
    """

    def __init__(self):
        self._store: dict[tuple[str, str], object] = {}
        self._codebooks: dict[tuple, Codebook] = {}

    def get(self, image_id: str, method: str):
        return self._store.get((image_id, method))

    def put(self, image_id: str, method: str, value) -> None:
        self._store[(image_id, method)] = value

    def codebook_for(self, pooled: np.ndarray, ccfg: ClusteringConfig) -> Codebook:
        import hashlib

        digest = hashlib.sha1(np.ascontiguousarray(pooled).tobytes()).hexdigest()
        key = (digest, pooled.shape, ccfg.k, ccfg.max_iterations,
               ccfg.tolerance, ccfg.rng_seed)
        book = self._codebooks.get(key)
        if book is None:
            book, _ = kmeans(pooled, ccfg)
            self._codebooks[key] = book
        return book


def extract_features(dataset: Dataset, method: str, cfg: PipelineConfig,
                     cache: FeatureCache | None = None) -> list:
    """Per-image features in dataset order: descriptor matrices for
    sift-bow, FeatureVectors for lbp/glcm. Mapped across `threads`
    workers with order-preserving reassembly."""
    samples = dataset.samples()

    def one(sample):
        image_id, _, path = sample
        if cache is not None:
            hit = cache.get(image_id, method)
            if hit is not None:
                return hit
        gray = load_gray(path, cfg.resize_to)
        if method == METHOD_SIFT_BOW:
            value = descriptor_matrix(extract_keypoints(gray, cfg.sift))
        elif method == METHOD_LBP:
            value = lbp_histogram(gray)
        elif method == METHOD_GLCM:
            value = glcm_feature_vector(gray, cfg.glcm)
        else:
            raise InvalidArgumentError(f"unknown feature method {method!r}")
        if cache is not None:
            cache.put(image_id, method, value)
        return value

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(one, samples))
    return [one(s) for s in samples]


def _train_classifier(spec: ClassifierSpec, train_set: LabeledSet,
                      val_set: LabeledSet | None, n_classes: int, seed: int):
    if spec.family == "knn":
        return knn_train(train_set, spec.knn_k, spec.knn_weighting)
    if spec.family == "svm":
        return svm_train(train_set, spec.kernel_spec(train_set.dim), spec.svm_c)
    if val_set is None:
        raise ConfigError("mlp training requires a train-val-test split")
    return mlp_train(train_set, val_set,
                     MlpTrainConfig(hidden=spec.mlp_hidden,
                                    rng_seed=derive_seed(seed, "mlp-init")),
                     n_classes=n_classes)


def _predict(spec: ClassifierSpec, model, queries: np.ndarray) -> np.ndarray:
    if spec.family == "knn":
        return knn_predict_batch(model, queries)
    if spec.family == "svm":
        return svm_predict_batch(model, queries)
    return mlp_predict_batch(model, queries)[0]


def run_pipeline(dataset: Dataset, cfg: PipelineConfig,
                 cache: FeatureCache | None = None,
                 ) -> tuple[RunReport, TrainedModel]:
    """Full train/evaluate pass; returns the run report and the fitted model."""
    report = RunReport(config=cfg.to_dict())
    samples = dataset.samples()
    labels = [ci for _, ci, _ in samples]
    ids = [sid for sid, _, _ in samples]
    n_classes = len(dataset.classes)

    t0 = time.perf_counter()
    features = extract_features(dataset, cfg.method, cfg, cache)
    report.timings["feature_extraction_s"] = time.perf_counter() - t0

    split = split_dataset(labels, n_classes, cfg.split)

    excluded: set[int] = set()
    if cfg.method == METHOD_SIFT_BOW:
        for idx, mat in enumerate(features):
            if mat.shape[0] == 0:
                excluded.add(idx)
                report.excluded_images.append(ids[idx])

    def live(part: list[int]) -> list[int]:
        return [i for i in part if i not in excluded]

    train_idx = live(split.train)
    val_idx = live(split.val)
    test_idx = live(split.test)
    pool_idx = live(split.training_partition)
    if not train_idx or not test_idx:
        raise InvalidArgumentError("split left an empty train or test partition")

    codebook: Codebook | None = None
    standardizer: Standardizer | None = None

    if cfg.method == METHOD_SIFT_BOW:
        t0 = time.perf_counter()
        per_image_counts = {ids[i]: int(features[i].shape[0]) for i in pool_idx}
        pooled = np.concatenate([features[i] for i in pool_idx], axis=0)
        if cfg.clusters > pooled.shape[0]:
            raise InvalidArgumentError(
                f"clusters={cfg.clusters} exceeds pooled descriptor count {pooled.shape[0]}")
        ccfg = ClusteringConfig(k=cfg.clusters,
                                max_iterations=cfg.clustering_max_iterations,
                                tolerance=cfg.clustering_tolerance,
                                rng_seed=derive_seed(cfg.seed, "kmeans"))
        if cache is not None:
            codebook = cache.codebook_for(pooled, ccfg)
        else:
            codebook, _ = kmeans(pooled, ccfg)
        report.warnings.extend(codebook.seeding_warnings)
        report.timings["clustering_s"] = time.perf_counter() - t0
        report.audit = {
            "kmeans_input_count": int(pooled.shape[0]),
            "training_partition_descriptor_total": int(sum(per_image_counts.values())),
            "training_partition_images": sorted(per_image_counts),
            "per_image_descriptor_counts": per_image_counts,
            "test_images": [ids[i] for i in test_idx],
        }

        test_members = set(test_idx)

        def feature_row(i: int) -> np.ndarray:
            encoder = (encode_with_training_codebook if i in test_members
                       else encode_histogram)
            return encoder(features[i], codebook).values
    else:
        def feature_row(i: int) -> np.ndarray:
            return features[i].values

    x_train = np.stack([feature_row(i) for i in train_idx])
    y_train = np.array([labels[i] for i in train_idx])
    x_val = np.stack([feature_row(i) for i in val_idx]) if val_idx else None
    y_val = np.array([labels[i] for i in val_idx]) if val_idx else None
    x_test = np.stack([feature_row(i) for i in test_idx])
    y_test = np.array([labels[i] for i in test_idx])

    if cfg.method == METHOD_GLCM:
        fit_rows = np.concatenate([x_train] + ([x_val] if x_val is not None else []))
        standardizer = Standardizer.fit(fit_rows)
        x_train = standardizer.apply(x_train)
        x_test = standardizer.apply(x_test)
        if x_val is not None:
            x_val = standardizer.apply(x_val)

    t0 = time.perf_counter()
    train_set = LabeledSet(features=x_train, labels=y_train)
    val_set = (LabeledSet(features=x_val, labels=y_val)
               if x_val is not None and len(x_val) else None)
    classifier = _train_classifier(cfg.classifier, train_set, val_set, n_classes, cfg.seed)
    report.timings["training_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    predictions = _predict(cfg.classifier, classifier, x_test)
    report.timings["evaluation_s"] = time.perf_counter() - t0

    cm = ConfusionMatrix.from_predictions(y_test, predictions, n_classes)
    report.metrics = {
        "accuracy": cm.accuracy,
        "evaluated_samples": cm.total,
        "confusion_matrix": cm.counts.tolist(),
        "per_class_recall": cm.per_class_recall,
        "feature_length": int(x_train.shape[1]),
    }

    model = TrainedModel(method=cfg.method, class_names=list(dataset.classes),
                         classifier_kind=cfg.classifier.family, payload=classifier,
                         codebook=codebook, sift_config=cfg.sift,
                         glcm_config=cfg.glcm, standardizer=standardizer,
                         resize_to=cfg.resize_to)
    return report, model


# --- experiments -----------------------------------------------------------

def default_sweep_classifiers() -> list[ClassifierSpec]:
    return [ClassifierSpec(family="knn", knn_k=1),
            ClassifierSpec(family="svm", svm_kernel="quadratic"),
            ClassifierSpec(family="mlp", mlp_hidden=100)]


def _split_for_family(family: str, seed: int) -> SplitSpec:
    mode = SPLIT_TRAIN_VAL_TEST if family == "mlp" else SPLIT_TRAIN_TEST
    return SplitSpec(mode=mode, rng_seed=seed)


def experiment_cluster_sweep(dataset: Dataset, ks=DEFAULT_SWEEP_KS,
                             classifiers: list[ClassifierSpec] | None = None,
                             seed: int = 0, resize_to=None, threads: int = 1,
                             sift: ScaleSpaceConfig | None = None,
                             cache: FeatureCache | None = None) -> dict:
    """Accuracy grid over cluster counts x classifier configs.

    Cells whose k exceeds the pooled descriptor count are marked
    inapplicable instead of failing the whole sweep.
    """
    classifiers = classifiers or default_sweep_classifiers()
    cache = cache if cache is not None else FeatureCache()
    grid: dict[str, dict[str, object]] = {spec.name: {} for spec in classifiers}
    for k in ks:
        for spec in classifiers:
            cfg = PipelineConfig(method=METHOD_SIFT_BOW, clusters=int(k),
                                 classifier=spec,
                                 split=_split_for_family(spec.family, seed),
                                 resize_to=resize_to, seed=seed, threads=threads,
                                 sift=sift or ScaleSpaceConfig())
            try:
                report, _ = run_pipeline(dataset, cfg, cache)
                grid[spec.name][str(k)] = report.metrics["accuracy"]
            except InvalidArgumentError as exc:
                grid[spec.name][str(k)] = {"inapplicable": str(exc)}
    return {"experiment": "cluster-sweep", "ks": [int(k) for k in ks],
            "classifiers": [spec.name for spec in classifiers],
            "seed": seed, "accuracy": grid}


def experiment_method_comparison(dataset: Dataset, seeds=(0,),
                                 k: int = METHOD_COMPARISON_K,
                                 resize_to=None, threads: int = 1,
                                 sift: ScaleSpaceConfig | None = None,
                                 glcm: GlcmConfig | None = None,
                                 cache: FeatureCache | None = None) -> dict:
    """Three feature methods against the best configuration of each
    classifier family, per seed; feature counts reported alongside."""
    cache = cache if cache is not None else FeatureCache()
    methods = (METHOD_SIFT_BOW, METHOD_LBP, METHOD_GLCM)
    families = {"knn": knn_grid(), "svm": svm_grid(), "mlp": mlp_grid()}
    per_seed = []
    for seed in seeds:
        table: dict[str, dict[str, dict]] = {}
        feature_counts: dict[str, int] = {}
        for method in methods:
            table[method] = {}
            for family, specs in families.items():
                best = None
                for spec in specs:
                    cfg = PipelineConfig(method=method, clusters=k, classifier=spec,
                                         split=_split_for_family(family, seed),
                                         resize_to=resize_to, seed=seed,
                                         threads=threads,
                                         sift=sift or ScaleSpaceConfig(),
                                         glcm=glcm or GlcmConfig())
                    try:
                        report, _ = run_pipeline(dataset, cfg, cache)
                    except InvalidArgumentError as exc:
                        entry = {"config": spec.name, "inapplicable": str(exc)}
                        if best is None:
                            best = entry
                        continue
                    acc = report.metrics["accuracy"]
                    feature_counts[method] = report.metrics["feature_length"]
                    if best is None or "accuracy" not in best or acc > best["accuracy"]:
                        best = {"config": spec.name, "accuracy": acc}
                table[method][family] = best
        per_seed.append({"seed": seed, "accuracy": table})
    return {"experiment": "method-comparison", "k": k,
            "methods": list(methods), "families": list(families),
            "feature_counts": feature_counts, "seeds": list(seeds),
            "runs": per_seed}


# --- synthetic dataset -------------------------------------------------------

def generate_synthetic_dataset(out_dir: str | Path, classes: int,
                               images_per_class: int, size: int = 256,
                               rng_seed: int = 0) -> Dataset:
    """Procedural texture corpus: per class an oriented grating with a
    class-specific frequency and direction plus a pore-like blob field
    with class-specific density and radius, lightly noised. Deterministic
    per seed; images are written as 8-bit grayscale PNG."""
    from PIL import Image as _PILImage

    if classes < 2:
        raise InvalidArgumentError("need at least 2 classes")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    for ci in range(classes):
        cls_name = f"class{ci:02d}"
        cls_dir = out_dir / cls_name
        cls_dir.mkdir(exist_ok=True)
        frequency = 5.0 + 9.0 * ci                    # grating cycles per image
        theta = np.pi * ci / classes                  # stripe direction
        blob_count = 12 + 30 * ((ci * 2 + 1) % classes)
        blob_radius = 2.5 + 1.5 * ((ci * 3 + 1) % classes)
        for ii in range(images_per_class):
            rng = SplitMix64(derive_seed(rng_seed, f"synth/{cls_name}/{ii}"))
            phase = rng.random() * 2.0 * np.pi
            freq = frequency * (0.95 + 0.1 * rng.random())
            ang = theta + (rng.random() - 0.5) * 0.12
            axis = (xx * np.cos(ang) + yy * np.sin(ang)) / size
            img = 0.55 + 0.22 * np.sin(2.0 * np.pi * freq * axis + phase)

            n_blobs = int(blob_count * (0.8 + 0.4 * rng.random()))
            for _ in range(n_blobs):
                bx = rng.random() * size
                by = rng.random() * size
                r = blob_radius * (0.8 + 0.4 * rng.random())
                d2 = (xx - bx) ** 2 + (yy - by) ** 2
                img -= 0.35 * np.exp(-d2 / (2.0 * r * r))

            img += 0.05 * (rng.random_array(size * size).reshape(size, size) - 0.5)
            img = np.clip(img, 0.0, 1.0)
            data = np.round(img * 255.0).astype(np.uint8)
            _PILImage.fromarray(data, mode="L").save(cls_dir / f"img{ii:04d}.png",
                                                     format="PNG")
    return load_dataset(out_dir)
