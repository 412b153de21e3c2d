"""Command-line interface: extract, train, evaluate, predict, experiment, synth.

Subcommands mirror the pipeline stages so every intermediate artifact
(descriptor dump, codebook, feature matrix, model, report) can be
inspected and regression-tested on its own. Exit codes: 0 success,
1 usage or configuration problem, 2 I/O or decoding problem,
3 numeric or convergence failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bow import (METHOD_GLCM, METHOD_LBP, METHOD_SIFT_BOW,
                  encode_with_training_codebook, save_feature_matrix)
from .classifiers import knn_predict_batch, mlp_predict_batch, svm_predict_batch
from .clustering import save_codebook
from .errors import (ConfigError, ConvergenceError, DatasetError, DecodeError,
                     InvalidArgumentError, NoKeypointsError, WoodtexError)
from .harness import (DEFAULT_RESIZE, DEFAULT_SWEEP_KS, ClassifierSpec, ConfusionMatrix,
                      PipelineConfig, SplitSpec, experiment_cluster_sweep,
                      experiment_method_comparison, generate_synthetic_dataset,
                      load_dataset, load_gray, run_pipeline)
from .model_io import TrainedModel, load_model, save_model
from .sift import ScaleSpaceConfig, extract_keypoints, save_descriptors_binary, \
    save_descriptors_text
from .texture_baselines import GlcmConfig, glcm_feature_vector, lbp_histogram

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

_METHODS = (METHOD_SIFT_BOW, METHOD_LBP, METHOD_GLCM)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        raise ConfigError(message)


def parse_resize(text: str) -> tuple[int, int] | None:
    if text.lower() in ("none", "off"):
        return None
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise ConfigError(f"--resize expects WxH or 'none', got {text!r}") from exc


def parse_classifier(text: str) -> ClassifierSpec:
    """Classifier spec strings: 'knn:k=10', 'knn:weighted', 'svm:quadratic',
    'svm:rbf-medium,c=10', 'mlp:hidden=120'."""
    family, _, rest = text.partition(":")
    opts = [o for o in rest.split(",") if o]
    try:
        if family == "knn":
            k, weighting = 1, "uniform"
            for o in opts:
                if o == "weighted":
                    weighting = "inverse-distance"
                elif o.startswith("k="):
                    k = int(o[2:])
                else:
                    raise ConfigError(f"unknown knn option {o!r}")
            if weighting == "inverse-distance" and not any(o.startswith("k=") for o in opts):
                k = 10
            return ClassifierSpec(family="knn", knn_k=k, knn_weighting=weighting)
        if family == "svm":
            kernel, c = "linear", 1.0
            for o in opts:
                if o.startswith("c="):
                    c = float(o[2:])
                else:
                    kernel = o
            return ClassifierSpec(family="svm", svm_kernel=kernel, svm_c=c)
        if family == "mlp":
            hidden = 100
            for o in opts:
                if o.startswith("hidden="):
                    hidden = int(o[7:])
                else:
                    raise ConfigError(f"unknown mlp option {o!r}")
            return ClassifierSpec(family="mlp", mlp_hidden=hidden)
    except (ValueError, InvalidArgumentError) as exc:
        raise ConfigError(f"bad classifier spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown classifier family {family!r} "
                      "(expected knn, svm or mlp)")


_CONFIG_KEYS = {"method", "clusters", "classifier", "split", "sift", "glcm",
                "clustering", "resize", "seed", "threads"}


def load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"config file {path} has unknown keys: {sorted(unknown)}")
    return doc


def default_threads() -> int:
    raw = os.environ.get("WOODTEX_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"WOODTEX_THREADS must be an integer, got {raw!r}") from exc


def build_pipeline_config(args, file_cfg: dict) -> PipelineConfig:
    """Merge config-file values and command-line overrides; flags win."""
    def pick(flag_value, key, fallback):
        if flag_value is not None:
            return flag_value
        return file_cfg.get(key, fallback)

    sift_doc = dict(file_cfg.get("sift", {}))
    glcm_doc = dict(file_cfg.get("glcm", {}))
    clus_doc = dict(file_cfg.get("clustering", {}))
    split_doc = dict(file_cfg.get("split", {}))
    try:
        sift = ScaleSpaceConfig(**sift_doc)
        glcm = GlcmConfig(**glcm_doc)
    except (TypeError, InvalidArgumentError) as exc:
        raise ConfigError(f"bad sift/glcm config: {exc}") from exc

    method = pick(getattr(args, "method", None), "method", METHOD_SIFT_BOW)
    if method == "sift":
        method = METHOD_SIFT_BOW
    if method not in _METHODS:
        raise ConfigError(f"unknown method {method!r} (expected one of {_METHODS})")

    classifier_text = pick(getattr(args, "classifier", None), "classifier", "knn:k=1")
    classifier = (classifier_text if isinstance(classifier_text, ClassifierSpec)
                  else parse_classifier(classifier_text))

    seed = int(pick(getattr(args, "seed", None), "seed", 0))
    split_mode = (getattr(args, "split", None) or split_doc.get("mode")
                  or ("train-val-test" if classifier.family == "mlp" else "train-test"))
    try:
        split = SplitSpec(mode=split_mode, rng_seed=seed,
                          folds=int(split_doc.get("folds", 5)))
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc

    resize_raw = getattr(args, "resize", None)
    if resize_raw is not None:
        resize_to = parse_resize(resize_raw)
    elif "resize" in file_cfg:
        resize_to = tuple(file_cfg["resize"]) if file_cfg["resize"] else None
    else:
        resize_to = DEFAULT_RESIZE

    threads = pick(getattr(args, "threads", None), "threads", default_threads())
    try:
        return PipelineConfig(
            method=method,
            clusters=int(pick(getattr(args, "clusters", None), "clusters", 300)),
            classifier=classifier, split=split, sift=sift, glcm=glcm,
            clustering_max_iterations=int(clus_doc.get("max_iterations", 300)),
            clustering_tolerance=float(clus_doc.get("tolerance", 1e-6)),
            resize_to=resize_to, seed=seed, threads=int(threads))
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc


# --- subcommand implementations ------------------------------------------------

def cmd_extract(args) -> int:
    cfg = build_pipeline_config(args, load_config_file(args.config))
    dataset = load_dataset(args.input)
    out = Path(args.out)
    if cfg.method == METHOD_SIFT_BOW:
        records = []
        for image_id, _, path in dataset.samples():
            gray = load_gray(path, cfg.resize_to)
            for desc in extract_keypoints(gray, cfg.sift):
                records.append((image_id, desc))
        save_descriptors_binary(records, out)
        save_descriptors_text(records, out.with_suffix(out.suffix + ".tsv"))
        print(f"extracted {len(records)} descriptors from {dataset.n_images} images "
              f"-> {out}")
    else:
        vectors, ids, labels = [], [], []
        for image_id, ci, path in dataset.samples():
            gray = load_gray(path, cfg.resize_to)
            fv = (lbp_histogram(gray) if cfg.method == METHOD_LBP
                  else glcm_feature_vector(gray, cfg.glcm))
            vectors.append(fv)
            ids.append(image_id)
            labels.append(ci)
        save_feature_matrix(out, cfg.method, vectors, ids, labels)
        print(f"extracted {len(vectors)} feature vectors of length "
              f"{vectors[0].length} -> {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = build_pipeline_config(args, load_config_file(args.config))
    dataset = load_dataset(args.input)
    report, model = run_pipeline(dataset, cfg)
    save_model(model, args.out)
    if model.codebook is not None and args.codebook:
        save_codebook(model.codebook, args.codebook)
    if args.report:
        report.save(args.report)
    print(f"trained {cfg.classifier.name} on {cfg.method}; "
          f"test accuracy {report.metrics['accuracy']:.4f} -> {args.out}")
    return EXIT_OK


def _features_for_model(model: TrainedModel, paths, threads: int = 1) -> np.ndarray:
    rows = []
    for path in paths:
        gray = load_gray(path, model.resize_to)
        if model.method == METHOD_SIFT_BOW:
            descs = extract_keypoints(gray, model.sift_config or ScaleSpaceConfig())
            fv = encode_with_training_codebook(descs, model.codebook)
            rows.append(fv.values)
        elif model.method == METHOD_LBP:
            rows.append(lbp_histogram(gray).values)
        else:
            rows.append(glcm_feature_vector(gray, model.glcm_config).values)
    matrix = np.stack(rows)
    if model.standardizer is not None:
        matrix = model.standardizer.apply(matrix)
    return matrix


def _model_predict(model: TrainedModel, matrix: np.ndarray):
    if model.classifier_kind == "knn":
        return knn_predict_batch(model.payload, matrix), None
    if model.classifier_kind == "svm":
        return svm_predict_batch(model.payload, matrix), None
    ids, probs = mlp_predict_batch(model.payload, matrix)
    return ids, probs


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.input)
    if dataset.classes != model.class_names:
        raise ConfigError(
            f"dataset classes {dataset.classes} do not match model classes "
            f"{model.class_names}")
    samples = dataset.samples()
    matrix = _features_for_model(model, [p for _, _, p in samples])
    predictions, _ = _model_predict(model, matrix)
    truth = [ci for _, ci, _ in samples]
    cm = ConfusionMatrix.from_predictions(truth, predictions, len(model.class_names))
    doc = {"accuracy": cm.accuracy, "evaluated_samples": cm.total,
           "confusion_matrix": cm.counts.tolist(),
           "per_class_recall": cm.per_class_recall,
           "classes": model.class_names}
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    matrix = _features_for_model(model, [Path(args.image)])
    predictions, probs = _model_predict(model, matrix)
    name = model.class_names[int(predictions[0])]
    if probs is not None:
        print(json.dumps({"class": name,
                          "probabilities": [float(p) for p in probs[0]]}))
    else:
        print(json.dumps({"class": name}))
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .plotting import (comparison_to_csv, render_comparison_figure,
                           render_sweep_figure, sweep_to_csv)

    cfg = build_pipeline_config(args, load_config_file(args.config))
    dataset = load_dataset(args.input)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.which == "sweep":
        ks = ([int(k) for k in args.ks.split(",")] if args.ks else DEFAULT_SWEEP_KS)
        result = experiment_cluster_sweep(dataset, ks=ks, seed=cfg.seed,
                                          resize_to=cfg.resize_to,
                                          threads=cfg.threads, sift=cfg.sift)
        sweep_to_csv(result, out_dir / "sweep.csv")
        render_sweep_figure(result, out_dir / "sweep.png")
        (out_dir / "sweep.json").write_text(json.dumps(result, indent=2) + "\n")
        print(f"cluster sweep over k={list(ks)} -> {out_dir}")
    elif args.which == "comparison":
        seeds = ([int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.seed])
        result = experiment_method_comparison(
            dataset, seeds=seeds, k=cfg.clusters, resize_to=cfg.resize_to,
            threads=cfg.threads, sift=cfg.sift, glcm=cfg.glcm)
        comparison_to_csv(result, out_dir / "comparison.csv")
        render_comparison_figure(result, out_dir / "comparison.png")
        (out_dir / "comparison.json").write_text(json.dumps(result, indent=2) + "\n")
        print(f"method comparison over seeds {seeds} -> {out_dir}")
    else:
        raise ConfigError(f"unknown experiment {args.which!r} "
                          "(expected 'sweep' or 'comparison')")
    return EXIT_OK


def cmd_synth(args) -> int:
    dataset = generate_synthetic_dataset(args.out, classes=args.classes,
                                         images_per_class=args.per_class,
                                         size=args.size, rng_seed=args.seed)
    print(f"wrote {dataset.n_images} images across {len(dataset.classes)} classes "
          f"-> {args.out}")
    return EXIT_OK


# --- argument wiring -----------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, clusters_default=None):
    p.add_argument("--config", help="JSON configuration file; flags override it")
    p.add_argument("--seed", type=int, default=None, help="master RNG seed")
    p.add_argument("--threads", type=int, default=None,
                   help="worker thread cap (default: WOODTEX_THREADS or 1)")
    p.add_argument("--resize", default=None,
                   help="analysis size WxH or 'none' (default 600x400)")
    p.add_argument("--clusters", type=int, default=clusters_default,
                   help="codebook size k for sift-bow")


def build_parser() -> _Parser:
    parser = _Parser(prog="woodtex",
                     description="Texture classification via SIFT keypoint "
                                 "histograms, with LBP and GLCM baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract features to a file")
    p.add_argument("--input", required=True, help="dataset root directory")
    p.add_argument("--method", choices=_METHODS + ("sift",), default=None)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a classifier over a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=_METHODS + ("sift",), default=None)
    p.add_argument("--classifier", default=None,
                   help="e.g. knn:k=1, svm:quadratic, mlp:hidden=100")
    p.add_argument("--split", choices=("train-test", "train-val-test"), default=None)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--codebook", default=None, help="also write the codebook here")
    p.add_argument("--report", default=None, help="also write the run report here")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model over a labelled directory")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify a single image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment", help="run an experiment grid")
    p.add_argument("--which", required=True, choices=("sweep", "comparison"))
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output directory for report files")
    p.add_argument("--ks", default=None, help="comma-separated cluster counts (sweep)")
    p.add_argument("--seeds", default=None, help="comma-separated seeds (comparison)")
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("synth", help="generate a synthetic texture dataset")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True, dest="per_class")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DecodeError, DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConvergenceError, NoKeypointsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WoodtexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
