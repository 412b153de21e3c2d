import json

import numpy as np
import pytest
from PIL import Image as PILImage

from woodtex.bow import encode_histogram
from woodtex.clustering import ClusteringConfig, kmeans
from woodtex.errors import ConfigError, DatasetError, InvalidArgumentError
from woodtex.harness import (ClassifierSpec, ConfusionMatrix, FeatureCache,
                             PipelineConfig, SplitSpec, experiment_cluster_sweep,
                             experiment_method_comparison, generate_synthetic_dataset,
                             kfold_indices, load_dataset, load_gray, run_pipeline,
                             split_dataset)
from woodtex.sift import ScaleSpaceConfig, extract_keypoints


def write_png(path, value=128, size=40):
    arr = np.full((size, size), value, dtype=np.uint8)
    PILImage.fromarray(arr, mode="L").save(path, format="PNG")


class TestLoadDataset:
    def test_two_by_three_layout(self, tmp_path):
        for cls in ("beta", "alpha"):
            (tmp_path / cls).mkdir()
            for i in range(3):
                write_png(tmp_path / cls / f"im{i}.png", value=50 + i)
        ds = load_dataset(tmp_path)
        assert ds.classes == ["alpha", "beta"]
        assert all(len(ds.files[c]) == 3 for c in ds.classes)
        ids = [s[0] for s in ds.samples()]
        assert ids == sorted(ids)

    def test_non_image_file_named_in_error(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        write_png(tmp_path / "a" / "ok.png")
        write_png(tmp_path / "b" / "ok.png")
        bad = tmp_path / "a" / "notes.txt"
        bad.write_text("not an image")
        with pytest.raises(DatasetError, match="notes.txt"):
            load_dataset(tmp_path)

    def test_empty_class_named_in_error(self, tmp_path):
        (tmp_path / "full").mkdir()
        write_png(tmp_path / "full" / "x.png")
        (tmp_path / "void").mkdir()
        with pytest.raises(DatasetError, match="void"):
            load_dataset(tmp_path)

    def test_single_class_rejected(self, tmp_path):
        (tmp_path / "only").mkdir()
        write_png(tmp_path / "only" / "x.png")
        with pytest.raises(DatasetError):
            load_dataset(tmp_path)


class TestSplits:
    def _labels(self, per_class=100, classes=3):
        return [c for c in range(classes) for _ in range(per_class)], classes

    def test_eighty_twenty(self):
        labels, n_classes = self._labels()
        split = split_dataset(labels, n_classes, SplitSpec(mode="train-test", rng_seed=1))
        assert len(split.train) == 240 and len(split.test) == 60
        for c in range(n_classes):
            assert sum(1 for i in split.train if labels[i] == c) == 80
            assert sum(1 for i in split.test if labels[i] == c) == 20

    def test_sixty_twenty_twenty(self):
        labels, n_classes = self._labels()
        split = split_dataset(labels, n_classes,
                              SplitSpec(mode="train-val-test", rng_seed=1))
        for c in range(n_classes):
            assert sum(1 for i in split.train if labels[i] == c) == 60
            assert sum(1 for i in split.val if labels[i] == c) == 20
            assert sum(1 for i in split.test if labels[i] == c) == 20

    def test_disjoint_exhaustive_and_deterministic(self):
        labels, n_classes = self._labels(per_class=25)
        spec = SplitSpec(mode="train-val-test", rng_seed=9)
        a = split_dataset(labels, n_classes, spec)
        b = split_dataset(labels, n_classes, spec)
        assert (a.train, a.val, a.test) == (b.train, b.val, b.test)
        union = set(a.train) | set(a.val) | set(a.test)
        assert union == set(range(len(labels)))
        assert len(a.train) + len(a.val) + len(a.test) == len(labels)

    def test_train_val_refines_train_test(self):
        labels, n_classes = self._labels(per_class=40)
        tt = split_dataset(labels, n_classes, SplitSpec(mode="train-test", rng_seed=3))
        tvt = split_dataset(labels, n_classes,
                            SplitSpec(mode="train-val-test", rng_seed=3))
        assert sorted(tvt.training_partition) == sorted(tt.train)
        assert sorted(tvt.test) == sorted(tt.test)

    def test_kfold_disjoint_exhaustive_stratified(self):
        labels, n_classes = self._labels(per_class=20)
        folds = kfold_indices(labels, n_classes, SplitSpec(mode="kfold", folds=5))
        assert len(folds) == 5
        seen = [i for f in folds for i in f]
        assert sorted(seen) == list(range(len(labels)))
        for f in folds:
            for c in range(n_classes):
                assert sum(1 for i in f if labels[i] == c) == 4

    def test_class_too_small(self):
        with pytest.raises(InvalidArgumentError):
            split_dataset([0, 0, 1], 2, SplitSpec(mode="train-val-test"))
        with pytest.raises(InvalidArgumentError):
            kfold_indices([0, 1], 2, SplitSpec(mode="kfold", folds=3))


class TestConfusionMatrix:
    def test_totals_and_accuracy(self):
        cm = ConfusionMatrix.from_predictions([0, 0, 1, 1, 2], [0, 1, 1, 1, 0], 3)
        assert cm.total == 5
        assert cm.accuracy == pytest.approx(3 / 5)
        assert cm.counts.sum() == 5
        assert cm.per_class_recall == pytest.approx([0.5, 1.0, 0.0])


class TestRunPipeline:
    def test_deterministic_reports(self, small_dataset):
        cfg = PipelineConfig(method="sift-bow", clusters=10,
                             classifier=ClassifierSpec(family="knn", knn_k=1),
                             split=SplitSpec(mode="train-test", rng_seed=4),
                             resize_to=None, seed=4)
        cache = FeatureCache()
        report_a, _ = run_pipeline(small_dataset, cfg, cache)
        report_b, _ = run_pipeline(small_dataset, cfg, cache)
        assert json.dumps(report_a.metrics_payload()) == \
            json.dumps(report_b.metrics_payload())

    def test_audit_counts_match(self, small_dataset):
        cfg = PipelineConfig(method="sift-bow", clusters=8,
                             classifier=ClassifierSpec(family="knn", knn_k=1),
                             split=SplitSpec(mode="train-test", rng_seed=0),
                             resize_to=None, seed=0)
        report, model = run_pipeline(small_dataset, cfg)
        audit = report.audit
        assert audit["kmeans_input_count"] == audit["training_partition_descriptor_total"]
        assert audit["kmeans_input_count"] == \
            sum(audit["per_image_descriptor_counts"].values())
        assert not (set(audit["test_images"])
                    & set(audit["training_partition_images"]))
        assert model.codebook.k == 8

    def test_zero_keypoint_images_excluded_and_listed(self, tmp_path):
        # two textured classes plus constant images sprinkled in
        ds_root = tmp_path / "data"
        generate_synthetic_dataset(ds_root, classes=2, images_per_class=6,
                                   size=64, rng_seed=3)
        flat = ds_root / "class00" / "zzz_flat.png"
        write_png(flat, value=200, size=64)
        ds = load_dataset(ds_root)
        cfg = PipelineConfig(method="sift-bow", clusters=5,
                             classifier=ClassifierSpec(family="knn", knn_k=1),
                             split=SplitSpec(mode="train-test", rng_seed=1),
                             resize_to=None, seed=1)
        report, _ = run_pipeline(ds, cfg)
        assert "class00/zzz_flat.png" in report.excluded_images
        assert report.metrics["evaluated_samples"] <= 13 - 1

    def test_mlp_requires_validation_split(self, small_dataset):
        cfg = PipelineConfig(method="lbp",
                             classifier=ClassifierSpec(family="mlp", mlp_hidden=60),
                             split=SplitSpec(mode="train-test", rng_seed=0),
                             resize_to=None)
        with pytest.raises(ConfigError):
            run_pipeline(small_dataset, cfg)

    def test_too_many_clusters_clear_error(self, small_dataset):
        cfg = PipelineConfig(method="sift-bow", clusters=10 ** 6,
                             classifier=ClassifierSpec(family="knn", knn_k=1),
                             split=SplitSpec(mode="train-test", rng_seed=0),
                             resize_to=None)
        with pytest.raises(InvalidArgumentError, match="exceeds pooled"):
            run_pipeline(small_dataset, cfg)


class TestSyntheticDataset:
    def test_counts_and_decodability(self, tmp_path):
        ds = generate_synthetic_dataset(tmp_path / "s", classes=5,
                                        images_per_class=4, size=64, rng_seed=0)
        assert len(ds.classes) == 5
        assert ds.n_images == 20
        for _, _, path in ds.samples():
            gray = load_gray(path, None)
            assert gray.pixels.shape == (64, 64)

    def test_same_seed_byte_identical(self, tmp_path):
        a = generate_synthetic_dataset(tmp_path / "a", classes=2,
                                       images_per_class=2, size=48, rng_seed=5)
        b = generate_synthetic_dataset(tmp_path / "b", classes=2,
                                       images_per_class=2, size=48, rng_seed=5)
        for (_, _, pa), (_, _, pb) in zip(a.samples(), b.samples()):
            assert pa.read_bytes() == pb.read_bytes()

    def test_class_separability_of_bow_histograms(self, small_dataset):
        cfg = ScaleSpaceConfig()
        descs, labels = [], []
        for image_id, ci, path in small_dataset.samples():
            mat = extract_keypoints(load_gray(path, None), cfg)
            if mat:
                descs.append(np.stack([d.bins for d in mat]))
                labels.append(ci)
        pooled = np.concatenate(descs)
        book, _ = kmeans(pooled, ClusteringConfig(k=12, rng_seed=0))
        hists = np.stack([encode_histogram(d, book).values for d in descs])
        labels = np.array(labels)
        intra, inter = [], []
        for i in range(len(hists)):
            for j in range(i + 1, len(hists)):
                dist = float(np.linalg.norm(hists[i] - hists[j]))
                (intra if labels[i] == labels[j] else inter).append(dist)
        assert np.mean(inter) > np.mean(intra)


class TestExperiments:
    def test_sweep_grid_shape_and_inapplicable_cells(self, small_dataset):
        specs = [ClassifierSpec(family="knn", knn_k=1)]
        result = experiment_cluster_sweep(small_dataset, ks=(6, 10 ** 6),
                                          classifiers=specs, seed=0)
        cells = result["accuracy"]["knn-k=1"]
        assert set(cells) == {"6", str(10 ** 6)}
        assert isinstance(cells["6"], float)
        assert "inapplicable" in cells[str(10 ** 6)]

    def test_comparison_reports_feature_counts(self, small_dataset):
        result = experiment_method_comparison(small_dataset, seeds=(0,), k=6)
        assert result["feature_counts"] == {"sift-bow": 6, "lbp": 256, "glcm": 24}
        run = result["runs"][0]["accuracy"]
        assert set(run) == {"sift-bow", "lbp", "glcm"}
        for fams in run.values():
            assert set(fams) == {"knn", "svm", "mlp"}
            for cell in fams.values():
                assert "accuracy" in cell or "inapplicable" in cell
