import json
import struct

import numpy as np
import pytest

from woodtex.cli import main, parse_classifier, parse_resize
from woodtex.errors import ConfigError
from woodtex.sift import load_descriptors_binary


@pytest.fixture(scope="module")
def cli_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "data"
    assert main(["synth", "--classes", "3", "--per-class", "6",
                 "--out", str(root), "--size", "96", "--seed", "21"]) == 0
    return root


class TestParsers:
    def test_classifier_specs(self):
        spec = parse_classifier("knn:k=10")
        assert (spec.family, spec.knn_k) == ("knn", 10)
        spec = parse_classifier("knn:weighted")
        assert (spec.knn_k, spec.knn_weighting) == (10, "inverse-distance")
        spec = parse_classifier("svm:quadratic,c=5")
        assert (spec.svm_kernel, spec.svm_c) == ("quadratic", 5.0)
        spec = parse_classifier("mlp:hidden=120")
        assert spec.mlp_hidden == 120
        with pytest.raises(ConfigError):
            parse_classifier("forest:trees=10")
        with pytest.raises(ConfigError):
            parse_classifier("knn:k=zero")

    def test_resize(self):
        assert parse_resize("600x400") == (600, 400)
        assert parse_resize("none") is None
        with pytest.raises(ConfigError):
            parse_resize("600by400")


class TestSynth:
    def test_counts(self, cli_dataset):
        files = sorted(cli_dataset.rglob("*.png"))
        assert len(files) == 18
        assert len([d for d in cli_dataset.iterdir() if d.is_dir()]) == 3

    def test_same_seed_idempotent(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert main(["synth", "--classes", "2", "--per-class", "2",
                         "--out", str(out), "--size", "48", "--seed", "9"]) == 0
        for pa, pb in zip(sorted(out_a.rglob("*.png")), sorted(out_b.rglob("*.png"))):
            assert pa.read_bytes() == pb.read_bytes()


class TestExtract:
    def test_sift_descriptor_dump_consistency(self, cli_dataset, tmp_path, capsys):
        out = tmp_path / "descs.bin"
        assert main(["extract", "--input", str(cli_dataset), "--method", "sift-bow",
                     "--out", str(out), "--resize", "none"]) == 0
        summary = capsys.readouterr().out
        records = load_descriptors_binary(out)
        assert f"extracted {len(records)} descriptors" in summary
        assert out.with_suffix(out.suffix + ".tsv").exists()

    def test_lbp_vector_length(self, cli_dataset, tmp_path, capsys):
        out = tmp_path / "lbp.bin"
        assert main(["extract", "--input", str(cli_dataset), "--method", "lbp",
                     "--out", str(out), "--resize", "none"]) == 0
        assert "length 256" in capsys.readouterr().out
        with open(out, "rb") as fh:
            assert fh.read(4) == b"WTFM"
            _, tag_len = struct.unpack("<II", fh.read(8))
            assert fh.read(tag_len) == b"lbp"
            length, count = struct.unpack("<II", fh.read(8))
        assert (length, count) == (256, 18)

    def test_unknown_method_is_usage_error(self, cli_dataset, tmp_path):
        code = main(["extract", "--input", str(cli_dataset), "--method", "wavelets",
                     "--out", str(tmp_path / "x.bin")])
        assert code == 1

    def test_missing_input_is_io_error(self, tmp_path):
        code = main(["extract", "--input", str(tmp_path / "nowhere"),
                     "--method", "lbp", "--out", str(tmp_path / "x.bin")])
        assert code == 2


@pytest.fixture(scope="module")
def trained(cli_dataset, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("model")
    model = out_dir / "model.bin"
    codebook = out_dir / "codebook.bin"
    report = out_dir / "report.json"
    code = main(["train", "--input", str(cli_dataset), "--method", "sift-bow",
                 "--clusters", "300", "--classifier", "knn:k=1",
                 "--out", str(model), "--codebook", str(codebook),
                 "--report", str(report), "--resize", "none", "--seed", "5"])
    assert code == 0
    return model, codebook, report


class TestTrainEvaluatePredict:
    def test_codebook_header_reports_k(self, trained):
        _, codebook, _ = trained
        with open(codebook, "rb") as fh:
            assert fh.read(4) == b"WTCB"
            _, k, dim, _, _ = struct.unpack("<IIIQd", fh.read(28))
        assert (k, dim) == (300, 128)

    def test_report_contains_config_and_audit(self, trained):
        _, _, report = trained
        doc = json.loads(report.read_text())
        assert doc["config"]["clusters"] == 300
        assert doc["config"]["seed"] == 5
        assert doc["audit"]["kmeans_input_count"] == \
            doc["audit"]["training_partition_descriptor_total"]

    def test_rerun_model_byte_identical(self, cli_dataset, trained, tmp_path):
        model, _, _ = trained
        again = tmp_path / "model2.bin"
        code = main(["train", "--input", str(cli_dataset), "--method", "sift-bow",
                     "--clusters", "300", "--classifier", "knn:k=1",
                     "--out", str(again), "--resize", "none", "--seed", "5"])
        assert code == 0
        assert again.read_bytes() == model.read_bytes()

    def test_evaluate_training_set_with_1nn(self, cli_dataset, trained,
                                            tmp_path, capsys):
        # rebuild the train partition (the samples the 1-NN model stores) and
        # evaluate on exactly those: every query is its own nearest neighbour
        import shutil

        from woodtex.harness import SplitSpec, load_dataset, split_dataset
        model, _, report = trained
        seed = json.loads(report.read_text())["config"]["seed"]
        ds = load_dataset(cli_dataset)
        samples = ds.samples()
        labels = [ci for _, ci, _ in samples]
        split = split_dataset(labels, len(ds.classes),
                              SplitSpec(mode="train-test", rng_seed=seed))
        train_dir = tmp_path / "train_only"
        for idx in split.train:
            image_id, _, path = samples[idx]
            dest = train_dir / image_id
            dest.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(path, dest)
        capsys.readouterr()
        assert main(["evaluate", "--model", str(model),
                     "--input", str(train_dir)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["accuracy"] == 1.0
        assert doc["evaluated_samples"] == len(split.train)
        counts = np.array(doc["confusion_matrix"])
        assert counts.trace() == len(split.train)

    def test_evaluate_twice_identical(self, cli_dataset, trained, capsys):
        model, _, _ = trained
        main(["evaluate", "--model", str(model), "--input", str(cli_dataset)])
        first = capsys.readouterr().out
        main(["evaluate", "--model", str(model), "--input", str(cli_dataset)])
        assert capsys.readouterr().out == first

    def test_predict_training_image_own_label(self, cli_dataset, trained, capsys):
        model, _, _ = trained
        image = sorted((cli_dataset / "class01").glob("*.png"))[0]
        assert main(["predict", "--model", str(model), "--image", str(image)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["class"] == "class01"

    def test_predict_mlp_emits_probabilities(self, cli_dataset, tmp_path, capsys):
        model = tmp_path / "mlp.bin"
        assert main(["train", "--input", str(cli_dataset), "--method", "lbp",
                     "--classifier", "mlp:hidden=60", "--out", str(model),
                     "--resize", "none", "--seed", "2"]) == 0
        capsys.readouterr()
        image = sorted((cli_dataset / "class00").glob("*.png"))[0]
        assert main(["predict", "--model", str(model), "--image", str(image)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc["probabilities"]) == 3
        assert sum(doc["probabilities"]) == pytest.approx(1.0, abs=1e-6)

    def test_too_many_clusters_fails_fast(self, cli_dataset, tmp_path):
        code = main(["train", "--input", str(cli_dataset), "--method", "sift-bow",
                     "--clusters", "999999", "--classifier", "knn:k=1",
                     "--out", str(tmp_path / "m.bin"), "--resize", "none"])
        assert code == 1
        assert not (tmp_path / "m.bin").exists()


class TestExperimentCommand:
    def test_sweep_writes_csv_json_png(self, cli_dataset, tmp_path):
        out = tmp_path / "exp"
        code = main(["experiment", "--which", "sweep", "--input", str(cli_dataset),
                     "--out", str(out), "--ks", "6,9", "--resize", "none",
                     "--seed", "1"])
        assert code == 0
        assert (out / "sweep.csv").exists()
        assert (out / "sweep.png").exists()
        doc = json.loads((out / "sweep.json").read_text())
        assert doc["ks"] == [6, 9]
        header = (out / "sweep.csv").read_text().splitlines()[0]
        assert header == "classifier,k=6,k=9"

    def test_comparison_writes_csv_json_png(self, tmp_path):
        data = tmp_path / "tiny"
        assert main(["synth", "--classes", "2", "--per-class", "5",
                     "--out", str(data), "--size", "64", "--seed", "3"]) == 0
        out = tmp_path / "cmp"
        code = main(["experiment", "--which", "comparison", "--input", str(data),
                     "--out", str(out), "--clusters", "5", "--resize", "none",
                     "--seeds", "0"])
        assert code == 0
        doc = json.loads((out / "comparison.json").read_text())
        assert doc["feature_counts"]["lbp"] == 256
        assert (out / "comparison.csv").exists()
        assert (out / "comparison.png").exists()

    def test_unknown_experiment_usage_error(self, cli_dataset, tmp_path):
        assert main(["experiment", "--which", "bogus", "--input", str(cli_dataset),
                     "--out", str(tmp_path / "x")]) == 1


class TestConfigFile:
    def test_config_file_with_override(self, cli_dataset, tmp_path, capsys):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({
            "method": "lbp", "seed": 7, "resize": None,
            "classifier": "knn:k=1"}))
        model = tmp_path / "m.bin"
        assert main(["train", "--input", str(cli_dataset), "--config", str(cfg_path),
                     "--out", str(model)]) == 0
        assert "lbp" in capsys.readouterr().out

    def test_unknown_config_key_rejected(self, cli_dataset, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({"metod": "lbp"}))
        assert main(["train", "--input", str(cli_dataset), "--config", str(cfg_path),
                     "--out", str(tmp_path / "m.bin")]) == 1

    def test_threads_env_override(self, cli_dataset, tmp_path, monkeypatch):
        monkeypatch.setenv("WOODTEX_THREADS", "2")
        model = tmp_path / "m.bin"
        assert main(["train", "--input", str(cli_dataset), "--method", "lbp",
                     "--classifier", "knn:k=1", "--out", str(model),
                     "--resize", "none"]) == 0
        monkeypatch.setenv("WOODTEX_THREADS", "not-a-number")
        assert main(["train", "--input", str(cli_dataset), "--method", "lbp",
                     "--classifier", "knn:k=1", "--out", str(model),
                     "--resize", "none"]) == 1
