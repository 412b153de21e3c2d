import numpy as np
import pytest

from woodtex.bow import (FeatureVector, encode_histogram, encode_with_training_codebook,
                         load_feature_matrix, save_feature_matrix)
from woodtex.clustering import Codebook
from woodtex.errors import InvalidArgumentError, NoKeypointsError


def codebook_with_centroids(centroids):
    return Codebook(centroids=np.asarray(centroids, dtype=np.float32), rng_seed=0)


def one_hot_descriptor(idx, scale=1.0):
    v = np.zeros(128, dtype=np.float32)
    v[idx] = scale
    return v


def simple_codebook(k=4):
    # centroid i is the unit vector along axis i; descriptors built the same way
    cents = np.zeros((k, 128), dtype=np.float32)
    for i in range(k):
        cents[i, i] = 1.0
    return codebook_with_centroids(cents)


class TestEncodeHistogram:
    def test_counts_divided_by_total(self):
        book = simple_codebook(4)
        descs = np.stack([one_hot_descriptor(0), one_hot_descriptor(0),
                          one_hot_descriptor(1), one_hot_descriptor(2)])
        fv = encode_histogram(descs, book)
        np.testing.assert_allclose(fv.values, [0.5, 0.25, 0.25, 0.0])
        assert fv.method == "sift-bow"
        assert fv.length == 4

    def test_single_cluster_one_hot(self):
        book = simple_codebook(3)
        descs = np.stack([one_hot_descriptor(1)] * 5)
        fv = encode_histogram(descs, book)
        np.testing.assert_allclose(fv.values, [0.0, 1.0, 0.0])

    def test_sum_one_and_length_k(self):
        rng = np.random.default_rng(0)
        book = codebook_with_centroids(rng.random((7, 128)))
        descs = rng.random((33, 128)).astype(np.float32)
        fv = encode_histogram(descs, book)
        assert fv.length == 7
        assert fv.values.sum() == pytest.approx(1.0, abs=1e-9)
        # entries are exact multiples of 1/33
        np.testing.assert_allclose(fv.values * 33, np.round(fv.values * 33), atol=1e-9)

    def test_order_invariance(self):
        rng = np.random.default_rng(1)
        book = codebook_with_centroids(rng.random((5, 128)))
        descs = rng.random((20, 128)).astype(np.float32)
        a = encode_histogram(descs, book)
        b = encode_histogram(descs[::-1].copy(), book)
        np.testing.assert_array_equal(a.values, b.values)

    def test_empty_descriptors_hard_error(self):
        book = simple_codebook(2)
        with pytest.raises(NoKeypointsError):
            encode_histogram(np.zeros((0, 128), dtype=np.float32), book)

    def test_dim_mismatch(self):
        book = codebook_with_centroids(np.zeros((3, 64), dtype=np.float32))
        with pytest.raises(InvalidArgumentError):
            encode_histogram(np.zeros((2, 64), dtype=np.float32), book)


class TestTrainingCodebookContract:
    def test_codebook_only_dependence(self):
        rng = np.random.default_rng(2)
        book = codebook_with_centroids(rng.random((6, 128)))
        test_descs = rng.random((10, 128)).astype(np.float32)
        before = encode_with_training_codebook(test_descs, book)
        # unrelated extra training images cannot change a test encoding
        after = encode_with_training_codebook(test_descs, book)
        np.testing.assert_array_equal(before.values, after.values)

    def test_matches_encode_histogram(self):
        rng = np.random.default_rng(3)
        book = codebook_with_centroids(rng.random((4, 128)))
        descs = rng.random((9, 128)).astype(np.float32)
        np.testing.assert_array_equal(
            encode_with_training_codebook(descs, book).values,
            encode_histogram(descs, book).values)


class TestFeatureVectorInvariants:
    def test_histogram_methods_must_normalize(self):
        with pytest.raises(InvalidArgumentError):
            FeatureVector(values=np.array([0.5, 0.4]), method="lbp")
        with pytest.raises(InvalidArgumentError):
            FeatureVector(values=np.array([-0.5, 1.5]), method="sift-bow")
        fv = FeatureVector(values=np.array([0.25, 0.75]), method="sift-bow")
        assert fv.length == 2

    def test_glcm_unconstrained(self):
        fv = FeatureVector(values=np.array([3.0, -2.0, 100.0]), method="glcm")
        assert fv.length == 3


class TestFeatureMatrixFile:
    def test_roundtrip_with_sidecar(self, tmp_path):
        rng = np.random.default_rng(4)
        vals = rng.random((3, 8))
        vals /= vals.sum(axis=1, keepdims=True)
        vectors = [FeatureVector(values=v, method="sift-bow") for v in vals]
        path = tmp_path / "features.bin"
        save_feature_matrix(path, "sift-bow", vectors, ["a/x", "b/y", "c/z"], [0, 1, 2])
        method, matrix, ids, labels = load_feature_matrix(path)
        assert method == "sift-bow"
        assert matrix.shape == (3, 8)
        np.testing.assert_allclose(matrix, vals.astype(np.float32))
        assert ids == ["a/x", "b/y", "c/z"]
        assert labels == [0, 1, 2]

    def test_rewrite_byte_identical(self, tmp_path):
        vectors = [FeatureVector(values=np.array([0.5, 0.5]), method="lbp")]
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_feature_matrix(p1, "lbp", vectors, ["i"], [0])
        save_feature_matrix(p2, "lbp", vectors, ["i"], [0])
        assert p1.read_bytes() == p2.read_bytes()

    def test_misaligned_inputs_rejected(self, tmp_path):
        vectors = [FeatureVector(values=np.array([1.0]), method="glcm")]
        with pytest.raises(InvalidArgumentError):
            save_feature_matrix(tmp_path / "x.bin", "glcm", vectors, ["a", "b"], [0])
