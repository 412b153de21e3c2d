import math

import numpy as np
import pytest

from woodtex.errors import InvalidArgumentError
from woodtex.imagecore import GrayImage
from woodtex.texture_baselines import (DIRECTION_ORDER, GlcmConfig, glcm_feature_vector,
                                       glcm_features, glcm_matrix, lbp_histogram)


def brute_force_lbp_codes(pixels):
    """Per-pixel recomputation with explicit loops and the clockwise bit order."""
    offsets = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]
    h, w = pixels.shape
    codes = []
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            code = 0
            for bit, (dy, dx) in enumerate(offsets):
                if pixels[y + dy, x + dx] >= pixels[y, x]:
                    code |= 1 << (7 - bit)
            codes.append(code)
    return codes


class TestLbp:
    def test_constant_image_all_255(self):
        img = GrayImage(pixels=np.full((6, 6), 0.4))
        fv = lbp_histogram(img)
        assert fv.values[255] == pytest.approx(1.0)
        assert fv.values.sum() == pytest.approx(1.0)

    def test_alternating_neighbours_code_170(self):
        ring = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]  # clockwise from top-left
        p = np.array([[ring[0], ring[1], ring[2]],
                      [ring[7], 0.5, ring[3]],
                      [ring[6], ring[5], ring[4]]])
        fv = lbp_histogram(GrayImage(pixels=p))
        assert fv.values[170] == pytest.approx(1.0)

    def test_step_edge_matches_brute_force(self):
        pixels = np.zeros((10, 12))
        pixels[:, 6:] = 0.9
        fv = lbp_histogram(GrayImage(pixels=pixels))
        expected = np.bincount(brute_force_lbp_codes(pixels), minlength=256)
        np.testing.assert_allclose(fv.values, expected / expected.sum(), atol=1e-12)

    def test_random_image_matches_brute_force(self):
        pixels = np.random.default_rng(0).random((9, 9))
        fv = lbp_histogram(GrayImage(pixels=pixels))
        expected = np.bincount(brute_force_lbp_codes(pixels), minlength=256)
        np.testing.assert_allclose(fv.values, expected / expected.sum(), atol=1e-12)

    def test_monotone_remap_invariance(self):
        pixels = np.random.default_rng(1).random((11, 11))
        base = lbp_histogram(GrayImage(pixels=pixels)).values
        for remap in (np.sqrt, lambda v: v ** 3, lambda v: 0.1 + 0.8 * v):
            remapped = lbp_histogram(GrayImage(pixels=remap(pixels))).values
            np.testing.assert_array_equal(base, remapped)

    def test_too_small_rejected(self):
        with pytest.raises(InvalidArgumentError):
            lbp_histogram(GrayImage(pixels=np.zeros((2, 5))))


class TestGlcmMatrix:
    def test_constant_image_single_diagonal_entry(self):
        img = GrayImage(pixels=np.full((5, 5), 0.3))
        m = glcm_matrix(img, 0, GlcmConfig(gray_levels=16))
        q = int(0.3 * 16)
        assert m[q, q] == pytest.approx(1.0)
        assert m.sum() == pytest.approx(1.0)

    def test_two_by_two_horizontal_pairs(self):
        img = GrayImage(pixels=np.array([[0.0, 1.0], [0.0, 1.0]]))
        m = glcm_matrix(img, 0, GlcmConfig(gray_levels=2))
        np.testing.assert_allclose(m, [[0.0, 0.5], [0.5, 0.0]])

    def test_symmetrization_equals_reversed_offset(self):
        pixels = np.random.default_rng(2).random((8, 8))
        img = GrayImage(pixels=pixels)
        cfg = GlcmConfig(gray_levels=4)
        m0 = glcm_matrix(img, 0, cfg)
        # 180-degree direction: flip the image so the (0,+1) offset walks backwards
        flipped = GrayImage(pixels=pixels[:, ::-1].copy())
        m180 = glcm_matrix(flipped, 0, cfg)
        np.testing.assert_allclose(m0, m180, atol=1e-12)
        np.testing.assert_allclose(m0, m0.T, atol=1e-12)

    def test_image_too_small_for_offset(self):
        with pytest.raises(InvalidArgumentError):
            glcm_matrix(GrayImage(pixels=np.zeros((1, 3))), 90, GlcmConfig())


class TestGlcmFeatures:
    def test_diagonal_concentrated(self):
        m = np.zeros((4, 4))
        m[2, 2] = 1.0
        energy, entropy, idm, dissim, contrast, variance = glcm_features(m)
        assert energy == pytest.approx(1.0)
        assert entropy == pytest.approx(0.0)
        assert idm == pytest.approx(1.0)
        assert dissim == pytest.approx(0.0)
        assert contrast == pytest.approx(0.0)
        assert variance == pytest.approx(0.0)

    def test_two_by_two_example_values(self):
        m = np.array([[0.0, 0.5], [0.5, 0.0]])
        energy, entropy, idm, dissim, contrast, variance = glcm_features(m)
        assert energy == pytest.approx(0.5)
        assert entropy == pytest.approx(math.log(2.0))
        # direct evaluation of sum p/(1+(i-j)^2): 0.5/2 + 0.5/2
        assert idm == pytest.approx(0.5)
        assert dissim == pytest.approx(1.0)
        assert contrast == pytest.approx(1.0)
        assert variance == pytest.approx(0.25)

    def test_uniform_matrix_entropy(self):
        for levels in (2, 4, 8):
            m = np.full((levels, levels), 1.0 / levels ** 2)
            assert glcm_features(m)[1] == pytest.approx(2.0 * math.log(levels))

    def test_contrast_zero_iff_diagonal(self):
        diag = np.diag([0.25, 0.25, 0.5])
        assert glcm_features(diag)[4] == 0.0
        off = np.array([[0.5, 0.25], [0.25, 0.0]])
        assert glcm_features(off)[4] > 0.0

    def test_unnormalized_rejected(self):
        with pytest.raises(InvalidArgumentError):
            glcm_features(np.ones((3, 3)))


class TestGlcmFeatureVector:
    def test_constant_image_repeats_pattern(self):
        img = GrayImage(pixels=np.full((6, 6), 0.7))
        fv = glcm_feature_vector(img)
        assert fv.length == 24
        block = fv.values[:6]
        for d in range(1, 4):
            np.testing.assert_allclose(fv.values[6 * d:6 * (d + 1)], block)

    def test_rotation_swaps_direction_blocks(self):
        pixels = np.random.default_rng(3).random((8, 8))
        cfg = GlcmConfig(gray_levels=4)
        base = glcm_feature_vector(GrayImage(pixels=pixels), cfg).values
        rot = glcm_feature_vector(
            GrayImage(pixels=np.ascontiguousarray(np.rot90(pixels))), cfg).values
        blocks = {d: base[6 * i:6 * (i + 1)] for i, d in enumerate(DIRECTION_ORDER)}
        rot_blocks = {d: rot[6 * i:6 * (i + 1)] for i, d in enumerate(DIRECTION_ORDER)}
        np.testing.assert_allclose(rot_blocks[90], blocks[0], atol=1e-12)
        np.testing.assert_allclose(rot_blocks[0], blocks[90], atol=1e-12)
        np.testing.assert_allclose(rot_blocks[45], blocks[135], atol=1e-12)
        np.testing.assert_allclose(rot_blocks[135], blocks[45], atol=1e-12)

    def test_config_validation(self):
        with pytest.raises(InvalidArgumentError):
            GlcmConfig(gray_levels=1)
        with pytest.raises(InvalidArgumentError):
            GlcmConfig(distance=0)
