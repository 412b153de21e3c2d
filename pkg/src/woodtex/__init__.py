"""woodtex: texture classification via SIFT keypoint histograms,
with LBP and GLCM baselines and an experiment harness."""

__version__ = "0.1.0"
