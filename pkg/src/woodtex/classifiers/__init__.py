"""Classifier families sharing a uniform train/predict contract.

All three families consume (n, dim) float feature matrices with dense
integer labels 0..C-1 and predict single class ids, so the experiment
harness can grid over them interchangeably.
"""

from .common import LabeledSet, Standardizer
from .knn import KnnModel, knn_predict, knn_predict_batch, knn_train
from .mlp import MlpModel, MlpTrainConfig, mlp_gradients, mlp_predict, mlp_predict_batch, mlp_train
from .svm import KernelSpec, SvmBinary, SvmModel, svm_predict, svm_predict_batch, svm_train

__all__ = [
    "LabeledSet", "Standardizer",
    "KnnModel", "knn_train", "knn_predict", "knn_predict_batch",
    "KernelSpec", "SvmBinary", "SvmModel", "svm_train", "svm_predict", "svm_predict_batch",
    "MlpModel", "MlpTrainConfig", "mlp_train", "mlp_predict", "mlp_predict_batch",
    "mlp_gradients",
]
