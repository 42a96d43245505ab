"""Dimensionality reduction, classifiers, regressors and fusion."""

from skillseries.models.fusion import FusionModel, fit_fusion, fused_predict
from skillseries.models.knn import KnnModel, knn_classify, knn_fit
from skillseries.models.pca import PcaModel, pca_fit, pca_reconstruct, pca_transform
from skillseries.models.pipeline import TrainedPipeline, load_pipeline, save_pipeline
from skillseries.models.svr import LinearSvrModel, svr_fit, svr_predict

__all__ = [
    "FusionModel",
    "KnnModel",
    "LinearSvrModel",
    "PcaModel",
    "TrainedPipeline",
    "fit_fusion",
    "fused_predict",
    "knn_classify",
    "knn_fit",
    "load_pipeline",
    "pca_fit",
    "pca_reconstruct",
    "pca_transform",
    "save_pipeline",
    "svr_fit",
    "svr_predict",
]
