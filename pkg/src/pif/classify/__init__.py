"""Binary reader-state classification and its evaluation harness."""

from .loso import (
    FeatureWeightReport,
    LosoResult,
    SubjectResult,
    loso_cv,
    normalize_weights,
    render_weight_figure,
)
from .model_io import load_model, save_model
from .pipeline import (
    Dataset,
    PipelineError,
    PipelineModel,
    Prediction,
    fit,
    impute_subject_medians,
    lda_fit,
    pca_fit,
    predict,
    predict_subject,
    rank_normalize,
    rank_normalize_matrix,
    rank_rows,
)

__all__ = [
    "Dataset",
    "FeatureWeightReport",
    "LosoResult",
    "PipelineError",
    "PipelineModel",
    "Prediction",
    "SubjectResult",
    "fit",
    "impute_subject_medians",
    "lda_fit",
    "load_model",
    "loso_cv",
    "normalize_weights",
    "pca_fit",
    "predict",
    "predict_subject",
    "rank_normalize",
    "rank_normalize_matrix",
    "rank_rows",
    "render_weight_figure",
    "save_model",
]
