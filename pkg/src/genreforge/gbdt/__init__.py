from .boosting import (
    BoostedClassifier,
    GbmRegressor,
    classifier_from_dict,
    classifier_to_dict,
    fit_boosted,
    fit_gbm_regression,
    load_classifier,
    neg_gradient,
    predict_proba_gbdt,
    save_classifier,
    tabularize_batch,
    tabularize_mfcc,
)
from .trees import BinnedMatrix, GbdtConfig, RegressionTree, bin_matrix, fit_regression_tree

__all__ = [
    "BinnedMatrix",
    "BoostedClassifier",
    "GbdtConfig",
    "GbmRegressor",
    "RegressionTree",
    "bin_matrix",
    "classifier_from_dict",
    "classifier_to_dict",
    "fit_boosted",
    "fit_gbm_regression",
    "fit_regression_tree",
    "load_classifier",
    "neg_gradient",
    "predict_proba_gbdt",
    "save_classifier",
    "tabularize_batch",
    "tabularize_mfcc",
]
