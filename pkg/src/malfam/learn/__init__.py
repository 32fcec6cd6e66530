"""Classifiers, hyper-parameter search, and evaluation metrics."""

from .model import TrainedModel, predict, predict_many, predict_scores
from .mnb import train_mnb
from .svm import train_linear_svm
from .bagging import train_bagging, fit_tree
from .grid import grid_search, stratified_folds
from .metrics import Metrics, evaluate, confusion_matrix, metrics_from_confusion
from .model_io import save_model, load_model

__all__ = [
    "TrainedModel", "predict", "predict_many", "predict_scores",
    "train_mnb", "train_linear_svm", "train_bagging", "fit_tree",
    "grid_search", "stratified_folds",
    "Metrics", "evaluate", "confusion_matrix", "metrics_from_confusion",
    "save_model", "load_model",
]
