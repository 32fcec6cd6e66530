"""Shared model container and prediction contract.

All three classifier kinds share one envelope so that training, persistence,
and evaluation stay interchangeable.  Scores differ by kind: normalized
posteriors for naive Bayes, signed margins for the SVM, vote fractions for
bagging.  Prediction is always the argmax, with ties broken toward the lower
class index.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionMismatchError

MNB = "mnb"
LINEAR_SVM = "linear_svm_ovr"
BAGGING = "bagging_trees"


@dataclass(eq=False)
class TrainedModel:
    kind: str
    hyper_params: dict
    class_ids: list
    params: dict
    selection_mask: object = None
    converged: bool = True
    train_time_s: float = 0.0

    @property
    def n_features(self):
        return self.params["n_features"]


def _as_csr(X, n_features):
    if sp.issparse(X):
        X = X.tocsr()
    else:
        X = sp.csr_matrix(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    if X.shape[1] != n_features:
        raise DimensionMismatchError(
            f"input has {X.shape[1]} columns, model expects {n_features}")
    return X


def predict_scores(model, X):
    """Per-class score matrix (n_rows x n_classes) for a batch of inputs."""
    X = _as_csr(X, model.n_features)
    if model.kind == MNB:
        log_joint = X @ model.params["log_prob"].T + model.params["log_prior"]
        # Normalize in log space, then exponentiate: rows sum to 1.
        log_joint = np.asarray(log_joint)
        shift = log_joint - log_joint.max(axis=1, keepdims=True)
        post = np.exp(shift)
        return post / post.sum(axis=1, keepdims=True)
    if model.kind == LINEAR_SVM:
        return np.asarray(X @ model.params["weights"].T + model.params["bias"])
    if model.kind == BAGGING:
        from .bagging import forest_votes
        return forest_votes(model.params, X)
    raise ValueError(f"unknown model kind {model.kind!r}")


def predict_many(model, X):
    """Predicted class id per row."""
    scores = predict_scores(model, X)
    return [model.class_ids[i] for i in np.argmax(scores, axis=1)]


def predict(model, x):
    """(class id, per-class score list) for a single input vector."""
    scores = predict_scores(model, x)[0]
    return model.class_ids[int(np.argmax(scores))], scores.tolist()
