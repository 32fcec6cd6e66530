"""Multinomial naive Bayes with Laplace/Lidstone smoothing."""

import time

import numpy as np

from ..errors import DegenerateLabelsError, InvalidParamsError
from .model import MNB, TrainedModel


def train_mnb(X, y, alpha=1.0):
    """Fit class log-priors and per-class term log-probabilities.

    The smoothed estimate for term t in class c is
    (count_{c,t} + alpha) / (sum_t count_{c,t} + alpha * V), so every class
    distribution sums to one over the vocabulary and unseen terms keep a
    positive floor probability.
    """
    if alpha <= 0:
        raise InvalidParamsError(f"alpha must be > 0, got {alpha}")
    class_ids = sorted(set(y))
    if len(class_ids) < 2:
        raise DegenerateLabelsError(f"need >= 2 classes, got {class_ids}")
    start = time.perf_counter()
    n, v = X.shape
    class_index = {c: j for j, c in enumerate(class_ids)}
    Y = np.zeros((n, len(class_ids)))
    for i, label in enumerate(y):
        Y[i, class_index[label]] = 1.0

    class_counts = Y.sum(axis=0)
    log_prior = np.log(class_counts / n)
    term_counts = np.asarray((Y.T @ X), dtype=np.float64)       # C x V
    totals = term_counts.sum(axis=1, keepdims=True)
    log_prob = np.log(term_counts + alpha) - np.log(totals + alpha * v)

    return TrainedModel(
        kind=MNB,
        hyper_params={"alpha": alpha},
        class_ids=class_ids,
        params={"n_features": v, "log_prior": log_prior, "log_prob": log_prob},
        train_time_s=time.perf_counter() - start,
    )
