"""Evaluation metrics over the multiclass confusion matrix.

Per-class true/false positives and negatives come from the one-vs-rest view
of the confusion matrix.  Precision, recall, and F1 are support-weighted
averages, under which weighted recall collapses to plain accuracy:
sum_c (n_c/N) * (TP_c/n_c) = sum_c TP_c / N.
"""

import time
from dataclasses import dataclass

import numpy as np

from .model import predict_many


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    time_s: float
    confusion: np.ndarray           # rows: true class, cols: predicted
    class_ids: list

    def per_class(self):
        """One-vs-rest counts and scores per class."""
        total = self.confusion.sum()
        out = {}
        for j, cls in enumerate(self.class_ids):
            tp = self.confusion[j, j]
            fn = self.confusion[j].sum() - tp
            fp = self.confusion[:, j].sum() - tp
            tn = total - tp - fn - fp
            p = tp / (tp + fp) if tp + fp > 0 else 0.0
            r = tp / (tp + fn) if tp + fn > 0 else 0.0
            f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
            out[cls] = {"tp": int(tp), "fp": int(fp), "fn": int(fn), "tn": int(tn),
                        "precision": p, "recall": r, "f1": f1,
                        "support": int(tp + fn)}
        return out

    def to_json(self):
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1, "time_s": self.time_s,
                "class_ids": list(self.class_ids),
                "confusion": self.confusion.astype(int).tolist()}

    @classmethod
    def from_json(cls, doc):
        return cls(doc["accuracy"], doc["precision"], doc["recall"], doc["f1"],
                   doc["time_s"], np.asarray(doc["confusion"], dtype=np.int64),
                   list(doc["class_ids"]))


def confusion_matrix(y_true, y_pred, class_ids):
    index = {c: j for j, c in enumerate(class_ids)}
    conf = np.zeros((len(class_ids), len(class_ids)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        conf[index[t], index[p]] += 1
    return conf


def metrics_from_confusion(confusion, class_ids=None, time_s=0.0):
    """Support-weighted metrics for an arbitrary confusion matrix."""
    confusion = np.asarray(confusion)
    if class_ids is None:
        class_ids = list(range(confusion.shape[0]))
    total = confusion.sum()
    accuracy = float(np.trace(confusion) / total) if total > 0 else 0.0

    weighted_p = weighted_r = weighted_f1 = 0.0
    for j in range(confusion.shape[0]):
        support = confusion[j].sum()
        if support == 0:
            continue
        tp = confusion[j, j]
        fp = confusion[:, j].sum() - tp
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / support
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        weighted_p += support * p
        weighted_r += support * r
        weighted_f1 += support * f1
    if total > 0:
        weighted_p /= total
        weighted_r /= total
        weighted_f1 /= total

    return Metrics(accuracy, float(weighted_p), float(weighted_r),
                   float(weighted_f1), time_s, confusion, list(class_ids))


def evaluate(model, X_test, y_test):
    """Metrics of ``model`` on held-out data; time_s is prediction wall clock."""
    y_test = list(y_test)
    if not y_test:
        raise ValueError("test set is empty")
    start = time.perf_counter()
    y_pred = predict_many(model, X_test)
    elapsed = time.perf_counter() - start
    class_ids = sorted(set(model.class_ids) | set(y_test))
    conf = confusion_matrix(y_test, y_pred, class_ids)
    return metrics_from_confusion(conf, class_ids, time_s=elapsed)
