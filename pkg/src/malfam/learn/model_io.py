"""Versioned JSON persistence for trained models.

Floating-point parameters are stored as base-10 decimal strings with 17
significant digits, which round-trips IEEE 754 doubles exactly and keeps the
file byte-stable for a given model.
"""

import json

import numpy as np

from ..vectorize import SelectionMask
from .bagging import Tree
from .model import BAGGING, LINEAR_SVM, MNB, TrainedModel

FORMAT_VERSION = 1


def _enc(values):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        return [format(x, ".17g") for x in arr]
    return [_enc(row) for row in arr]


def _dec(values):
    return np.asarray(values, dtype=np.float64)


def _ints(values):
    return [int(x) for x in np.asarray(values)]


def _encode_parameters(model):
    p = model.params
    if model.kind == MNB:
        return {"n_features": p["n_features"],
                "log_prior": _enc(p["log_prior"]),
                "log_prob": _enc(p["log_prob"])}
    if model.kind == LINEAR_SVM:
        return {"n_features": p["n_features"],
                "weights": _enc(p["weights"]),
                "bias": _enc(p["bias"]),
                "converged": model.converged}
    if model.kind == BAGGING:
        return {"n_features": p["n_features"],
                "n_classes": p["n_classes"],
                "trees": [{
                    "feature_subset": _ints(t.feature_subset),
                    "children_left": _ints(t.children_left),
                    "children_right": _ints(t.children_right),
                    "feature": _ints(t.feature),
                    "threshold": _enc(t.threshold),
                    "leaf_class": _ints(t.leaf_class),
                } for t in p["trees"]]}
    raise ValueError(f"unknown model kind {model.kind!r}")


def _decode_parameters(kind, doc):
    if kind == MNB:
        return {"n_features": doc["n_features"],
                "log_prior": _dec(doc["log_prior"]),
                "log_prob": _dec(doc["log_prob"])}, True
    if kind == LINEAR_SVM:
        return {"n_features": doc["n_features"],
                "weights": _dec(doc["weights"]),
                "bias": _dec(doc["bias"])}, bool(doc.get("converged", True))
    if kind == BAGGING:
        trees = [Tree(
            feature_subset=np.asarray(t["feature_subset"], dtype=np.int64),
            children_left=np.asarray(t["children_left"], dtype=np.int64),
            children_right=np.asarray(t["children_right"], dtype=np.int64),
            feature=np.asarray(t["feature"], dtype=np.int64),
            threshold=_dec(t["threshold"]),
            leaf_class=np.asarray(t["leaf_class"], dtype=np.int64),
        ) for t in doc["trees"]]
        return {"n_features": doc["n_features"], "n_classes": doc["n_classes"],
                "trees": trees}, True
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path):
    envelope = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "hyper_params": model.hyper_params,
        "class_ids": list(model.class_ids),
        "selection_mask": model.selection_mask.to_json() if model.selection_mask else None,
        "parameters": _encode_parameters(model),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(envelope, fh, sort_keys=True)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        envelope = json.load(fh)
    if envelope.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {envelope.get('format_version')!r}")
    params, converged = _decode_parameters(envelope["kind"], envelope["parameters"])
    mask = envelope.get("selection_mask")
    return TrainedModel(
        kind=envelope["kind"],
        hyper_params=envelope["hyper_params"],
        class_ids=envelope["class_ids"],
        params=params,
        selection_mask=SelectionMask.from_json(mask) if mask else None,
        converged=converged,
    )
