"""Bootstrap-aggregated CART trees over row and column subsamples.

Each tree is grown to purity (Gini impurity, minimum two samples to split,
unlimited depth) on ceil(max_samples * N) rows drawn with replacement and
ceil(max_features * V) columns drawn without replacement.  The ensemble
predicts by majority vote; scores are vote fractions.  Per-tree randomness
comes from spawned seed sequences, so the forest is identical for a given
seed no matter how the trees are scheduled.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import DegenerateLabelsError, InvalidParamsError
from .model import BAGGING, TrainedModel


@dataclass
class Tree:
    """Flat-array binary decision tree over a fixed column subset."""

    feature_subset: np.ndarray       # global column indices, ascending
    children_left: np.ndarray        # -1 at leaves
    children_right: np.ndarray
    feature: np.ndarray              # local index into feature_subset; -1 at leaves
    threshold: np.ndarray
    leaf_class: np.ndarray           # global class index; -1 at internal nodes


class _TreeBuilder:
    def __init__(self, n_classes):
        self.n_classes = n_classes
        self.children_left = []
        self.children_right = []
        self.feature = []
        self.threshold = []
        self.leaf_class = []

    def _add_node(self):
        self.children_left.append(-1)
        self.children_right.append(-1)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.leaf_class.append(-1)
        return len(self.feature) - 1

    def build(self, X, y):
        """Grow the tree on dense X (m x k) and integer class labels y."""
        self._grow(X, y, np.arange(X.shape[0]))
        return (np.asarray(self.children_left), np.asarray(self.children_right),
                np.asarray(self.feature), np.asarray(self.threshold),
                np.asarray(self.leaf_class))

    def _grow(self, X, y, rows):
        node = self._add_node()
        labels = y[rows]
        counts = np.bincount(labels, minlength=self.n_classes)
        if len(rows) < 2 or counts.max() == len(rows):
            self.leaf_class[node] = int(np.argmax(counts))
            return node
        split = _best_split(X[rows], labels, self.n_classes)
        if split is None:
            self.leaf_class[node] = int(np.argmax(counts))
            return node
        feat, thr = split
        left = rows[X[rows, feat] <= thr]
        right = rows[X[rows, feat] > thr]
        self.feature[node] = feat
        self.threshold[node] = thr
        self.children_left[node] = self._grow(X, y, left)
        self.children_right[node] = self._grow(X, y, right)
        return node


def _best_split(X, y, n_classes):
    """Lowest weighted-Gini (feature, threshold) or None if nothing splits.

    Ties break toward the lower feature index, then the lower threshold,
    which keeps tree construction deterministic.
    """
    m, k = X.shape
    onehot = np.zeros((m, n_classes))
    onehot[np.arange(m), y] = 1.0
    best = None
    best_score = np.inf
    for j in range(k):
        order = np.argsort(X[:, j], kind="stable")
        vals = X[order, j]
        cuts = np.nonzero(vals[:-1] < vals[1:])[0]
        if len(cuts) == 0:
            continue
        cum = np.cumsum(onehot[order], axis=0)
        total = cum[-1]
        n_left = np.arange(1, m, dtype=np.float64)
        left_sq = (cum[:-1] ** 2).sum(axis=1)
        right = total - cum[:-1]
        right_sq = (right ** 2).sum(axis=1)
        # Weighted Gini up to the constant factor 1/m:
        # (n_L - sum_c L_c^2/n_L) + (n_R - sum_c R_c^2/n_R).
        score = (n_left - left_sq / n_left) + ((m - n_left) - right_sq / (m - n_left))
        score = score[cuts]
        pos = int(np.argmin(score))
        if score[pos] < best_score:
            cut = cuts[pos]
            best_score = float(score[pos])
            best = (j, float((vals[cut] + vals[cut + 1]) / 2.0))
    return best


def fit_tree(X, y_idx, n_classes):
    """Single CART tree on dense data; used directly and by the ensemble."""
    builder = _TreeBuilder(n_classes)
    return builder.build(np.asarray(X, dtype=np.float64), np.asarray(y_idx))


def train_bagging(X, y, n_estimators=1000, max_features=0.1, max_samples=0.1,
                  seed=0, bootstrap=True):
    """Fit the bagged forest.

    ``bootstrap=False`` draws rows without replacement instead, which with
    ``max_samples=1.0`` makes a one-tree ensemble coincide with a single
    CART fit on the full data.
    """
    if not 0 < max_features <= 1 or not 0 < max_samples <= 1:
        raise InvalidParamsError("max_features and max_samples must be in (0, 1]")
    if n_estimators < 1:
        raise InvalidParamsError(f"n_estimators must be >= 1, got {n_estimators}")
    class_ids = sorted(set(y))
    if len(class_ids) < 2:
        raise DegenerateLabelsError(f"need >= 2 classes, got {class_ids}")
    start = time.perf_counter()

    X = sp.csr_matrix(X, dtype=np.float64)
    n, v = X.shape
    class_index = {c: j for j, c in enumerate(class_ids)}
    y_idx = np.asarray([class_index[label] for label in y])
    n_rows = math.ceil(max_samples * n)
    n_cols = math.ceil(max_features * v)

    Xcsc = X.tocsc()
    trees = []
    for seq in np.random.SeedSequence(seed).spawn(n_estimators):
        rng = np.random.default_rng(seq)
        if bootstrap:
            rows = rng.integers(0, n, size=n_rows)
        else:
            rows = np.sort(rng.permutation(n)[:n_rows])
        cols = np.sort(rng.choice(v, size=n_cols, replace=False))
        X_sub = np.asarray(Xcsc[:, cols][rows].todense(), dtype=np.float64)
        left, right, feature, threshold, leaf = fit_tree(X_sub, y_idx[rows], len(class_ids))
        trees.append(Tree(cols, left, right, feature, threshold, leaf))

    return TrainedModel(
        kind=BAGGING,
        hyper_params={"n_estimators": n_estimators, "max_features": max_features,
                      "max_samples": max_samples, "seed": seed, "bootstrap": bootstrap},
        class_ids=class_ids,
        params={"n_features": v, "n_classes": len(class_ids), "trees": trees},
        train_time_s=time.perf_counter() - start,
    )


def tree_route(tree, X_dense):
    """Leaf class index for every row of a dense matrix already column-sliced."""
    n = X_dense.shape[0]
    node = np.zeros(n, dtype=np.int64)
    while True:
        feat = tree.feature[node]
        active = feat >= 0
        if not active.any():
            break
        rows = np.nonzero(active)[0]
        at = node[rows]
        vals = X_dense[rows, feat[rows]]
        go_left = vals <= tree.threshold[at]
        node[rows] = np.where(go_left, tree.children_left[at], tree.children_right[at])
    return tree.leaf_class[node]


def forest_votes(params, X):
    """Vote-fraction score matrix (n_rows x n_classes)."""
    Xcsc = sp.csr_matrix(X).tocsc()
    n = Xcsc.shape[0]
    votes = np.zeros((n, params["n_classes"]))
    for tree in params["trees"]:
        X_dense = np.asarray(Xcsc[:, tree.feature_subset].todense(), dtype=np.float64)
        leaves = tree_route(tree, X_dense)
        votes[np.arange(n), leaves] += 1.0
    return votes / len(params["trees"])
