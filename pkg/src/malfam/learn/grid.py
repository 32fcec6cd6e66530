"""Exhaustive hyper-parameter search with stratified k-fold cross-validation."""

import itertools

import numpy as np

from ..errors import FoldTooSmallError, InvalidParamsError
from .model import predict_many


def stratified_folds(y, k, seed):
    """Assign every row to one of k folds, class-balanced and seeded.

    Rows of each class are shuffled and dealt round-robin, so every fold
    holds either floor or ceil of count/k members of each class.  Raises
    when any class is smaller than k, since some fold would miss it.
    """
    if k < 2:
        raise InvalidParamsError(f"need k >= 2 folds, got {k}")
    y = list(y)
    rng = np.random.default_rng(seed)
    assignment = np.zeros(len(y), dtype=np.int64)
    by_class = {}
    for i, label in enumerate(y):
        by_class.setdefault(label, []).append(i)
    for label in sorted(by_class):
        rows = np.asarray(by_class[label])
        if len(rows) < k:
            raise FoldTooSmallError(
                f"class {label!r} has {len(rows)} rows, fewer than {k} folds")
        rng.shuffle(rows)
        for j, row in enumerate(rows):
            assignment[row] = j % k
    return [np.nonzero(assignment == fold)[0] for fold in range(k)]


def grid_search(trainer, X, y, grid, folds=3, seed=0):
    """Evaluate the full Cartesian product of ``grid`` by cross-validation.

    ``trainer`` is called as trainer(X, y, **params) for every parameter
    combination and fold.  Best is the highest mean fold accuracy; ties keep
    the combination listed first in grid order.

    Returns (best_params, results) where results preserves grid order as a
    list of {params, fold_accuracies, mean_accuracy} entries.
    """
    if not grid:
        raise InvalidParamsError("grid must name at least one parameter")
    y = np.asarray(list(y), dtype=object)
    fold_rows = stratified_folds(y, folds, seed)
    all_rows = np.arange(len(y))

    names = list(grid)
    results = []
    for values in itertools.product(*(grid[name] for name in names)):
        params = dict(zip(names, values))
        accs = []
        for held_out in fold_rows:
            train_rows = np.setdiff1d(all_rows, held_out)
            model = trainer(X[train_rows], y[train_rows], **params)
            pred = predict_many(model, X[held_out])
            accs.append(float(np.mean([p == t for p, t in zip(pred, y[held_out])])))
        results.append({"params": params, "fold_accuracies": accs,
                        "mean_accuracy": float(np.mean(accs))})

    best = max(results, key=lambda r: r["mean_accuracy"])  # stable: first wins ties
    return dict(best["params"]), results
