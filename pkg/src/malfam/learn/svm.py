"""One-vs-rest linear SVM trained by dual coordinate descent.

Each binary subproblem minimizes 0.5*||w||^2 + C * sum_i max(0, 1 - y_i w.x_i)
through its dual: box-constrained coordinate descent over alpha_i in [0, C]
(Hsieh et al., ICML 2008).  The bias term is an extra always-one feature, so
it is regularized like any other weight.  Epoch order is a seeded
permutation, which makes the fit deterministic given (seed, data order).
"""

import time

import numpy as np
import scipy.sparse as sp

from ..errors import DegenerateLabelsError, InvalidParamsError
from .model import LINEAR_SVM, TrainedModel


def _dcd_binary(data, indices, indptr, qii, y, C, tol, max_iter, rng, n_features):
    """Solve one binary subproblem; returns (weights, bias, converged)."""
    n = len(y)
    w = np.zeros(n_features)
    bias = 0.0
    alpha = np.zeros(n)
    for _ in range(max_iter):
        max_violation = 0.0
        for i in rng.permutation(n):
            lo, hi = indptr[i], indptr[i + 1]
            idx = indices[lo:hi]
            val = data[lo:hi]
            grad = y[i] * (w[idx] @ val + bias) - 1.0
            a = alpha[i]
            if a == 0.0:
                pg = min(grad, 0.0)
            elif a == C:
                pg = max(grad, 0.0)
            else:
                pg = grad
            if pg == 0.0:
                continue
            max_violation = max(max_violation, abs(pg))
            a_new = min(max(a - grad / qii[i], 0.0), C)
            if a_new != a:
                step = (a_new - a) * y[i]
                w[idx] += step * val
                bias += step
                alpha[i] = a_new
        if max_violation < tol:
            return w, bias, True
    return w, bias, False


def train_linear_svm(X, y, C=1.0, tol=1e-4, max_iter=1000, seed=0):
    """Fit one L2-regularized hinge-loss classifier per class.

    Returns the model flagged ``converged=False`` when any subproblem hits
    ``max_iter`` epochs before reaching ``tol``.
    """
    if C <= 0:
        raise InvalidParamsError(f"C must be > 0, got {C}")
    class_ids = sorted(set(y))
    if len(class_ids) < 2:
        raise DegenerateLabelsError(f"need >= 2 classes, got {class_ids}")
    start = time.perf_counter()

    X = sp.csr_matrix(X, dtype=np.float64)
    n, v = X.shape
    # Row norms include the implicit bias feature (constant 1).
    qii = np.asarray(X.multiply(X).sum(axis=1)).ravel() + 1.0
    y = np.asarray(y, dtype=object)

    seeds = np.random.SeedSequence(seed).spawn(len(class_ids))
    weights = np.zeros((len(class_ids), v))
    biases = np.zeros(len(class_ids))
    converged = True
    for j, cls in enumerate(class_ids):
        y_bin = np.where(y == cls, 1.0, -1.0)
        rng = np.random.default_rng(seeds[j])
        w, b, ok = _dcd_binary(X.data, X.indices, X.indptr, qii, y_bin,
                               C, tol, max_iter, rng, v)
        weights[j] = w
        biases[j] = b
        converged = converged and ok

    return TrainedModel(
        kind=LINEAR_SVM,
        hyper_params={"C": C, "tol": tol, "max_iter": max_iter, "seed": seed},
        class_ids=class_ids,
        params={"n_features": v, "weights": weights, "bias": biases},
        converged=converged,
        train_time_s=time.perf_counter() - start,
    )
