"""External clustering metrics: ACC (optimal matching), NMI and purity."""

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import InvalidInput


def _contingency(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise InvalidInput(f"length mismatch: {pred.shape[0]} vs {truth.shape[0]}")
    if pred.size == 0:
        raise InvalidInput("empty label vectors")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def accuracy(pred, truth):
    """Fraction of points correctly labelled under the best one-to-one
    cluster-to-class map (Hungarian algorithm on the contingency table)."""
    table = _contingency(pred, truth)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / table.sum())


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth):
    """Mutual information over sqrt(H(pred) H(truth)); 0 if either side is constant."""
    table = _contingency(pred, truth).astype(np.float64)
    n = table.sum()
    h_pred = _entropy(table.sum(axis=1))
    h_truth = _entropy(table.sum(axis=0))
    if h_pred == 0.0 or h_truth == 0.0:
        return 0.0
    pij = table / n
    outer = np.outer(pij.sum(axis=1), pij.sum(axis=0))
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    return float(np.clip(mi / np.sqrt(h_pred * h_truth), 0.0, 1.0))


def purity(pred, truth):
    table = _contingency(pred, truth)
    return float(table.max(axis=1).sum() / table.sum())


def evaluate(pred, truth):
    return {"acc": accuracy(pred, truth), "nmi": nmi(pred, truth),
            "purity": purity(pred, truth)}
