"""Clustering quality against ground-truth subtype labels and geometry.

The label-agreement metrics (purity, ARI, NMI, accuracy) compare integer
cluster assignments against arbitrary truth labels. Truth entries equal to
"Unknown" mark patients without an annotation; callers are expected to drop
those rows before scoring (purity additionally drops them itself).

Two accuracies are provided on purpose. The raw one compares cluster indices
directly against the integer encoding of the truth labels, with no matching:
it is only meaningful if the clusterer happens to number clusters the same
way the labels are encoded, and is usually ~0 even for perfect partitions.
The matched one finds the best one-to-one cluster/class assignment first.
Both are reported so the difference is visible rather than mysterious.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

UNKNOWN = "Unknown"

__all__ = [
    "silhouette",
    "purity",
    "ari",
    "nmi",
    "label_accuracy_raw",
    "label_accuracy_matched",
    "encode_labels",
]


def _pair_arrays(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("labelings must be 1-D and aligned")
    return pred, truth


def encode_labels(labels) -> np.ndarray:
    """Integer encoding by sorted unique value."""
    _, enc = np.unique(np.asarray(labels), return_inverse=True)
    return enc


def _contingency(pred, truth) -> np.ndarray:
    pi = encode_labels(pred)
    ti = encode_labels(truth)
    table = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)
    return table


def silhouette(x, labels) -> float:
    """Mean silhouette coefficient, Euclidean distances.

    For each sample: a = mean distance to its own cluster (excluding itself),
    b = smallest mean distance to another cluster, score = (b-a)/max(a,b).
    Samples in singleton clusters score 0 by convention.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least two clusters")
    dist = cdist(x, x)
    n = x.shape[0]
    scores = np.zeros(n)
    members = {lab: np.nonzero(labels == lab)[0] for lab in uniq}
    for i in range(n):
        own = members[labels[i]]
        if own.size == 1:
            continue
        a = dist[i, own].sum() / (own.size - 1)
        b = min(
            dist[i, members[lab]].mean() for lab in uniq if lab != labels[i]
        )
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def purity(pred, truth, unknown: str = UNKNOWN) -> float:
    """Fraction of samples belonging to their cluster's majority class."""
    pred, truth = _pair_arrays(pred, truth)
    keep = truth.astype(str) != unknown
    if not np.any(keep):
        raise ValueError("all truth labels are unknown; purity is undefined")
    table = _contingency(pred[keep], truth[keep])
    return float(table.max(axis=1).sum() / table.sum())


def _comb2(x):
    return x * (x - 1) / 2.0


def ari(pred, truth) -> float:
    """Adjusted Rand index from the contingency table."""
    pred, truth = _pair_arrays(pred, truth)
    if pred.size < 2:
        raise ValueError("ARI needs at least two samples")
    table = _contingency(pred, truth)
    n = table.sum()
    sum_ij = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        # both partitions trivial in the same way, hence identical
        return 1.0
    return float((sum_ij - expected) / (maximum - expected))


def nmi(pred, truth) -> float:
    """Mutual information normalized by the arithmetic mean of the entropies."""
    pred, truth = _pair_arrays(pred, truth)
    table = _contingency(pred, truth)
    n = table.sum()
    p_ij = table / n
    p_u = p_ij.sum(axis=1)
    p_v = p_ij.sum(axis=0)
    nz = p_ij > 0
    mi = np.sum(p_ij[nz] * np.log(p_ij[nz] / np.outer(p_u, p_v)[nz]))
    h_u = -np.sum(p_u[p_u > 0] * np.log(p_u[p_u > 0]))
    h_v = -np.sum(p_v[p_v > 0] * np.log(p_v[p_v > 0]))
    denom = 0.5 * (h_u + h_v)
    return 0.0 if denom == 0 else float(mi / denom)


def label_accuracy_raw(pred, truth) -> float:
    """Fraction of samples whose cluster index equals the truth label's
    integer encoding, with no cluster-to-class matching."""
    pred, truth = _pair_arrays(pred, truth)
    if pred.size == 0:
        return float("nan")
    return float(np.mean(np.asarray(pred) == encode_labels(truth)))


def label_accuracy_matched(pred, truth) -> float:
    """Accuracy after the best one-to-one cluster/class matching (Hungarian)."""
    pred, truth = _pair_arrays(pred, truth)
    if pred.size == 0:
        return float("nan")
    table = _contingency(pred, truth)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: table.shape[0], : table.shape[1]] = table
    rows, cols = linear_sum_assignment(-padded)
    return float(padded[rows, cols].sum() / table.sum())
