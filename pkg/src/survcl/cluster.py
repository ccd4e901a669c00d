"""KMeans over fused patient representations, and cluster-derived risk scores.

The embeddings themselves carry no notion of risk; to score patients we
cluster them, summarize each cluster's survival with a censoring-aware
statistic (Kaplan-Meier median, falling back to the restricted mean when the
curve never reaches 0.5), and use its negative as the cluster's risk. Every
patient inherits the risk of their cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import l2_normalize_rows
from .losses import BatchSurvival
from .survmetrics import km_fit

__all__ = ["KMeansModel", "ClusterRiskMap", "fuse", "kmeans_fit", "assign", "cluster_risk"]


def fuse(embeds, strategy: str = "concat") -> np.ndarray:
    """Combine per-modality embeddings into one matrix per patient.

    "concat" stacks the embeddings side by side; "mean" averages them and
    re-normalizes each row (zero rows stay zero).
    """
    embeds = [np.asarray(z, dtype=np.float64) for z in embeds]
    rows = {z.shape[0] for z in embeds}
    if len(rows) != 1:
        raise ValueError("modalities must have the same number of rows")
    if strategy == "concat":
        return np.hstack(embeds)
    if strategy == "mean":
        return l2_normalize_rows(sum(embeds) / len(embeds))
    raise ValueError(f"unknown fusion strategy {strategy!r}")


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    inertia: float
    labels: np.ndarray
    n_iter: int


def _sq_dists_to(x, centroids):
    return (
        np.sum(x**2, axis=1)[:, None]
        + np.sum(centroids**2, axis=1)[None, :]
        - 2.0 * (x @ centroids.T)
    )


def _plusplus_init(x, k, rng):
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    closest = np.sum((x - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centroids[j:] = x[rng.integers(n, size=k - j)]
            break
        probs = closest / total
        centroids[j] = x[rng.choice(n, p=probs)]
        closest = np.minimum(closest, np.sum((x - centroids[j]) ** 2, axis=1))
    return centroids


def _lloyd(x, centroids, max_iter, tol):
    k = centroids.shape[0]
    prev_inertia = np.inf
    labels = None
    for it in range(1, max_iter + 1):
        d2 = np.maximum(_sq_dists_to(x, centroids), 0.0)
        labels = np.argmin(d2, axis=1)
        new = centroids.copy()
        for j in range(k):
            mask = labels == j
            if mask.any():
                new[j] = x[mask].mean(axis=0)
            else:
                # re-seed an empty cluster at the worst-fit point
                worst = int(np.argmax(d2[np.arange(len(labels)), labels]))
                new[j] = x[worst]
                labels[worst] = j
        inertia = float(
            np.sum(np.maximum(_sq_dists_to(x, new), 0.0).min(axis=1))
        )
        if inertia > prev_inertia * (1 + 1e-9) + 1e-12:
            raise RuntimeError(
                f"k-means inertia increased ({prev_inertia} -> {inertia})"
            )
        shift = np.sqrt(np.sum((new - centroids) ** 2, axis=1)).max()
        centroids = new
        prev_inertia = inertia
        if shift < tol:
            break
    d2 = np.maximum(_sq_dists_to(x, centroids), 0.0)
    labels = np.argmin(d2, axis=1)
    # exact-difference form: no cancellation noise in the reported inertia
    inertia = float(np.sum((x - centroids[labels]) ** 2))
    return centroids, labels, inertia, it


def kmeans_fit(
    x,
    k: int,
    rng: np.random.Generator,
    n_init: int = 10,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> KMeansModel:
    """k-means++ seeding, Lloyd iterations, best of ``n_init`` restarts."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of samples ({n})")
    best = None
    for _ in range(n_init):
        centroids = _plusplus_init(x, k, rng)
        centroids, labels, inertia, n_iter = _lloyd(x, centroids, max_iter, tol)
        if best is None or inertia < best.inertia:
            best = KMeansModel(
                k=k, centroids=centroids, inertia=inertia, labels=labels, n_iter=n_iter
            )
    return best


def assign(model: KMeansModel, x) -> np.ndarray:
    """Nearest-centroid label for each row; ties go to the lowest index."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != model.centroids.shape[1]:
        raise ValueError(
            f"dimension mismatch: points have {x.shape[1]} columns, "
            f"centroids {model.centroids.shape[1]}"
        )
    return np.argmin(_sq_dists_to(x, model.centroids), axis=1)


@dataclass
class ClusterRiskMap:
    """Risk score per cluster index plus how each score was derived
    ("km_median", "restricted_mean", or "cohort_fallback")."""

    risk: dict[int, float]
    derivation: dict[int, str]


def _km_statistic(t, e):
    curve = km_fit(t, e)
    med = curve.median()
    if med is not None:
        return med, "km_median"
    return curve.restricted_mean(float(np.max(t))), "restricted_mean"


def cluster_risk(labels, surv: BatchSurvival, k: int | None = None):
    """Risk per cluster and per patient: the negated KM survival statistic.

    Clusters with longer survival get lower risk. Clusters with no members
    (possible when assigning held-out data) fall back to the whole-cohort
    statistic.
    """
    labels = np.asarray(labels)
    if labels.shape[0] != len(surv):
        raise ValueError("labels and survival data are misaligned")
    if k is None:
        k = int(labels.max()) + 1
    cohort_stat, _ = _km_statistic(surv.t, surv.e)
    risk: dict[int, float] = {}
    derivation: dict[int, str] = {}
    for j in range(k):
        mask = labels == j
        if not mask.any():
            risk[j] = -cohort_stat
            derivation[j] = "cohort_fallback"
            continue
        stat, how = _km_statistic(surv.t[mask], surv.e[mask])
        risk[j] = -stat
        derivation[j] = how
    per_patient = np.array([risk[int(lab)] for lab in labels])
    return ClusterRiskMap(risk=risk, derivation=derivation), per_patient
