"""Glue between data, training, and evaluation.

``prepare`` owns the leakage rules: the split happens first, then every
normalization parameter (per-feature z-score, survival-time scale) is fitted
on the training rows alone and applied to the other splits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import cluster_risk, fuse, kmeans_fit
from .clustmetrics import (
    UNKNOWN,
    ari,
    label_accuracy_matched,
    label_accuracy_raw,
    nmi,
    purity,
    silhouette,
)
from .dataio import Cohort, SplitSpec, ZScoreParams, normalize_times, split, zscore_apply, zscore_fit
from .encoder import EncoderParams, encode
from .losses import BatchSurvival
from .survmetrics import c_index, km_fit, logrank_k
from .trainer import TrainingData

__all__ = [
    "PreparedSplit",
    "PreparedData",
    "EvalReport",
    "prepare",
    "prepare_with",
    "training_data",
    "embed_fused",
    "evaluate_embeddings",
    "km_curve_rows",
]


@dataclass
class PreparedSplit:
    patient_ids: list[str]
    views: dict[str, np.ndarray]  # z-scored with train-fitted parameters
    t_raw: np.ndarray
    t_norm: np.ndarray
    e: np.ndarray
    subtype: np.ndarray


@dataclass
class PreparedData:
    train: PreparedSplit
    val: PreparedSplit
    test: PreparedSplit
    zscore: dict[str, ZScoreParams]
    time_scale: float

    def split(self, name: str) -> PreparedSplit:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def _assemble(splits, zparams, time_scale) -> PreparedData:
    def finish(c: Cohort) -> PreparedSplit:
        return PreparedSplit(
            patient_ids=c.patient_ids,
            views={name: zscore_apply(zparams[name], c.views[name]) for name in c.views},
            t_raw=c.t,
            t_norm=c.t / time_scale,
            e=c.e,
            subtype=c.subtype,
        )

    train_c, val_c, test_c = splits
    return PreparedData(
        train=finish(train_c),
        val=finish(val_c),
        test=finish(test_c),
        zscore=zparams,
        time_scale=time_scale,
    )


def prepare(cohort: Cohort, spec: SplitSpec) -> PreparedData:
    """Split, then normalize features and times with train-only statistics."""
    splits = split(cohort, spec)
    zparams = {name: zscore_fit(splits[0].views[name]) for name in cohort.views}
    _, time_scale = normalize_times(splits[0].t)
    return _assemble(splits, zparams, time_scale)


def prepare_with(
    cohort: Cohort,
    spec: SplitSpec,
    zparams: dict[str, ZScoreParams],
    time_scale: float,
) -> PreparedData:
    """Split, but normalize with previously fitted parameters (e.g. the ones
    stored in a checkpoint, which are authoritative for its encoders)."""
    return _assemble(split(cohort, spec), zparams, time_scale)


def training_data(prepared: PreparedData) -> TrainingData:
    return TrainingData(
        train_views=prepared.train.views,
        train_surv=BatchSurvival(prepared.train.t_norm, prepared.train.e),
        val_views=prepared.val.views,
        val_t=prepared.val.t_raw,
        val_e=prepared.val.e,
    )


def embed_fused(
    encoders: dict[str, EncoderParams],
    views: dict[str, np.ndarray],
    fusion: str = "concat",
) -> np.ndarray:
    """Eval-mode embeddings for each modality, fused per strategy."""
    embeds = [encode(encoders[name], views[name]) for name in encoders]
    return fuse(embeds, fusion)


@dataclass
class EvalReport:
    """Every survival and clustering metric for one configuration."""

    k: int
    n: int
    c_index: float
    logrank_statistic: float | None
    logrank_df: int | None
    logrank_p: float | None
    silhouette: float | None
    purity: float | None
    ari: float | None
    nmi: float | None
    accuracy_raw: float | None
    accuracy_matched: float | None
    cluster_sizes: list[int]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "c_index": self.c_index,
            "logrank_statistic": self.logrank_statistic,
            "logrank_df": self.logrank_df,
            "logrank_p": self.logrank_p,
            "silhouette": self.silhouette,
            "purity": self.purity,
            "ari": self.ari,
            "nmi": self.nmi,
            "accuracy_raw": self.accuracy_raw,
            "accuracy_matched": self.accuracy_matched,
            "cluster_sizes": self.cluster_sizes,
        }


def evaluate_embeddings(
    fused: np.ndarray,
    t: np.ndarray,
    e: np.ndarray,
    subtype: np.ndarray,
    k: int,
    rng: np.random.Generator,
    n_init: int = 10,
    max_iter: int = 300,
):
    """Cluster fused embeddings and score survival separation plus label
    agreement. Label metrics are None when every subtype is Unknown.

    Returns (report, labels, risk).
    """
    km = kmeans_fit(fused, k, rng, n_init=n_init, max_iter=max_iter)
    labels = km.labels
    surv = BatchSurvival(t, e)
    _, risk = cluster_risk(labels, surv, k=k)
    c = c_index(risk, t, e)

    distinct = np.unique(labels)
    if distinct.size >= 2:
        lr = logrank_k(t, e, labels)
        lr_stat, lr_df, lr_p = lr.statistic, lr.df, lr.p_value
        sil = silhouette(fused, labels)
    else:
        lr_stat = lr_df = lr_p = sil = None

    known = subtype.astype(str) != UNKNOWN
    if known.any():
        pred_k = labels[known]
        truth_k = subtype[known].astype(str)
        label_metrics = {
            "purity": purity(pred_k, truth_k),
            "ari": ari(pred_k, truth_k),
            "nmi": nmi(pred_k, truth_k),
            "accuracy_raw": label_accuracy_raw(pred_k, truth_k),
            "accuracy_matched": label_accuracy_matched(pred_k, truth_k),
        }
    else:
        label_metrics = {
            "purity": None,
            "ari": None,
            "nmi": None,
            "accuracy_raw": None,
            "accuracy_matched": None,
        }

    report = EvalReport(
        k=k,
        n=int(fused.shape[0]),
        c_index=c,
        logrank_statistic=lr_stat,
        logrank_df=lr_df,
        logrank_p=lr_p,
        silhouette=sil,
        cluster_sizes=[int(np.sum(labels == j)) for j in range(k)],
        **label_metrics,
    )
    return report, labels, risk


def km_curve_rows(t, e, labels) -> list[dict]:
    """Per-cluster Kaplan-Meier curves flattened to rows for CSV export."""
    rows = []
    for lab in np.unique(labels):
        mask = labels == lab
        curve = km_fit(t[mask], e[mask])
        for time, s, n_at_risk, d in zip(
            curve.times, curve.survival, curve.at_risk, curve.events
        ):
            rows.append(
                {
                    "group": int(lab),
                    "time": float(time),
                    "survival": float(s),
                    "at_risk": int(n_at_risk),
                    "events": int(d),
                }
            )
    return rows
