"""Training objectives.

Three pieces: a temperature-scaled cross-entropy loss that aligns the
different views of the same patient, a survival-aware pull/push loss on
pairwise embedding distances, and their weighted sum.

All three accept taped tensors (training) or plain arrays (inspection) and
reduce with means, so the trade-off weight ``alpha`` does not depend on the
batch size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import value_of

__all__ = [
    "LossConfig",
    "BatchSurvival",
    "ntxent_pair",
    "ntxent_multimodal",
    "survival_contrastive",
    "mean_fuse",
    "total_loss",
]


@dataclass
class LossConfig:
    tau: float = 0.1
    delta_time: float = 1.0
    delta_dist: float = 1.0
    lambda_pull: float = 1.0
    lambda_push: float = 1.0
    alpha: float = 10.0
    tanh_weighting: bool = False
    # The cross-view loss as defined here excludes the positive pair from its
    # own denominator (an aligned batch can reach negative loss values). The
    # flag switches to the more common form that keeps it in.
    include_positive_in_denominator: bool = False
    # "fused": survival loss on the re-normalized mean of the modality
    # embeddings; "per_modality_mean": mean of per-modality survival losses.
    surv_target: str = "fused"

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.delta_time <= 0 or self.delta_dist <= 0:
            raise ValueError("delta_time and delta_dist must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.surv_target not in ("fused", "per_modality_mean"):
            raise ValueError(f"unknown surv_target {self.surv_target!r}")


@dataclass
class BatchSurvival:
    """Survival times (already on the normalized scale used by the loss) and
    event indicators (1 = death observed, 0 = censored) for one batch."""

    t: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.e = np.asarray(self.e)
        if self.t.shape != self.e.shape or self.t.ndim != 1:
            raise ValueError("t and e must be 1-D and aligned")
        if np.any(self.t < 0):
            raise ValueError("survival times must be nonnegative")
        if not np.all(np.isin(self.e, (0, 1))):
            raise ValueError("event indicators must be 0 or 1")

    def __len__(self):
        return self.t.shape[0]


def ntxent_pair(zv, zw, tau: float, include_positive_in_denominator: bool = False):
    """Cross-view alignment loss between two views of the same batch.

    Rows must be l2-normalized so the dot product is the cosine similarity.
    Row i of one view is the positive for row i of the other; every j != i
    is a negative. Mean over rows.
    """
    av, bv = value_of(zv), value_of(zw)
    if av.shape != bv.shape:
        raise ValueError(f"views must share a shape, got {av.shape} vs {bv.shape}")
    n = av.shape[0]
    if n < 2:
        raise ValueError("ntxent needs a batch of at least 2 (no negatives otherwise)")
    sim = ad.matmul(zv, ad.transpose(zw)) / tau
    # constant row-max shift for a stable log-sum-exp; cancels in the gradient
    shift = value_of(sim).max(axis=1, keepdims=True)
    exps = ad.exp(sim - shift)
    if include_positive_in_denominator:
        mask = np.ones((n, n))
    else:
        mask = 1.0 - np.eye(n)
    log_denom = ad.log(ad.reduce_sum(exps * mask, axis=1, keepdims=True)) + shift
    pos = ad.reduce_sum(zv * zw, axis=1, keepdims=True) / tau
    return ad.reduce_mean(log_denom - pos)


def ntxent_multimodal(embeds, tau: float, include_positive_in_denominator: bool = False):
    """Mean of :func:`ntxent_pair` over all ordered pairs of modalities."""
    if len(embeds) < 2:
        raise ValueError("need at least two modalities for a cross-view loss")
    sizes = {value_of(z).shape[0] for z in embeds}
    if len(sizes) != 1:
        raise ValueError("modalities must share the batch size")
    total = None
    count = 0
    for v, zv in enumerate(embeds):
        for w, zw in enumerate(embeds):
            if v == w:
                continue
            term = ntxent_pair(zv, zw, tau, include_positive_in_denominator)
            total = term if total is None else total + term
            count += 1
    return total / count


def _pairwise_sq_dists(z):
    sq = ad.reduce_sum(ad.square(z), axis=1, keepdims=True)
    gram = ad.matmul(z, ad.transpose(z))
    return ad.maximum(sq + ad.transpose(sq) - 2.0 * gram, 0.0)


def survival_contrastive(z, surv: BatchSurvival, cfg: LossConfig):
    """Pull together deceased patients with close survival times, push apart
    pairs whose times differ by at least ``delta_time``.

    Pull pairs (both events, time gap < delta_time) pay the squared embedding
    distance; push pairs (time gap >= delta_time, any event status) pay a
    squared hinge on ``delta_dist`` minus the distance. Each term is averaged
    over its own qualifying pairs; an empty pair set contributes 0, so
    degenerate batches are fine.
    """
    n = len(surv)
    if value_of(z).shape[0] != n:
        raise ValueError("embeddings and survival batch are misaligned")
    if n < 2:
        return np.float64(0.0)

    t, e = surv.t, surv.e
    upper = np.triu(np.ones((n, n)), k=1)
    dt = np.abs(t[:, None] - t[None, :])
    both_events = (e[:, None] == 1) & (e[None, :] == 1)
    pull_mask = upper * both_events * (dt < cfg.delta_time)
    push_mask = upper * (dt >= cfg.delta_time)
    if cfg.tanh_weighting:
        w = np.abs(np.tanh(t[:, None] - t[None, :]))
        pull_w = pull_mask * (1.0 - w)
        push_w = push_mask * w
    else:
        pull_w, push_w = pull_mask, push_mask

    d2 = _pairwise_sq_dists(z)
    n_pull = pull_mask.sum()
    n_push = push_mask.sum()
    pull = ad.reduce_sum(d2 * pull_w) / max(n_pull, 1.0)
    # clamp before sqrt: its adjoint diverges at 0 (coincident embeddings)
    d = ad.sqrt(ad.maximum(d2, 1e-24))
    hinge = ad.maximum(cfg.delta_dist - d, 0.0)
    push = ad.reduce_sum(ad.square(hinge) * push_w) / max(n_push, 1.0)
    return cfg.lambda_pull * pull + cfg.lambda_push * push


def mean_fuse(embeds):
    """Mean of the modality embeddings, re-normalized to the unit sphere.

    Differentiable; this is the training-time fusion the survival loss sees.
    """
    total = embeds[0]
    for z in embeds[1:]:
        total = total + z
    return ad.l2_normalize_rows(total / len(embeds))


def total_loss(embeds, fused, surv: BatchSurvival, cfg: LossConfig):
    """Cross-view loss plus ``alpha`` times the survival loss.

    Returns ``(total, ntxent_term, survival_term)`` so callers can report the
    parts without recomputing them.
    """
    nt = ntxent_multimodal(embeds, cfg.tau, cfg.include_positive_in_denominator)
    if cfg.surv_target == "fused":
        sc = survival_contrastive(fused, surv, cfg)
    else:
        parts = [survival_contrastive(z, surv, cfg) for z in embeds]
        sc = parts[0]
        for p in parts[1:]:
            sc = sc + p
        sc = sc / len(parts)
    return nt + cfg.alpha * sc, nt, sc
