"""Survival-aware contrastive learning for multi-omics cohorts.

A small numpy library that embeds per-patient omics views with MLP encoders
trained on two objectives (cross-view alignment and a survival-aware
pull/push loss), clusters the fused embeddings, and evaluates the result
with a full survival and clustering metric suite. Ships with its own
reverse-mode autodiff tape, a synthetic cohort generator for end-to-end
verification, and a CLI (``survcl``) covering the whole pipeline.
"""

from .autodiff import NonFiniteError, Tape, Tensor, l2_normalize_rows, matmul
from .cluster import ClusterRiskMap, KMeansModel, assign, cluster_risk, fuse, kmeans_fit
from .clustmetrics import (
    ari,
    label_accuracy_matched,
    label_accuracy_raw,
    nmi,
    purity,
    silhouette,
)
from .coxph import CoxModel, cox_fit, cox_risk, partial_loglik, partial_loglik_grad
from .dataio import (
    Cohort,
    SplitSpec,
    SyntheticSpec,
    generate_synthetic,
    load_cohort,
    normalize_times,
    save_cohort,
    split,
    zscore_apply,
    zscore_fit,
)
from .encoder import EncoderConfig, EncoderParams, encode, forward, init_encoder
from .losses import (
    BatchSurvival,
    LossConfig,
    mean_fuse,
    ntxent_multimodal,
    ntxent_pair,
    survival_contrastive,
    total_loss,
)
from .pipeline import (
    EvalReport,
    embed_fused,
    evaluate_embeddings,
    prepare,
    prepare_with,
    training_data,
)
from .rng import derive_rng, master_rng
from .special import chi2_sf
from .survmetrics import KMCurve, LogRankResult, c_index, km_fit, logrank_k
from .trainer import (
    AdamState,
    NumericalAbort,
    TrainConfig,
    TrainingData,
    TrainReport,
    TrainResult,
    adam_step,
    cyclical_lr,
    train,
)

__version__ = "0.1.0"
