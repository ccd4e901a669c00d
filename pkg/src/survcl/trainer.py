"""Joint training loop.

Adam with decoupled weight decay, a triangular cyclical learning rate, and
early stopping on the validation concordance index. The validation score is
produced by the same cluster-risk pipeline used at evaluation time: embed,
fuse, k-means, per-cluster Kaplan-Meier risk, concordance.

Training is a pure function of (data, config, seed): every random choice
draws from a stream labeled off the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import NonFiniteError, Tape, value_of
from .cluster import cluster_risk, fuse, kmeans_fit
from .encoder import EncoderConfig, EncoderParams, encode, forward, init_encoder, lift_params
from .losses import BatchSurvival, LossConfig, mean_fuse, ntxent_multimodal, survival_contrastive
from .rng import derive_rng
from .survmetrics import c_index

__all__ = [
    "TrainConfig",
    "AdamState",
    "TrainingData",
    "TrainReport",
    "TrainResult",
    "NumericalAbort",
    "adam_step",
    "cyclical_lr",
    "train",
]


class NumericalAbort(ArithmeticError):
    """Training produced a non-finite loss; names the offending term."""


@dataclass
class TrainConfig:
    max_epochs: int = 1000
    patience: int = 20
    batch_size: int = 64
    lr_min: float = 1e-5
    lr_max: float = 1e-3
    cycle_epochs: int = 20
    weight_decay: float = 1e-6
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    k_for_validation: int = 4
    kmeans_n_init: int = 10
    fusion: str = "concat"

    def __post_init__(self):
        if self.lr_min >= self.lr_max:
            raise ValueError("lr_min must be below lr_max")
        if self.patience >= self.max_epochs:
            raise ValueError("patience must be below max_epochs")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update, in place. Weight decay is decoupled and applied
    before the Adam delta."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        if weight_decay:
            p -= lr * weight_decay * p
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def cyclical_lr(epoch: int, cfg: TrainConfig) -> float:
    """Triangular wave between lr_min and lr_max with period cycle_epochs."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    half = cfg.cycle_epochs / 2.0
    phase = epoch % cfg.cycle_epochs
    frac = phase / half if phase <= half else (cfg.cycle_epochs - phase) / half
    return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * frac


@dataclass
class TrainingData:
    """Normalized inputs for one run: z-scored views, loss-scale times for
    training, raw times for the validation concordance."""

    train_views: dict[str, np.ndarray]
    train_surv: BatchSurvival
    val_views: dict[str, np.ndarray]
    val_t: np.ndarray
    val_e: np.ndarray


@dataclass
class TrainReport:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_val_c_index: float = float("-inf")
    stopped_early: bool = False


@dataclass
class TrainResult:
    report: TrainReport
    encoders: dict[str, EncoderParams]


def _named_term(label: str, epoch: int, fn):
    try:
        return fn()
    except NonFiniteError as err:
        raise NumericalAbort(
            f"non-finite {label} at epoch {epoch} (op '{err.op}')"
        ) from err


def _validation_c_index(encoders, data: TrainingData, cfg: TrainConfig, epoch: int) -> float:
    embeds = [encode(encoders[name], data.val_views[name]) for name in encoders]
    fused = fuse(embeds, cfg.fusion)
    km = kmeans_fit(
        fused,
        cfg.k_for_validation,
        derive_rng(cfg.seed, f"valkm:{epoch}"),
        n_init=cfg.kmeans_n_init,
    )
    _, risk = cluster_risk(km.labels, BatchSurvival(data.val_t, data.val_e), k=km.k)
    return c_index(risk, data.val_t, data.val_e)


def train(
    data: TrainingData,
    encoder_cfgs: dict[str, EncoderConfig],
    loss_cfg: LossConfig,
    cfg: TrainConfig,
) -> TrainResult:
    """Fit one encoder per modality against the joint objective.

    Stops once the validation concordance has not improved for ``patience``
    epochs and returns the parameters from the best epoch.
    """
    names = list(data.train_views)
    if set(names) != set(encoder_cfgs):
        raise ValueError("encoder configs must match the data modalities")
    n_train = len(data.train_surv)

    encoders = {
        name: init_encoder(encoder_cfgs[name], derive_rng(cfg.seed, f"init:{name}"))
        for name in names
    }
    flat_params: dict[str, np.ndarray] = {}
    for name, enc in encoders.items():
        for pname, arr in enc.trainable().items():
            flat_params[f"{name}/{pname}"] = arr
    adam = AdamState.for_params(flat_params)
    shuffle_rng = derive_rng(cfg.seed, "shuffle")

    report = TrainReport()
    best_snapshot = None
    since_best = 0

    for epoch in range(cfg.max_epochs):
        lr = cyclical_lr(epoch, cfg)
        perm = shuffle_rng.permutation(n_train)
        batch_totals, batch_nt, batch_sc = [], [], []
        for start in range(0, n_train, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            if idx.size < 2:
                continue  # cross-view loss is undefined on a single patient
            tape = Tape()
            lifted = {name: lift_params(tape, encoders[name]) for name in names}
            embeds = [
                forward(encoders[name], data.train_views[name][idx], "train", lifted[name])
                for name in names
            ]
            surv = BatchSurvival(data.train_surv.t[idx], data.train_surv.e[idx])
            nt = _named_term(
                "cross-view loss",
                epoch,
                lambda: ntxent_multimodal(
                    embeds, loss_cfg.tau, loss_cfg.include_positive_in_denominator
                ),
            )
            if loss_cfg.surv_target == "fused":
                sc = _named_term(
                    "survival loss",
                    epoch,
                    lambda: survival_contrastive(mean_fuse(embeds), surv, loss_cfg),
                )
            else:
                sc = _named_term(
                    "survival loss",
                    epoch,
                    lambda: sum(
                        survival_contrastive(z, surv, loss_cfg) for z in embeds
                    )
                    / len(embeds),
                )
            total = nt + loss_cfg.alpha * sc
            wrt = [lifted[name][pname] for name in names for pname in lifted[name]]
            grads = tape.grad(total, wrt)
            grad_map = {}
            i = 0
            for name in names:
                for pname in lifted[name]:
                    grad_map[f"{name}/{pname}"] = grads[i]
                    i += 1
            adam_step(
                flat_params,
                grad_map,
                adam,
                lr,
                weight_decay=cfg.weight_decay,
                beta1=cfg.adam_beta1,
                beta2=cfg.adam_beta2,
                eps=cfg.adam_eps,
            )
            batch_totals.append(float(value_of(total)))
            batch_nt.append(float(value_of(nt)))
            batch_sc.append(float(value_of(sc)))

        val_c = _validation_c_index(encoders, data, cfg, epoch)
        report.epochs.append(
            {
                "epoch": epoch,
                "lr": lr,
                "train_loss": float(np.mean(batch_totals)),
                "ntxent": float(np.mean(batch_nt)),
                "surv": float(np.mean(batch_sc)),
                "val_c_index": val_c,
            }
        )
        if val_c > report.best_val_c_index:
            report.best_val_c_index = val_c
            report.best_epoch = epoch
            best_snapshot = {name: enc.copy() for name, enc in encoders.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                report.stopped_early = True
                break

    return TrainResult(report=report, encoders=best_snapshot)
