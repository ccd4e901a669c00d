"""Per-modality MLP encoder.

Architecture: linear -> batch norm -> ReLU -> linear projection -> row-wise
l2 normalization, so every embedding lands on the unit hypersphere. Each
modality gets its own parameter set; the structure is shared, the storage
never is.

The forward pass is written once against the polymorphic autodiff ops: pass
a ``Tape`` plus lifted parameter tensors to train, or plain arrays to embed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor, value_of

__all__ = [
    "EncoderConfig",
    "EncoderParams",
    "init_encoder",
    "forward",
    "encode",
    "lift_params",
    "params_to_dict",
    "params_from_dict",
]

TRAINABLE = ("W1", "b1", "gamma", "beta", "W2", "b2")


@dataclass
class EncoderConfig:
    input_dim: int
    hidden_dim: int = 128
    proj_dim: int = 64
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.proj_dim) < 1:
            raise ValueError("all encoder dimensions must be >= 1")


@dataclass
class EncoderParams:
    """Weights, biases, and batch-norm state for one modality's encoder."""

    config: EncoderConfig
    W1: np.ndarray
    b1: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    running_mean: np.ndarray = field(repr=False, default=None)
    running_var: np.ndarray = field(repr=False, default=None)

    def trainable(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TRAINABLE}

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            config=self.config,
            running_mean=self.running_mean.copy(),
            running_var=self.running_var.copy(),
            **{name: getattr(self, name).copy() for name in TRAINABLE},
        )


def init_encoder(cfg: EncoderConfig, rng: np.random.Generator) -> EncoderParams:
    """Glorot-uniform weights, zero biases, identity batch-norm state."""

    def glorot(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    h, p = cfg.hidden_dim, cfg.proj_dim
    return EncoderParams(
        config=cfg,
        W1=glorot(cfg.input_dim, h),
        b1=np.zeros(h),
        gamma=np.ones(h),
        beta=np.zeros(h),
        W2=glorot(h, p),
        b2=np.zeros(p),
        running_mean=np.zeros(h),
        running_var=np.ones(h),
    )


def lift_params(tape: Tape, params: EncoderParams) -> dict[str, Tensor]:
    """Register the trainable arrays of an encoder as tape leaves."""
    return {name: tape.leaf(arr) for name, arr in params.trainable().items()}


def forward(
    params: EncoderParams,
    x,
    mode: str = "eval",
    lifted: dict[str, Tensor] | None = None,
):
    """Map a feature batch to unit-norm embeddings.

    ``mode="train"`` normalizes with batch statistics and updates the running
    mean/var in place (momentum update, unbiased variance); ``mode="eval"``
    uses the stored running statistics and is a pure function of its inputs.
    Pass ``lifted`` tensors (see :func:`lift_params`) to make the output
    differentiable with respect to the parameters.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    cfg = params.config
    xv = value_of(x)
    if xv.ndim != 2 or xv.shape[1] != cfg.input_dim:
        raise ValueError(
            f"expected input of shape (n, {cfg.input_dim}), got {xv.shape}"
        )
    w = lifted if lifted is not None else params.trainable()

    h = ad.matmul(x, w["W1"]) + w["b1"]
    if mode == "train":
        n = xv.shape[0]
        if n < 2:
            raise ValueError("train-mode forward needs a batch of at least 2")
        mu = ad.reduce_mean(h, axis=0)
        var = ad.reduce_mean(ad.square(h - mu), axis=0)
        # side effect, outside the differentiated graph
        m = cfg.bn_momentum
        params.running_mean *= 1.0 - m
        params.running_mean += m * value_of(mu)
        params.running_var *= 1.0 - m
        params.running_var += m * value_of(var) * (n / (n - 1.0))
    else:
        mu = params.running_mean
        var = params.running_var
    hn = (h - mu) / ad.sqrt(var + cfg.bn_eps)
    a = ad.relu(w["gamma"] * hn + w["beta"])
    z = ad.matmul(a, w["W2"]) + w["b2"]
    return ad.l2_normalize_rows(z)


def encode(params: EncoderParams, x: np.ndarray) -> np.ndarray:
    """Eval-mode forward on plain arrays."""
    return forward(params, np.asarray(x, dtype=np.float64), mode="eval")


# -- checkpoint (de)serialization -------------------------------------------
# JSON with float lists: python's float repr round-trips every finite float64
# bit-exactly, so checkpoints restore the identical model.


def params_to_dict(params: EncoderParams) -> dict:
    out = {
        "config": {
            "input_dim": params.config.input_dim,
            "hidden_dim": params.config.hidden_dim,
            "proj_dim": params.config.proj_dim,
            "bn_eps": params.config.bn_eps,
            "bn_momentum": params.config.bn_momentum,
        },
        "tensors": {},
    }
    for name in TRAINABLE + ("running_mean", "running_var"):
        arr = getattr(params, name)
        out["tensors"][name] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    return out


def params_from_dict(d: dict) -> EncoderParams:
    cfg = EncoderConfig(**d["config"])
    tensors = {}
    for name, spec in d["tensors"].items():
        tensors[name] = np.asarray(spec["data"], dtype=np.float64).reshape(
            spec["shape"]
        )
    return EncoderParams(config=cfg, **tensors)
