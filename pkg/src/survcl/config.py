"""Flat JSON run configuration.

One document holds every hyperparameter with the published defaults; unknown
keys are hard errors so typos cannot silently fall back to defaults. The
resolved configuration is echoed verbatim into every artifact a command
writes, which is what makes runs reproducible from (config, seed) alone.
"""

from __future__ import annotations

import json
from pathlib import Path

__all__ = ["ConfigError", "DEFAULTS", "load_config", "resolve_config"]


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    # data
    "data_dir": None,
    "modalities": ["gene_expression", "methylation", "mirna"],
    "seed": 0,
    "train_frac": 0.6,
    "val_frac": 0.2,
    "test_frac": 0.2,
    # encoder
    "hidden_dim": 128,
    "proj_dim": 64,
    "bn_eps": 1e-5,
    "bn_momentum": 0.1,
    # losses
    "tau": 0.1,
    "alpha": 10.0,
    "delta_time": 1.0,
    "delta_dist": 1.0,
    "lambda_pull": 1.0,
    "lambda_push": 1.0,
    "tanh_weighting": False,
    "include_positive_in_denominator": False,
    "surv_target": "fused",
    # optimization
    "max_epochs": 1000,
    "patience": 20,
    "batch_size": 64,
    "lr_min": 1e-5,
    "lr_max": 1e-3,
    "cycle_epochs": 20,
    "weight_decay": 1e-6,
    "adam_beta1": 0.9,
    "adam_beta2": 0.999,
    "adam_eps": 1e-8,
    "k_for_validation": 4,
    # clustering / evaluation
    "k_clusters": 4,
    "fusion": "concat",
    "kmeans_n_init": 10,
    "kmeans_max_iter": 300,
    # cox baseline
    "cox_ridge": 1e-4,
    "cox_max_iter": 100,
    "cox_tol": 1e-8,
    # sweep
    "sweep_k_min": 2,
    "sweep_k_max": 9,
    # synthetic cohort generation
    "synthetic_n_patients": 600,
    "synthetic_n_subtypes": 3,
    "synthetic_latent_dim": 8,
    "synthetic_feature_dims": [60, 50, 40],
    "synthetic_noise": 1.0,
    "synthetic_hazard_rates": [1.0, 2.0, 4.0],
    "synthetic_censoring": 0.3,
    "synthetic_subtype_weights": None,
}

_LIST_KEYS = {
    "modalities": str,
    "synthetic_feature_dims": int,
    "synthetic_hazard_rates": (int, float),
    "synthetic_subtype_weights": (int, float),
}
_OPTIONAL_KEYS = {"data_dir", "synthetic_subtype_weights"}


def load_config(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object of key/value pairs")
    return raw


def _check_type(key: str, value):
    if value is None:
        if key in _OPTIONAL_KEYS:
            return
        raise ConfigError(f"config key {key!r} must not be null")
    if key in _LIST_KEYS:
        want = _LIST_KEYS[key]
        if not isinstance(value, list) or not value:
            raise ConfigError(f"config key {key!r} must be a non-empty list")
        for item in value:
            if isinstance(item, bool) or not isinstance(item, want):
                raise ConfigError(f"config key {key!r} has invalid entry {item!r}")
        return
    default = DEFAULTS[key]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"config key {key!r} must be true or false")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {key!r} must be an integer")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number")
    elif isinstance(default, str) or key == "data_dir":
        if not isinstance(value, str):
            raise ConfigError(f"config key {key!r} must be a string")


def resolve_config(user: dict) -> dict:
    """Merge a user config over the defaults, rejecting unknown keys."""
    unknown = sorted(set(user) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged = {}
    for key, default in DEFAULTS.items():
        value = user.get(key, default)
        _check_type(key, value)
        if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        merged[key] = value

    fracs = merged["train_frac"] + merged["val_frac"] + merged["test_frac"]
    if abs(fracs - 1.0) > 1e-9:
        raise ConfigError("train_frac + val_frac + test_frac must sum to 1")
    if merged["lr_min"] >= merged["lr_max"]:
        raise ConfigError("lr_min must be below lr_max")
    if merged["patience"] >= merged["max_epochs"]:
        raise ConfigError("patience must be below max_epochs")
    if merged["tau"] <= 0:
        raise ConfigError("tau must be positive")
    if merged["alpha"] < 0:
        raise ConfigError("alpha must be nonnegative")
    if merged["fusion"] not in ("concat", "mean"):
        raise ConfigError("fusion must be 'concat' or 'mean'")
    if merged["surv_target"] not in ("fused", "per_modality_mean"):
        raise ConfigError("surv_target must be 'fused' or 'per_modality_mean'")
    if not 2 <= merged["sweep_k_min"] <= merged["sweep_k_max"]:
        raise ConfigError("sweep k range must satisfy 2 <= k_min <= k_max")
    return merged
