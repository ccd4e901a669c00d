"""Command-line pipeline: generate | train | evaluate | ablate | sweep.

Every command takes a flat JSON config (--config), an optional seed override
(--seed), and an output directory (--out). The resolved config is echoed into
each JSON artifact, and all randomness derives from the seed, so artifacts
are byte-reproducible from (config, seed).

Exit codes: 0 success, 1 usage or config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .autodiff import NonFiniteError
from .cluster import assign, kmeans_fit
from .config import ConfigError, load_config, resolve_config
from .coxph import cox_fit, cox_risk
from .dataio import Cohort, SplitSpec, SyntheticSpec, ZScoreParams, generate_synthetic, load_cohort, save_cohort
from .encoder import EncoderConfig, params_from_dict, params_to_dict
from .losses import LossConfig
from .pipeline import PreparedData, embed_fused, evaluate_embeddings, km_curve_rows, prepare, prepare_with, training_data
from .rng import derive_rng
from .survmetrics import c_index
from .trainer import NumericalAbort, TrainConfig, train

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _resolved_config(args) -> dict:
    raw = load_config(args.config) if args.config else {}
    cfg = resolve_config(raw)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
        overrides["seed"] = args.seed
    if getattr(args, "alpha", None) is not None:
        cfg["alpha"] = float(args.alpha)
        overrides["alpha"] = float(args.alpha)
    cfg["_overrides"] = overrides  # stripped before echo
    return cfg


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def _load_data(cfg: dict) -> Cohort:
    if not cfg["data_dir"]:
        raise ConfigError("missing required config key: data_dir")
    data_dir = Path(cfg["data_dir"])
    view_paths = {}
    for name in cfg["modalities"]:
        path = data_dir / f"{name}.csv"
        if not path.exists():
            raise ConfigError(f"missing omics file: {path}")
        view_paths[name] = path
    clinical = data_dir / "clinical.csv"
    if not clinical.exists():
        raise ConfigError(f"missing clinical file: {clinical}")
    subtypes = data_dir / "subtypes.csv"
    return load_cohort(view_paths, clinical, subtypes if subtypes.exists() else None)


def _split_spec(cfg: dict) -> SplitSpec:
    return SplitSpec(
        train_frac=cfg["train_frac"],
        val_frac=cfg["val_frac"],
        test_frac=cfg["test_frac"],
        seed=cfg["seed"],
    )


def _prepare(cfg: dict, cohort: Cohort) -> PreparedData:
    return prepare(cohort, _split_spec(cfg))


def _loss_config(cfg: dict) -> LossConfig:
    return LossConfig(
        tau=cfg["tau"],
        delta_time=cfg["delta_time"],
        delta_dist=cfg["delta_dist"],
        lambda_pull=cfg["lambda_pull"],
        lambda_push=cfg["lambda_push"],
        alpha=cfg["alpha"],
        tanh_weighting=cfg["tanh_weighting"],
        include_positive_in_denominator=cfg["include_positive_in_denominator"],
        surv_target=cfg["surv_target"],
    )


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        max_epochs=cfg["max_epochs"],
        patience=cfg["patience"],
        batch_size=cfg["batch_size"],
        lr_min=cfg["lr_min"],
        lr_max=cfg["lr_max"],
        cycle_epochs=cfg["cycle_epochs"],
        weight_decay=cfg["weight_decay"],
        adam_beta1=cfg["adam_beta1"],
        adam_beta2=cfg["adam_beta2"],
        adam_eps=cfg["adam_eps"],
        seed=cfg["seed"],
        k_for_validation=cfg["k_for_validation"],
        kmeans_n_init=cfg["kmeans_n_init"],
        fusion=cfg["fusion"],
    )


def _save_checkpoint(path: Path, cfg: dict, prepared: PreparedData, result) -> None:
    payload = {
        "config": _echo(cfg),
        "time_scale": prepared.time_scale,
        "zscore": {
            name: {"mean": p.mean.tolist(), "scale": p.scale.tolist()}
            for name, p in prepared.zscore.items()
        },
        "encoders": {
            name: params_to_dict(enc) for name, enc in result.encoders.items()
        },
        "best_epoch": result.report.best_epoch,
        "best_val_c_index": result.report.best_val_c_index,
    }
    _write_json(path, payload)


def _load_checkpoint(path: Path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"checkpoint not found: {path}")
    encoders = {
        name: params_from_dict(d) for name, d in payload["encoders"].items()
    }
    zscore = {
        name: ZScoreParams(
            mean=np.asarray(z["mean"], dtype=np.float64),
            scale=np.asarray(z["scale"], dtype=np.float64),
        )
        for name, z in payload["zscore"].items()
    }
    return payload, encoders, zscore


def _train_run(cfg: dict, out: Path):
    """Shared by train/ablate/sweep: fit, then write every training artifact."""
    cohort = _load_data(cfg)
    prepared = _prepare(cfg, cohort)
    encoder_cfgs = {
        name: EncoderConfig(
            input_dim=prepared.train.views[name].shape[1],
            hidden_dim=cfg["hidden_dim"],
            proj_dim=cfg["proj_dim"],
            bn_eps=cfg["bn_eps"],
            bn_momentum=cfg["bn_momentum"],
        )
        for name in cfg["modalities"]
    }
    result = train(training_data(prepared), encoder_cfgs, _loss_config(cfg), _train_config(cfg))

    out.mkdir(parents=True, exist_ok=True)
    _save_checkpoint(out / "checkpoint.json", cfg, prepared, result)
    with open(out / "train_report.jsonl", "w") as fh:
        for record in result.report.epochs:
            fh.write(json.dumps(record))
            fh.write("\n")
    _write_json(
        out / "summary.json",
        {
            "config": _echo(cfg),
            "best_epoch": result.report.best_epoch,
            "best_val_c_index": result.report.best_val_c_index,
            "stopped_early": result.report.stopped_early,
            "epochs_run": len(result.report.epochs),
            "checkpoint": "checkpoint.json",
            "embeddings": "embeddings.csv",
        },
    )

    dim = None
    rows = []
    for split_name in ("train", "val", "test"):
        s = prepared.split(split_name)
        fused = embed_fused(result.encoders, s.views, cfg["fusion"])
        dim = fused.shape[1]
        for pid, row in zip(s.patient_ids, fused):
            rows.append([pid, split_name] + [_fmt(v) for v in row])
    _write_csv(
        out / "embeddings.csv",
        ["patient_id", "split"] + [f"e{j}" for j in range(dim)],
        rows,
    )
    return prepared, result


def _evaluate_split(cfg, prepared, encoders, split_name, k):
    s = prepared.split(split_name)
    if k > len(s.patient_ids):
        raise ConfigError(f"k={k} exceeds the {split_name} split size {len(s.patient_ids)}")
    fused = embed_fused(encoders, s.views, cfg["fusion"])
    rng = derive_rng(cfg["seed"], f"eval-km-k{k}-{split_name}")
    report, labels, risk = evaluate_embeddings(
        fused,
        s.t_raw,
        s.e,
        s.subtype,
        k,
        rng,
        n_init=cfg["kmeans_n_init"],
        max_iter=cfg["kmeans_max_iter"],
    )
    return s, fused, report, labels, risk


# -- commands ----------------------------------------------------------------


def cmd_generate(args) -> None:
    cfg = _resolved_config(args)
    out = Path(args.out)
    names = cfg["modalities"] if len(cfg["modalities"]) == len(cfg["synthetic_feature_dims"]) else None
    spec = SyntheticSpec(
        n_patients=cfg["synthetic_n_patients"],
        n_subtypes=cfg["synthetic_n_subtypes"],
        latent_dim=cfg["synthetic_latent_dim"],
        feature_dims=tuple(cfg["synthetic_feature_dims"]),
        noise=cfg["synthetic_noise"],
        hazard_rates=tuple(cfg["synthetic_hazard_rates"]),
        censoring=cfg["synthetic_censoring"],
        seed=cfg["seed"],
        subtype_weights=tuple(cfg["synthetic_subtype_weights"]) if cfg["synthetic_subtype_weights"] else None,
        modality_names=tuple(names) if names else None,
    )
    cohort = generate_synthetic(spec)
    save_cohort(cohort, out)
    _write_json(out / "manifest.json", {"command": "generate", "config": _echo(cfg), "n_patients": len(cohort)})
    print(f"wrote synthetic cohort of {len(cohort)} patients to {out}")


def cmd_train(args) -> None:
    cfg = _resolved_config(args)
    out = Path(args.out)
    _, result = _train_run(cfg, out)
    print(
        f"trained for {len(result.report.epochs)} epochs; "
        f"best epoch {result.report.best_epoch} "
        f"(val C-index {result.report.best_val_c_index:.4f}); artifacts in {out}"
    )


def cmd_evaluate(args) -> None:
    cfg = _resolved_config(args)
    out = Path(args.out)
    payload, encoders, zscore = _load_checkpoint(Path(args.checkpoint))
    cohort = _load_data(cfg)
    # the checkpoint's normalization is authoritative for its encoders
    prepared = prepare_with(cohort, _split_spec(cfg), zscore, payload["time_scale"])

    k = args.k if args.k is not None else cfg["k_clusters"]
    s, fused, report, labels, risk = _evaluate_split(cfg, prepared, encoders, args.split, k)

    _write_json(
        out / "eval_report.json",
        {
            "config": _echo(cfg),
            "checkpoint": str(args.checkpoint),
            "split": args.split,
            "report": report.to_dict(),
        },
    )
    _write_csv(
        out / "clusters.csv",
        ["patient_id", "cluster"],
        [[pid, int(lab)] for pid, lab in zip(s.patient_ids, labels)],
    )
    _write_csv(
        out / "km_curves.csv",
        ["group", "time", "survival", "at_risk", "events"],
        [
            [r["group"], _fmt(r["time"]), _fmt(r["survival"]), r["at_risk"], r["events"]]
            for r in km_curve_rows(s.t_raw, s.e, labels)
        ],
    )
    print(json.dumps(report.to_dict(), indent=2))


def cmd_ablate(args) -> None:
    cfg = _resolved_config(args)
    out = Path(args.out)
    k = cfg["k_clusters"]

    runs = {}
    for label, alpha in (("with_survival_loss", cfg["alpha"]), ("no_survival_loss", 0.0)):
        run_cfg = dict(cfg)
        run_cfg["alpha"] = alpha
        prepared, result = _train_run(run_cfg, out / label)
        _, _, report, _, _ = _evaluate_split(run_cfg, prepared, result.encoders, "test", k)
        runs[label] = {
            "seed": run_cfg["seed"],
            "alpha": alpha,
            "test_c_index": report.c_index,
            "best_val_c_index": result.report.best_val_c_index,
            "epochs_run": len(result.report.epochs),
            "config": _echo(run_cfg),
        }

    delta = runs["with_survival_loss"]["test_c_index"] - runs["no_survival_loss"]["test_c_index"]
    _write_json(
        out / "ablation.json",
        {"config": _echo(cfg), "k": k, "runs": runs, "delta_test_c_index": delta},
    )
    print(
        f"test C-index with survival loss: {runs['with_survival_loss']['test_c_index']:.4f}, "
        f"without: {runs['no_survival_loss']['test_c_index']:.4f}, delta: {delta:+.4f}"
    )


def cmd_sweep(args) -> None:
    cfg = _resolved_config(args)
    out = Path(args.out)
    k_min = args.k_min if args.k_min is not None else cfg["sweep_k_min"]
    k_max = args.k_max if args.k_max is not None else cfg["sweep_k_max"]
    if not 2 <= k_min <= k_max:
        raise ConfigError("sweep requires 2 <= k_min <= k_max")

    if args.checkpoint:
        payload, encoders, zscore = _load_checkpoint(Path(args.checkpoint))
        cohort = _load_data(cfg)
        prepared = prepare_with(cohort, _split_spec(cfg), zscore, payload["time_scale"])
    else:
        prepared, result = _train_run(cfg, out / "training")
        encoders = result.encoders

    train_s, test_s = prepared.train, prepared.test
    if k_max >= len(test_s.patient_ids):
        raise ConfigError(f"k_max={k_max} must be below the test split size")
    fused_train = embed_fused(encoders, train_s.views, cfg["fusion"])
    fused_test = embed_fused(encoders, test_s.views, cfg["fusion"])

    cox_emb = cox_fit(
        fused_train,
        train_s.t_raw,
        train_s.e,
        ridge=cfg["cox_ridge"],
        max_iter=cfg["cox_max_iter"],
        tol=cfg["cox_tol"],
    )
    cox_emb_c = c_index(cox_risk(cox_emb, fused_test), test_s.t_raw, test_s.e)

    rows = []
    for k in range(k_min, k_max + 1):
        _, _, report, _, _ = _evaluate_split(cfg, prepared, encoders, "test", k)
        km = kmeans_fit(
            fused_train,
            k,
            derive_rng(cfg["seed"], f"sweep-km-{k}"),
            n_init=cfg["kmeans_n_init"],
            max_iter=cfg["kmeans_max_iter"],
        )
        onehot_train = np.eye(k)[km.labels]
        onehot_test = np.eye(k)[assign(km, fused_test)]
        cox_k = cox_fit(
            onehot_train,
            train_s.t_raw,
            train_s.e,
            ridge=cfg["cox_ridge"],
            max_iter=cfg["cox_max_iter"],
            tol=cfg["cox_tol"],
        )
        cox_k_c = c_index(cox_risk(cox_k, onehot_test), test_s.t_raw, test_s.e)
        rows.append(
            {
                "k": k,
                "pipeline_c_index": report.c_index,
                "coxph_cluster_onehot_c_index": cox_k_c,
                "coxph_embeddings_c_index": cox_emb_c,
                "purity": report.purity,
                "silhouette": report.silhouette,
            }
        )

    _write_json(out / "sweep.json", {"config": _echo(cfg), "rows": rows})
    _write_csv(
        out / "sweep.csv",
        ["k", "pipeline_c_index", "coxph_cluster_onehot_c_index", "coxph_embeddings_c_index", "purity", "silhouette"],
        [
            [
                r["k"],
                _fmt(r["pipeline_c_index"]),
                _fmt(r["coxph_cluster_onehot_c_index"]),
                _fmt(r["coxph_embeddings_c_index"]),
                "" if r["purity"] is None else _fmt(r["purity"]),
                "" if r["silhouette"] is None else _fmt(r["silhouette"]),
            ]
            for r in rows
        ],
    )
    print(f"swept k={k_min}..{k_max}; table in {out / 'sweep.csv'}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="survcl", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p, needs_out=True):
        p.add_argument("--config", help="path to a flat JSON config")
        p.add_argument("--seed", type=int, help="override the config seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("generate", help="write a synthetic multi-omics cohort")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the encoders and export artifacts")
    common(p)
    p.add_argument("--alpha", type=float, help="override the survival-loss weight")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on one split")
    common(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint.json from train")
    p.add_argument("--k", type=int, help="number of clusters (default: config k_clusters)")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train with and without the survival loss")
    common(p)
    p.add_argument("--alpha", type=float, help="override the survival-loss weight")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="trade-off table across cluster counts")
    common(p)
    p.add_argument("--checkpoint", help="reuse a trained checkpoint instead of training")
    p.add_argument("--k-min", type=int, dest="k_min")
    p.add_argument("--k-max", type=int, dest="k_max")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return 1
        args.func(args)
        return 0
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (NumericalAbort, NonFiniteError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
