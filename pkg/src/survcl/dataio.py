"""Cohort ingestion, normalization, splitting, and synthetic cohorts.

File formats (UTF-8 CSV, header row):

* one file per omics view: ``patient_id`` first, then one column per feature
* clinical file: ``patient_id, overall_survival, status``
* optional subtype file: ``patient_id, subtype``

Patients are inner-joined on ``patient_id`` across all sources and kept in
sorted-id order, so loading is independent of the row order on disk.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .rng import derive_rng

__all__ = [
    "Cohort",
    "SplitSpec",
    "SyntheticSpec",
    "ZScoreParams",
    "load_cohort",
    "save_cohort",
    "zscore_fit",
    "zscore_apply",
    "normalize_times",
    "split",
    "generate_synthetic",
]

UNKNOWN = "Unknown"

# accepted spellings of the clinical status field
_STATUS_MAP = {"alive": 0, "censored": 0, "0": 0, "dead": 1, "deceased": 1, "1": 1}


@dataclass
class Cohort:
    """Row-aligned multi-omics views plus survival outcome per patient."""

    patient_ids: list[str]
    views: dict[str, np.ndarray]
    t: np.ndarray
    e: np.ndarray
    subtype: np.ndarray  # strings; "Unknown" when unannotated

    def __post_init__(self):
        n = len(self.patient_ids)
        for name, m in self.views.items():
            if m.shape[0] != n:
                raise ValueError(f"view {name!r} has {m.shape[0]} rows for {n} patients")
        if self.t.shape != (n,) or self.e.shape != (n,) or self.subtype.shape != (n,):
            raise ValueError("survival arrays must align with patients")
        if np.any(self.t < 0):
            raise ValueError("survival times must be nonnegative")
        if not np.all(np.isin(self.e, (0, 1))):
            raise ValueError("event indicators must be 0 or 1")

    def __len__(self) -> int:
        return len(self.patient_ids)

    def subset(self, idx) -> "Cohort":
        idx = np.asarray(idx)
        return Cohort(
            patient_ids=[self.patient_ids[i] for i in idx],
            views={k: v[idx] for k, v in self.views.items()},
            t=self.t[idx],
            e=self.e[idx],
            subtype=self.subtype[idx],
        )


def _read_table(path) -> pd.DataFrame:
    # round_trip parsing: repr-formatted float64 must restore bit-exactly
    df = pd.read_csv(path, dtype={0: str}, float_precision="round_trip")
    df = df.rename(columns={df.columns[0]: "patient_id"})
    if df["patient_id"].duplicated().any():
        dup = df["patient_id"][df["patient_id"].duplicated()].iloc[0]
        raise ValueError(f"{path}: duplicate patient_id {dup!r}")
    return df.set_index("patient_id")


def _parse_time(raw, pid) -> float | None:
    if raw is None or (isinstance(raw, float) and np.isnan(raw)) or str(raw).strip() == "":
        return None
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ValueError(f"unparseable overall_survival {raw!r} for patient {pid}")
    if np.isnan(value):
        return None
    if value < 0:
        raise ValueError(f"negative overall_survival {value} for patient {pid}")
    return value


def _parse_status(raw, pid) -> int | None:
    if raw is None or (isinstance(raw, float) and np.isnan(raw)) or str(raw).strip() == "":
        return None
    key = str(raw).strip().lower()
    if key in _STATUS_MAP:
        return _STATUS_MAP[key]
    try:
        value = float(key)
    except ValueError:
        raise ValueError(f"unparseable status {raw!r} for patient {pid}")
    if value in (0.0, 1.0):
        return int(value)
    raise ValueError(f"unparseable status {raw!r} for patient {pid}")


def load_cohort(
    view_paths: dict[str, str | Path],
    clinical_path: str | Path,
    subtype_path: str | Path | None = None,
) -> Cohort:
    """Inner-join omics views with clinical outcomes on patient_id.

    Patients missing survival time or event status are dropped; patients
    without a subtype annotation get "Unknown".
    """
    views = {name: _read_table(path) for name, path in view_paths.items()}
    clinical = _read_table(clinical_path)
    for col in ("overall_survival", "status"):
        if col not in clinical.columns:
            raise ValueError(f"clinical file lacks required column {col!r}")

    ids = set(clinical.index)
    for df in views.values():
        ids &= set(df.index)
    if not ids:
        raise ValueError("no patients shared across all input files")

    subtype_map: dict[str, str] = {}
    if subtype_path is not None:
        sub = _read_table(subtype_path)
        col = sub.columns[0]
        subtype_map = {pid: str(v) for pid, v in sub[col].items()}

    kept, t_list, e_list, s_list = [], [], [], []
    for pid in sorted(ids):
        t = _parse_time(clinical.at[pid, "overall_survival"], pid)
        e = _parse_status(clinical.at[pid, "status"], pid)
        if t is None or e is None:
            continue
        kept.append(pid)
        t_list.append(t)
        e_list.append(e)
        raw_sub = subtype_map.get(pid, UNKNOWN)
        s_list.append(UNKNOWN if raw_sub in ("", "nan", "NaN") else raw_sub)
    if not kept:
        raise ValueError("every shared patient lacks survival time or status")

    view_arrays = {
        name: df.loc[kept].to_numpy(dtype=np.float64) for name, df in views.items()
    }
    return Cohort(
        patient_ids=kept,
        views=view_arrays,
        t=np.asarray(t_list),
        e=np.asarray(e_list, dtype=np.int64),
        subtype=np.asarray(s_list, dtype=object),
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def save_cohort(cohort: Cohort, out_dir: str | Path) -> dict[str, Path]:
    """Write a cohort back to the CSV layout that load_cohort reads."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for name, m in cohort.views.items():
        path = out / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["patient_id"] + [f"f{j}" for j in range(m.shape[1])])
            for pid, row in zip(cohort.patient_ids, m):
                writer.writerow([pid] + [_fmt(v) for v in row])
        paths[name] = path
    clinical = out / "clinical.csv"
    with open(clinical, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "overall_survival", "status"])
        for pid, t, e in zip(cohort.patient_ids, cohort.t, cohort.e):
            writer.writerow([pid, _fmt(t), int(e)])
    paths["clinical"] = clinical
    subtypes = out / "subtypes.csv"
    with open(subtypes, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "subtype"])
        for pid, s in zip(cohort.patient_ids, cohort.subtype):
            writer.writerow([pid, s])
    paths["subtypes"] = subtypes
    return paths


# -- normalization -----------------------------------------------------------


@dataclass
class ZScoreParams:
    mean: np.ndarray
    scale: np.ndarray  # 1.0 where the training std was (near) zero


def zscore_fit(train: np.ndarray) -> ZScoreParams:
    """Per-feature mean/std from the training rows only."""
    train = np.asarray(train, dtype=np.float64)
    if train.shape[0] == 0:
        raise ValueError("cannot fit normalization on an empty matrix")
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    return ZScoreParams(mean=mean, scale=np.where(std < 1e-12, 1.0, std))


def zscore_apply(params: ZScoreParams, m: np.ndarray) -> np.ndarray:
    return (np.asarray(m, dtype=np.float64) - params.mean) / params.scale


def normalize_times(t: np.ndarray) -> tuple[np.ndarray, float]:
    """Scale times by the training interquartile range.

    Makes the survival-loss time margin portable across datasets: a margin
    of 1.0 always means "one IQR of survival time apart". Returns the scaled
    times and the scale (1.0 for degenerate all-equal times).
    """
    t = np.asarray(t, dtype=np.float64)
    iqr = float(np.quantile(t, 0.75) - np.quantile(t, 0.25))
    scale = 1.0 if iqr < 1e-12 else iqr
    return t / scale, scale


# -- splitting ---------------------------------------------------------------


@dataclass
class SplitSpec:
    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f < 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError("split fractions must be nonnegative and sum to 1")


def split(cohort: Cohort, spec: SplitSpec) -> tuple[Cohort, Cohort, Cohort]:
    """Seeded shuffle, then contiguous slices; remainder rows go to train."""
    n = len(cohort)
    if n < 5:
        raise ValueError("cohort too small to split")
    n_train = int(np.floor(spec.train_frac * n))
    n_val = int(np.floor(spec.val_frac * n))
    n_test = int(np.floor(spec.test_frac * n))
    n_train += n - (n_train + n_val + n_test)
    perm = derive_rng(spec.seed, "split").permutation(n)
    return (
        cohort.subset(perm[:n_train]),
        cohort.subset(perm[n_train : n_train + n_val]),
        cohort.subset(perm[n_train + n_val :]),
    )


# -- synthetic cohorts ---------------------------------------------------------


@dataclass
class SyntheticSpec:
    """Planted-subtype generator for desk-scale verification.

    Each subtype has a latent center and an exponential hazard rate; patient
    features are noisy random linear images of the latent position, so the
    subtype (and hence the hazard) is recoverable from features only up to
    the noise level.
    """

    n_patients: int = 600
    n_subtypes: int = 3
    latent_dim: int = 8
    feature_dims: tuple[int, ...] = (60, 50, 40)
    noise: float = 1.0
    hazard_rates: tuple[float, ...] = (1.0, 2.0, 4.0)
    censoring: float = 0.3
    seed: int = 0
    subtype_weights: tuple[float, ...] | None = None
    modality_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n_subtypes < 2:
            raise ValueError("need at least two subtypes")
        if len(self.hazard_rates) != self.n_subtypes:
            raise ValueError("one hazard rate per subtype")
        if any(r <= 0 for r in self.hazard_rates):
            raise ValueError("hazard rates must be positive")
        if not (0.0 <= self.censoring < 1.0):
            raise ValueError("censoring fraction must be in [0, 1)")
        if self.subtype_weights is not None and len(self.subtype_weights) != self.n_subtypes:
            raise ValueError("one weight per subtype")

    def names(self) -> tuple[str, ...]:
        if self.modality_names is not None:
            if len(self.modality_names) != len(self.feature_dims):
                raise ValueError("one name per modality")
            return tuple(self.modality_names)
        if len(self.feature_dims) == 3:
            return ("gene_expression", "methylation", "mirna")
        return tuple(f"view_{i}" for i in range(len(self.feature_dims)))


def _subtype_counts(spec: SyntheticSpec) -> np.ndarray:
    k = spec.n_subtypes
    weights = np.full(k, 1.0 / k) if spec.subtype_weights is None else np.asarray(
        spec.subtype_weights, dtype=np.float64
    )
    weights = weights / weights.sum()
    counts = np.floor(weights * spec.n_patients).astype(int)
    # distribute the remainder by largest fractional part, ties to low index
    frac = weights * spec.n_patients - counts
    for j in np.argsort(-frac, kind="stable")[: spec.n_patients - counts.sum()]:
        counts[j] += 1
    return counts


def generate_synthetic(spec: SyntheticSpec) -> Cohort:
    """Draw a cohort with planted subtype geometry and subtype-level hazards."""
    rng = derive_rng(spec.seed, "synthetic")
    n, k = spec.n_patients, spec.n_subtypes
    counts = _subtype_counts(spec)
    sub = rng.permutation(np.repeat(np.arange(k), counts))

    centers = rng.standard_normal((k, spec.latent_dim))
    latent = centers[sub] + spec.noise * rng.standard_normal((n, spec.latent_dim))

    views: dict[str, np.ndarray] = {}
    for name, dim in zip(spec.names(), spec.feature_dims):
        mixing = rng.standard_normal((spec.latent_dim, dim)) / np.sqrt(spec.latent_dim)
        views[name] = latent @ mixing + spec.noise * rng.standard_normal((n, dim))

    rates = np.asarray(spec.hazard_rates)[sub]
    t = rng.exponential(1.0 / rates)
    e = np.ones(n, dtype=np.int64)
    censored = rng.random(n) < spec.censoring
    t = np.where(censored, rng.random(n) * t, t)
    e[censored] = 0

    return Cohort(
        patient_ids=[f"P{i:04d}" for i in range(n)],
        views=views,
        t=t,
        e=e,
        subtype=np.asarray([f"subtype_{j}" for j in sub], dtype=object),
    )
