"""Cohort loading, normalization, splitting, and the synthetic generator."""

import numpy as np
import pytest

from survcl.cluster import kmeans_fit
from survcl.clustmetrics import ari
from survcl.dataio import (
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
from survcl.losses import LossConfig, survival_contrastive
from survcl.rng import derive_rng
from survcl.survmetrics import km_fit


def _write(path, text):
    path.write_text(text)
    return path


def _cohort_files(tmp_path, n_shared=5, n_extra=3):
    ids = [f"P{i}" for i in range(n_shared + n_extra)]
    ga = ["patient_id,g1,g2"]
    mb = ["patient_id,m1"]
    clin = ["patient_id,overall_survival,status"]
    for i, pid in enumerate(ids):
        ga.append(f"{pid},{i}.0,{i + 1}.5")
        if i < n_shared or i % 2:
            mb.append(f"{pid},{i * 2}.0")
        clin.append(f"{pid},{10 + i}.0,{'dead' if i % 2 else 'alive'}")
    paths = {
        "gene_expression": _write(tmp_path / "ge.csv", "\n".join(ga) + "\n"),
        "methylation": _write(tmp_path / "me.csv", "\n".join(mb) + "\n"),
    }
    clinical = _write(tmp_path / "clin.csv", "\n".join(clin) + "\n")
    return paths, clinical


def test_load_inner_join(tmp_path):
    paths, clinical = _cohort_files(tmp_path)
    cohort = load_cohort(paths, clinical)
    # methylation has P0..P4 plus odd ids; intersection is P0..P4 + P5, P7
    assert all(pid in cohort.patient_ids for pid in ["P0", "P1", "P2", "P3", "P4"])
    assert cohort.patient_ids == sorted(cohort.patient_ids)
    assert set(cohort.views) == {"gene_expression", "methylation"}


def test_load_status_encoding_map(tmp_path):
    ge = _write(tmp_path / "g.csv", "patient_id,f\nA,1.0\nB,2.0\nC,3.0\nD,4.0\n")
    clin = _write(
        tmp_path / "c.csv",
        "patient_id,overall_survival,status\nA,5.0,ALIVE\nB,6.0,Deceased\nC,7.0,1\nD,8.0,censored\n",
    )
    cohort = load_cohort({"g": ge}, clin)
    by_id = dict(zip(cohort.patient_ids, cohort.e))
    assert by_id == {"A": 0, "B": 1, "C": 1, "D": 0}


def test_load_drops_missing_survival(tmp_path):
    ge = _write(tmp_path / "g.csv", "patient_id,f\nA,1.0\nB,2.0\nC,3.0\n")
    clin = _write(
        tmp_path / "c.csv",
        "patient_id,overall_survival,status\nA,5.0,dead\nB,,dead\nC,7.0,\n",
    )
    cohort = load_cohort({"g": ge}, clin)
    assert cohort.patient_ids == ["A"]


def test_load_unparseable_status_names_patient(tmp_path):
    ge = _write(tmp_path / "g.csv", "patient_id,f\nA,1.0\n")
    clin = _write(tmp_path / "c.csv", "patient_id,overall_survival,status\nA,5.0,maybe\n")
    with pytest.raises(ValueError, match="A"):
        load_cohort({"g": ge}, clin)


def test_load_empty_intersection_rejected(tmp_path):
    ge = _write(tmp_path / "g.csv", "patient_id,f\nA,1.0\n")
    clin = _write(tmp_path / "c.csv", "patient_id,overall_survival,status\nB,5.0,dead\n")
    with pytest.raises(ValueError, match="shared"):
        load_cohort({"g": ge}, clin)


def test_load_row_order_independent(tmp_path):
    ge1 = _write(tmp_path / "g1.csv", "patient_id,f\nA,1.0\nB,2.0\n")
    ge2 = _write(tmp_path / "g2.csv", "patient_id,f\nB,2.0\nA,1.0\n")
    clin = _write(
        tmp_path / "c.csv",
        "patient_id,overall_survival,status\nA,5.0,dead\nB,6.0,alive\n",
    )
    a = load_cohort({"g": ge1}, clin)
    b = load_cohort({"g": ge2}, clin)
    assert a.patient_ids == b.patient_ids
    assert np.array_equal(a.views["g"], b.views["g"])


def test_subtype_defaults_to_unknown(tmp_path):
    ge = _write(tmp_path / "g.csv", "patient_id,f\nA,1.0\nB,2.0\n")
    clin = _write(
        tmp_path / "c.csv",
        "patient_id,overall_survival,status\nA,5.0,dead\nB,6.0,alive\n",
    )
    sub = _write(tmp_path / "s.csv", "patient_id,subtype\nA,LumA\n")
    cohort = load_cohort({"g": ge}, clin, sub)
    assert list(cohort.subtype) == ["LumA", "Unknown"]


def test_save_load_roundtrip(tmp_path):
    spec = SyntheticSpec(n_patients=40, feature_dims=(5, 4), seed=3)
    cohort = generate_synthetic(spec)
    save_cohort(cohort, tmp_path / "cohort")
    loaded = load_cohort(
        {name: tmp_path / "cohort" / f"{name}.csv" for name in cohort.views},
        tmp_path / "cohort" / "clinical.csv",
        tmp_path / "cohort" / "subtypes.csv",
    )
    assert loaded.patient_ids == cohort.patient_ids
    for name in cohort.views:
        assert np.array_equal(loaded.views[name], cohort.views[name])
    assert np.array_equal(loaded.t, cohort.t)
    assert np.array_equal(loaded.e, cohort.e)
    assert np.array_equal(loaded.subtype, cohort.subtype)


# -- normalization -------------------------------------------------------------


def test_zscore_train_moments():
    rng = derive_rng(0, "z")
    train = rng.standard_normal((50, 4)) * 3.0 + 5.0
    params = zscore_fit(train)
    out = zscore_apply(params, train)
    assert np.allclose(out.mean(axis=0), 0.0, atol=1e-10)
    assert np.allclose(out.std(axis=0), 1.0, atol=1e-10)


def test_zscore_constant_feature_passthrough():
    train = np.column_stack([np.full(10, 7.0), np.arange(10.0)])
    out = zscore_apply(zscore_fit(train), train)
    assert np.allclose(out[:, 0], 0.0)


def test_zscore_no_leakage_into_val():
    rng = derive_rng(1, "z2")
    train = rng.standard_normal((50, 3))
    val = rng.standard_normal((30, 3)) + 2.0
    out = zscore_apply(zscore_fit(train), val)
    assert np.all(np.abs(out.mean(axis=0)) > 0.5)  # shifted, as it should be


def test_normalize_times_scale_invariance():
    rng = derive_rng(2, "t")
    t = rng.exponential(2.0, 100)
    a, _ = normalize_times(t)
    b, _ = normalize_times(10.0 * t)
    assert np.allclose(a, b, rtol=1e-12)
    iqr_one = np.quantile(t, 0.75) - np.quantile(t, 0.25)
    c, scale = normalize_times(t / iqr_one)
    assert np.isclose(scale, 1.0, rtol=1e-12)

    flat, scale = normalize_times(np.full(5, 3.0))
    assert scale == 1.0 and np.allclose(flat, 3.0)


def test_survival_loss_invariant_under_time_rescaling():
    rng = derive_rng(3, "t2")
    z = rng.standard_normal((12, 4))
    t = rng.exponential(1.0, 12)
    e = rng.integers(0, 2, 12)
    cfg = LossConfig(tanh_weighting=True)
    from survcl.losses import BatchSurvival

    losses = []
    for factor in (1.0, 13.7):
        tn, _ = normalize_times(factor * t)
        losses.append(float(survival_contrastive(z, BatchSurvival(tn, e), cfg)))
    assert np.isclose(losses[0], losses[1], rtol=1e-12)


# -- splitting -------------------------------------------------------------------


def _toy_cohort(n):
    rng = derive_rng(9, "toy")
    return Cohort(
        patient_ids=[f"P{i:03d}" for i in range(n)],
        views={"g": rng.standard_normal((n, 3))},
        t=rng.exponential(1.0, n),
        e=rng.integers(0, 2, n).astype(np.int64),
        subtype=np.asarray(["x"] * n, dtype=object),
    )


def test_split_sizes_612():
    cohort = _toy_cohort(612)
    tr, va, te = split(cohort, SplitSpec(seed=0))
    assert (len(tr), len(va), len(te)) == (368, 122, 122)


def test_split_deterministic_and_partition():
    cohort = _toy_cohort(101)
    a = split(cohort, SplitSpec(seed=5))
    b = split(cohort, SplitSpec(seed=5))
    for s1, s2 in zip(a, b):
        assert s1.patient_ids == s2.patient_ids
    ids = [pid for s in a for pid in s.patient_ids]
    assert sorted(ids) == cohort.patient_ids
    assert len(set(ids)) == len(ids)


def test_split_tiny_cohort_rejected():
    with pytest.raises(ValueError):
        split(_toy_cohort(4), SplitSpec(seed=0))


def test_split_bad_fractions_rejected():
    with pytest.raises(ValueError):
        SplitSpec(train_frac=0.5, val_frac=0.2, test_frac=0.2)


# -- synthetic cohorts -----------------------------------------------------------


def test_synthetic_no_censoring_all_events():
    cohort = generate_synthetic(SyntheticSpec(n_patients=50, censoring=0.0, seed=1))
    assert np.all(cohort.e == 1)


def test_synthetic_censoring_fraction_and_shapes():
    spec = SyntheticSpec(n_patients=400, censoring=0.3, seed=2)
    cohort = generate_synthetic(spec)
    assert len(cohort) == 400
    assert set(cohort.views) == {"gene_expression", "methylation", "mirna"}
    assert cohort.views["gene_expression"].shape == (400, 60)
    frac = 1.0 - cohort.e.mean()
    assert 0.2 < frac < 0.4


def test_synthetic_two_rate_km_medians_ordered():
    spec = SyntheticSpec(
        n_patients=400,
        n_subtypes=2,
        hazard_rates=(1.0, 4.0),
        feature_dims=(6, 5),
        censoring=0.2,
        seed=4,
    )
    cohort = generate_synthetic(spec)
    meds = {}
    for name in ("subtype_0", "subtype_1"):
        mask = cohort.subtype == name
        meds[name] = km_fit(cohort.t[mask], cohort.e[mask]).median()
    assert meds["subtype_1"] < meds["subtype_0"]


def test_synthetic_low_noise_clusters_recoverable():
    spec = SyntheticSpec(
        n_patients=300, noise=0.01, feature_dims=(8, 8, 8), seed=5
    )
    cohort = generate_synthetic(spec)
    x = np.hstack(list(cohort.views.values()))
    model = kmeans_fit(x, 3, derive_rng(5, "km"))
    assert ari(model.labels, cohort.subtype.astype(str)) > 0.95


def test_synthetic_noise_degrades_ari_monotonically():
    scores = []
    for noise in (0.05, 1.0, 6.0):
        spec = SyntheticSpec(n_patients=300, noise=noise, feature_dims=(8, 8), seed=6)
        cohort = generate_synthetic(spec)
        x = np.hstack(list(cohort.views.values()))
        model = kmeans_fit(x, 3, derive_rng(6, "km"))
        scores.append(ari(model.labels, cohort.subtype.astype(str)))
    assert scores[0] > scores[1] > scores[2]


def test_synthetic_deterministic():
    a = generate_synthetic(SyntheticSpec(n_patients=30, seed=7))
    b = generate_synthetic(SyntheticSpec(n_patients=30, seed=7))
    assert np.array_equal(a.t, b.t)
    assert np.array_equal(a.views["mirna"], b.views["mirna"])


def test_synthetic_subtype_weights():
    spec = SyntheticSpec(
        n_patients=100, subtype_weights=(0.5, 0.25, 0.25), seed=8
    )
    cohort = generate_synthetic(spec)
    counts = {s: int(np.sum(cohort.subtype == s)) for s in np.unique(cohort.subtype)}
    assert counts["subtype_0"] == 50
