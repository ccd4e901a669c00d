"""Fusion, k-means behavior, out-of-sample assignment, cluster risk scores."""

import numpy as np
import pytest

from survcl.cluster import assign, cluster_risk, fuse, kmeans_fit
from survcl.clustmetrics import ari
from survcl.losses import BatchSurvival
from survcl.rng import derive_rng


def _blobs(rng, centers, n_per, scale=0.1):
    points = [c + scale * rng.standard_normal((n_per, len(c))) for c in centers]
    labels = np.repeat(np.arange(len(centers)), n_per)
    return np.vstack(points), labels


# -- fuse ----------------------------------------------------------------------


def test_fuse_concat_width():
    embeds = [np.ones((5, 64)), np.ones((5, 64)), np.ones((5, 64))]
    assert fuse(embeds, "concat").shape == (5, 192)


def test_fuse_mean_of_identical_views():
    rng = derive_rng(0, "fuse")
    z = rng.standard_normal((6, 4))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    assert np.allclose(fuse([z, z, z], "mean"), z, atol=1e-12)


def test_fuse_mean_antipodal_rows_stay_zero():
    a = np.array([[1.0, 0.0]])
    b = np.array([[-1.0, 0.0]])
    assert np.allclose(fuse([a, b], "mean"), [[0.0, 0.0]])


def test_fuse_mismatched_rows_rejected():
    with pytest.raises(ValueError):
        fuse([np.ones((3, 2)), np.ones((4, 2))])


# -- kmeans --------------------------------------------------------------------


def test_kmeans_recovers_planted_partition():
    rng = derive_rng(1, "km")
    x, truth = _blobs(rng, [(0.0, 0.0), (10.0, 10.0)], 50)
    model = kmeans_fit(x, 2, derive_rng(1, "fit"))
    assert ari(model.labels, truth.astype(str)) == 1.0


def test_kmeans_k1_is_column_means():
    rng = derive_rng(2, "km1")
    x = rng.standard_normal((30, 3))
    model = kmeans_fit(x, 1, derive_rng(2, "fit"))
    assert np.allclose(model.centroids[0], x.mean(axis=0))
    assert np.isclose(model.inertia, np.sum((x - x.mean(axis=0)) ** 2))


def test_kmeans_k_equals_n_zero_inertia():
    rng = derive_rng(3, "kmn")
    x = rng.standard_normal((8, 2))
    model = kmeans_fit(x, 8, derive_rng(3, "fit"))
    assert model.inertia < 1e-20


def test_kmeans_k_greater_than_n_rejected():
    with pytest.raises(ValueError):
        kmeans_fit(np.ones((3, 2)), 4, derive_rng(0, "x"))


def test_kmeans_deterministic_under_seed():
    rng = derive_rng(4, "kmd")
    x = rng.standard_normal((60, 4))
    a = kmeans_fit(x, 3, derive_rng(9, "fit"))
    b = kmeans_fit(x, 3, derive_rng(9, "fit"))
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.centroids, b.centroids)


def test_assign_consistent_with_fit_labels():
    rng = derive_rng(5, "kma")
    x, _ = _blobs(rng, [(0.0, 0.0), (6.0, 0.0), (0.0, 6.0)], 30)
    model = kmeans_fit(x, 3, derive_rng(5, "fit"))
    assert np.array_equal(assign(model, x), model.labels)


def test_assign_tie_goes_to_lowest_index():
    model = kmeans_fit(
        np.array([[0.0, 0.0], [0.0, 0.0], [2.0, 0.0], [2.0, 0.0]]),
        2,
        derive_rng(6, "fit"),
    )
    # order centroids so we know which index is which
    midpoint = np.array([[1.0, 0.0]])
    label = assign(model, midpoint)[0]
    # equidistant: must pick the lowest centroid index
    d = np.linalg.norm(model.centroids - midpoint, axis=1)
    assert np.isclose(d[0], d[1])
    assert label == 0


def test_assign_margin_robustness():
    rng = derive_rng(7, "kmm")
    x, _ = _blobs(rng, [(0.0, 0.0), (8.0, 0.0)], 40, scale=0.2)
    model = kmeans_fit(x, 2, derive_rng(7, "fit"))
    gap = np.linalg.norm(model.centroids[0] - model.centroids[1])
    base = assign(model, x)
    nudged = x + (0.4 * gap) * 0.5 * np.stack(
        [np.cos(rng.uniform(0, 2 * np.pi, len(x))), np.sin(rng.uniform(0, 2 * np.pi, len(x)))],
        axis=1,
    )
    # points near their centroid perturbed by < half the gap keep their label
    close = np.linalg.norm(x - model.centroids[base], axis=1) < 0.1 * gap
    assert np.array_equal(assign(model, nudged)[close], base[close])


def test_assign_dim_mismatch_rejected():
    model = kmeans_fit(np.ones((4, 3)), 1, derive_rng(8, "fit"))
    with pytest.raises(ValueError):
        assign(model, np.ones((2, 2)))


# -- cluster risk ----------------------------------------------------------------


def test_cluster_risk_orders_early_deaths_higher():
    t = np.array([0.1, 0.2, 0.15, 5.0, 6.0, 7.0])
    e = np.ones(6, dtype=int)
    labels = np.array([0, 0, 0, 1, 1, 1])
    risk_map, per_patient = cluster_risk(labels, BatchSurvival(t, e))
    assert risk_map.risk[0] > risk_map.risk[1]
    assert np.all(per_patient[:3] > per_patient[3:])


def test_cluster_risk_single_cluster_all_equal():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    e = np.ones(4, dtype=int)
    _, per_patient = cluster_risk(np.zeros(4, dtype=int), BatchSurvival(t, e))
    assert np.all(per_patient == per_patient[0])


def test_cluster_risk_empty_cluster_falls_back_to_cohort():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    e = np.ones(4, dtype=int)
    risk_map, _ = cluster_risk(np.zeros(4, dtype=int), BatchSurvival(t, e), k=2)
    assert risk_map.derivation[1] == "cohort_fallback"
    assert risk_map.risk[1] == risk_map.risk[0]  # cohort == only cluster here


def test_cluster_risk_planted_three_level_ordering():
    rng = derive_rng(9, "risk")
    n = 180
    labels = np.repeat([0, 1, 2], n // 3)
    rates = np.array([4.0, 1.0, 0.25])[labels]
    t = rng.exponential(1.0 / rates)
    e = np.ones(n, dtype=int)
    cens = rng.random(n) < 0.2
    t = np.where(cens, rng.random(n) * t, t)
    e[cens] = 0
    risk_map, _ = cluster_risk(labels, BatchSurvival(t, e))
    assert risk_map.risk[0] > risk_map.risk[1] > risk_map.risk[2]


def test_downstream_c_index_half_for_single_cluster():
    from survcl.survmetrics import c_index

    t = np.array([1.0, 2.0, 3.0, 4.0])
    e = np.ones(4, dtype=int)
    _, per_patient = cluster_risk(np.zeros(4, dtype=int), BatchSurvival(t, e))
    assert c_index(per_patient, t, e) == 0.5
