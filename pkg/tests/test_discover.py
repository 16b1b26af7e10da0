import itertools
import json

import numpy as np
import pytest
from scipy.cluster.hierarchy import fcluster, linkage as scipy_linkage
from scipy.optimize import linear_sum_assignment

from intentlab.discover import (PLACEHOLDER_METHODS, ClusterAssignment,
                                ClusterModel, agglomerative,
                                agglomerative_model, align_to_previous,
                                deep_aligned_train, estimate_k, fit_discovery,
                                hungarian, kmeans, load_clusters,
                                save_clusters, semi_seeded_kmeans)
from intentlab.featurize import matrix_from_array


def _blobs(n_per=20, d=3, sep=12.0, seed=0, n_classes=3):
    rng = np.random.default_rng(seed)
    parts = []
    for i in range(n_classes):
        pts = rng.normal(size=(n_per, d))
        pts[:, i % d] += sep
        parts.append(pts)
    x = np.vstack(parts)
    truth = np.repeat(np.arange(n_classes), n_per)
    return x, truth


def _same_partition(a, b):
    a, b = np.asarray(a), np.asarray(b)
    pairs_a = {tuple(sorted(np.flatnonzero(a == c).tolist())) for c in np.unique(a)}
    pairs_b = {tuple(sorted(np.flatnonzero(b == c).tolist())) for c in np.unique(b)}
    return pairs_a == pairs_b


# ClusterAssignment


def test_cluster_assignment_computes_sizes():
    ca = ClusterAssignment(np.array([0, 1, 1, 2]), 3)
    assert ca.sizes == (1, 2, 1)


def test_cluster_assignment_rejects_out_of_range_ids():
    with pytest.raises(ValueError):
        ClusterAssignment(np.array([0, 3]), 3)
    with pytest.raises(ValueError):
        ClusterAssignment(np.array([0, 1]), 2, sizes=(5, 5))


# k-means


def test_kmeans_recovers_separated_blobs():
    x, truth = _blobs()
    model, assignment = kmeans(x, 3, seed=0)
    assert _same_partition(assignment.cluster_ids, truth)
    assert assignment.sizes == (20, 20, 20)
    # inertia is the summed squared distance to the assigned centers
    d2 = ((x - model.centers[assignment.cluster_ids]) ** 2).sum()
    assert assignment.inertia == pytest.approx(d2, rel=1e-9)


def test_kmeans_is_deterministic_per_seed():
    x, _ = _blobs(seed=5)
    m1, a1 = kmeans(x, 4, seed=7)
    m2, a2 = kmeans(x, 4, seed=7)
    np.testing.assert_array_equal(a1.cluster_ids, a2.cluster_ids)
    np.testing.assert_array_equal(m1.centers, m2.centers)


def test_kmeans_k_one_and_k_n():
    x, _ = _blobs(n_per=4)
    _, a1 = kmeans(x, 1, seed=0)
    assert a1.cluster_ids.tolist() == [0] * 12
    model, _ = kmeans(x, 1, seed=0)
    np.testing.assert_allclose(model.centers[0], x.mean(axis=0))
    _, an = kmeans(x, x.shape[0], seed=0)
    assert an.inertia == pytest.approx(0.0, abs=1e-9)
    assert sorted(an.cluster_ids.tolist()) == list(range(x.shape[0]))


def test_kmeans_k_out_of_range():
    x, _ = _blobs(n_per=2)
    with pytest.raises(ValueError):
        kmeans(x, 0)
    with pytest.raises(ValueError):
        kmeans(x, x.shape[0] + 1)


def test_kmeans_repairs_empty_clusters():
    # only two distinct locations but k = 4: repair must keep all clusters alive
    x = np.vstack([np.tile([0.0, 0.0], (6, 1)), np.tile([5.0, 0.0], (6, 1))])
    _, assignment = kmeans(x, 4, seed=3)
    assert all(s >= 1 for s in assignment.sizes)


def test_kmeans_inertia_history_non_increasing():
    x, _ = _blobs(seed=2)
    model, _ = kmeans(x, 3, seed=2)
    hist = model.meta["inertia_history"]
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


# seeded k-means


def test_semi_seeded_with_no_labels_matches_kmeans_bitwise():
    x, _ = _blobs(seed=8)
    mk, ak = kmeans(x, 3, seed=4)
    ms, assn = semi_seeded_kmeans(x, [], [], 3, seed=4)
    np.testing.assert_array_equal(assn.cluster_ids, ak.cluster_ids)
    np.testing.assert_array_equal(ms.centers, mk.centers)
    assert assn.inertia == ak.inertia


def test_semi_seeded_recovers_blobs_with_partial_labels():
    x, truth = _blobs(n_classes=4, d=4)
    labeled_rows = [0, 1, 2, 20, 21, 22]
    labeled_labels = ["a", "a", "a", "b", "b", "b"]
    model, assignment = semi_seeded_kmeans(x, labeled_rows, labeled_labels, 4, seed=0)
    assert _same_partition(assignment.cluster_ids, truth)
    assert model.meta["seeded_classes"] == ["a", "b"]
    # seeded classes occupy the first preset slots: rows of class a share id 0
    assert set(assignment.cluster_ids[[0, 1, 2]]) == {0}
    assert set(assignment.cluster_ids[[20, 21, 22]]) == {1}


def test_semi_seeded_argument_errors():
    x, _ = _blobs(n_per=3)
    with pytest.raises(ValueError):
        semi_seeded_kmeans(x, [0, 1], ["a"], 3)
    with pytest.raises(ValueError):
        semi_seeded_kmeans(x, [0, 1], ["a", "b"], 1)  # k below labeled classes
    with pytest.raises(ValueError):
        semi_seeded_kmeans(x, [0], ["a"], x.shape[0] + 1)


# agglomerative


def test_agglomerative_hand_trace():
    # {0, 1} merge first (distance 1); the pair is 9.5 from the far point on
    # average linkage, so k = 2 separates {0, 1} from {10}
    x = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
    assert agglomerative(x, 2, "average").cluster_ids.tolist() == [0, 0, 1]
    assert agglomerative(x, 2, "complete").cluster_ids.tolist() == [0, 0, 1]
    assert agglomerative(x, 1, "average").cluster_ids.tolist() == [0, 0, 0]
    assert agglomerative(x, 3, "average").cluster_ids.tolist() == [0, 1, 2]


@pytest.mark.parametrize("link", ["average", "complete", "ward"])
@pytest.mark.parametrize("k", [2, 3, 5])
def test_agglomerative_matches_scipy_partitions(link, k):
    rng = np.random.default_rng(13)
    x = rng.normal(size=(40, 4))
    ours = agglomerative(x, k, link).cluster_ids
    z = scipy_linkage(x, method=link)
    theirs = fcluster(z, k, criterion="maxclust")
    assert _same_partition(ours, theirs)


def test_agglomerative_input_guards():
    x = np.zeros((3, 2))
    with pytest.raises(ValueError):
        agglomerative(x, 2, "single")
    with pytest.raises(ValueError):
        agglomerative(x, 0)
    with pytest.raises(ValueError):
        agglomerative(x, 4)
    with pytest.raises(ValueError, match="quadratic"):
        agglomerative(np.zeros((2001, 2)), 2)


def test_agglomerative_model_assigns_back_to_own_clusters():
    x, _ = _blobs()
    model, assignment = agglomerative_model(x, 3, "average")
    assert model.linkage == "average"
    np.testing.assert_array_equal(model.assign(x), assignment.cluster_ids)
    for c in range(3):
        rows = x[assignment.cluster_ids == c]
        np.testing.assert_allclose(model.centers[c], rows.mean(axis=0))


# optimal assignment


def test_hungarian_identity_and_known_case():
    eye_cost = 1.0 - np.eye(4)
    assign, total = hungarian(eye_cost)
    assert assign.tolist() == [0, 1, 2, 3] and total == 0.0
    assign, total = hungarian([[4, 1, 3], [2, 0, 5], [3, 2, 2]])
    assert assign.tolist() == [1, 0, 2] and total == 5.0


def test_hungarian_matches_brute_force():
    rng = np.random.default_rng(21)
    for _ in range(30):
        n = int(rng.integers(1, 7))
        cost = rng.normal(size=(n, n)) * 10  # negatives included
        assign, total = hungarian(cost)
        assert sorted(assign.tolist()) == list(range(n))
        best = min(sum(cost[i, p[i]] for i in range(n))
                   for p in itertools.permutations(range(n)))
        assert total == pytest.approx(best, abs=1e-9)


def test_hungarian_matches_scipy_cost():
    rng = np.random.default_rng(22)
    for _ in range(20):
        cost = rng.uniform(size=(8, 8))
        _, total = hungarian(cost)
        rows, cols = linear_sum_assignment(cost)
        assert total == pytest.approx(cost[rows, cols].sum(), abs=1e-9)


def test_hungarian_input_errors():
    with pytest.raises(ValueError):
        hungarian(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        hungarian(np.array([[np.nan, 1.0], [1.0, 0.0]]))


def test_align_to_previous_recovers_permutation():
    rng = np.random.default_rng(3)
    prev = rng.normal(size=(5, 4)) * 10
    perm = np.array([3, 0, 4, 1, 2])
    sigma = align_to_previous(prev[perm], prev)
    np.testing.assert_array_equal(sigma, perm)


# alignment-trained clustering


def test_deep_aligned_zero_epochs_reduces_to_kmeans():
    x, _ = _blobs(seed=9)
    model, assignment = deep_aligned_train(x, k=3, epochs=0, seed=6)
    _, plain = kmeans(x, 3, seed=6)
    np.testing.assert_array_equal(assignment.cluster_ids, plain.cluster_ids)
    assert model.method == "deep_aligned"
    assert model.meta == {"epochs": 0, "flip_rate": 0.0}
    assert model.encoder is None


def test_deep_aligned_zero_epochs_with_labels_reduces_to_seeded():
    x, _ = _blobs(seed=9)
    rows, labs = [0, 1, 20, 21], ["a", "a", "b", "b"]
    _, assignment = deep_aligned_train(x, rows, labs, k=3, epochs=0, seed=6)
    _, seeded = semi_seeded_kmeans(x, rows, labs, 3, seed=6)
    np.testing.assert_array_equal(assignment.cluster_ids, seeded.cluster_ids)


def test_deep_aligned_trains_and_stays_deterministic():
    x, truth = _blobs(n_per=15)
    model, assignment = deep_aligned_train(x, k=3, epochs=2, seed=0,
                                           hidden=16, repr_dim=8)
    assert model.encoder is not None
    assert model.meta["epochs"] == 2
    assert 0.0 <= model.meta["flip_rate"] <= 1.0
    assert assignment.cluster_ids.shape == (45,)
    _, again = deep_aligned_train(x, k=3, epochs=2, seed=0,
                                  hidden=16, repr_dim=8)
    np.testing.assert_array_equal(assignment.cluster_ids, again.cluster_ids)


def test_deep_aligned_k_out_of_range():
    x, _ = _blobs(n_per=2)
    with pytest.raises(ValueError):
        deep_aligned_train(x, k=0)
    with pytest.raises(ValueError):
        deep_aligned_train(x, k=x.shape[0] + 1)


# cluster-count estimation


def test_estimate_k_drops_small_clusters():
    x = np.vstack([np.tile([0.0, 0.0], (20, 1)), np.tile([10.0, 0.0], (20, 1)),
                   np.tile([0.0, 10.0], (20, 1))])
    assert estimate_k(x, 10, 0.5, seed=0) == 3


def test_estimate_k_keeps_balanced_clusters():
    x, _ = _blobs()
    assert estimate_k(x, 3, 0.5, seed=0) == 3


def test_estimate_k_range_error():
    with pytest.raises(ValueError):
        estimate_k(np.zeros((4, 2)), 5)


# dispatch and persistence


@pytest.mark.parametrize("method", PLACEHOLDER_METHODS)
def test_placeholder_methods_raise_not_implemented(method):
    x, _ = _blobs(n_per=3)
    with pytest.raises(NotImplementedError, match=f"registered but not implemented: {method}"):
        fit_discovery(method, x, 2)


def test_fit_discovery_unknown_method():
    with pytest.raises(ValueError):
        fit_discovery("mystery", np.zeros((4, 2)), 2)


def test_fit_discovery_dispatches_each_method():
    x, _ = _blobs(n_per=10)
    for method, params in [("kmeans", {}), ("agglomerative", {"linkage": "complete"}),
                           ("semi_seeded", {}), ("deep_aligned", {"discover_epochs": 0})]:
        model, assignment = fit_discovery(method, x, 3, seed=0, params=params)
        assert model.method == method
        assert assignment.cluster_ids.shape == (30,)


def test_cluster_model_save_load_roundtrip(tmp_path):
    x, _ = _blobs()
    model, assignment = kmeans(matrix_from_array(x), 3, seed=0)
    path = tmp_path / "clusters.json"
    save_clusters(model, path)
    loaded = load_clusters(path)
    np.testing.assert_array_equal(loaded.centers, model.centers)
    np.testing.assert_array_equal(loaded.assign(x), assignment.cluster_ids)
    assert loaded.meta == json.loads(json.dumps(model.meta))


def test_cluster_model_roundtrip_keeps_encoder(tmp_path):
    x, _ = _blobs(n_per=8)
    model, assignment = deep_aligned_train(x, k=2, epochs=1, seed=0,
                                           hidden=8, repr_dim=4)
    path = tmp_path / "deep.json"
    save_clusters(model, path)
    loaded = load_clusters(path)
    assert loaded.encoder is not None
    np.testing.assert_array_equal(loaded.assign(x), model.assign(x))


def test_load_clusters_rejects_foreign_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"format": "nope", "version": 1}))
    with pytest.raises(ValueError):
        load_clusters(bad)
    bad.write_text(json.dumps({"format": "intentlab-clusters", "version": 9}))
    with pytest.raises(ValueError):
        load_clusters(bad)


def test_cluster_model_without_centers_cannot_assign():
    model = ClusterModel("kmeans", 2)
    with pytest.raises(ValueError):
        model.assign(np.zeros((2, 2)))


def test_duplicated_rows_share_cluster_ids():
    x, _ = _blobs()
    doubled = np.vstack([x, x])
    _, assignment = kmeans(doubled, 3, seed=1)
    np.testing.assert_array_equal(assignment.cluster_ids[:60],
                                  assignment.cluster_ids[60:])
