import numpy as np
import pytest

from ureid.clustering import (OUTLIER, DbscanParams, PseudoLabeling, clustering_accuracy,
                              dbscan)
from ureid.errors import DimMismatchError, InvalidConfigError, NoClustersError
from ureid.numerics import pairwise_similarity


def dbscan_naive(dist, eps, min_samples):
    """Independent O(n^3) reference.

    Cores by explicit counting; core components by union-find over core pairs
    within eps; borders join the component holding the smallest-index core
    among their in-range cores (equivalent to ascending-seed first-reach);
    final ids ordered by smallest member index.
    """
    n = dist.shape[0]
    core = []
    for i in range(n):
        count = sum(1 for j in range(n) if dist[i, j] < eps)
        core.append(count >= min_samples)

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(n):
            if core[i] and core[j] and dist[i, j] < eps:
                parent[find(i)] = find(j)

    assignment = {}
    for i in range(n):
        if core[i]:
            assignment[i] = find(i)
    for i in range(n):
        if core[i]:
            continue
        in_range_cores = [j for j in range(n) if core[j] and dist[i, j] < eps]
        if in_range_cores:
            # first BFS to arrive started from the component's smallest core
            best = min(in_range_cores, key=lambda j: min(
                k for k in range(n) if core[k] and find(k) == find(j)))
            assignment[i] = find(best)

    labels = np.full(n, OUTLIER, dtype=np.int64)
    roots = []
    for i in range(n):
        if i in assignment and assignment[i] not in roots:
            roots.append(assignment[i])
    for i, root in enumerate(roots):
        for j in range(n):
            if assignment.get(j) == root:
                labels[j] = i
    return labels, len(roots)


def random_distance_matrix(rng, n):
    feats = rng.standard_normal((n, 3))
    feats /= np.linalg.norm(feats, axis=1, keepdims=True)
    return 1.0 - pairwise_similarity(feats)


def test_matches_naive_oracle_across_regimes():
    rng = np.random.default_rng(0)
    for trial in range(60):
        n = int(rng.integers(2, 30))
        dist = random_distance_matrix(rng, n)
        eps = float(rng.uniform(0.05, 1.5))
        min_samples = int(rng.integers(1, 6))
        got = dbscan(dist, DbscanParams(eps=eps, min_samples=min_samples))
        want_labels, want_k = dbscan_naive(dist, eps, min_samples)
        assert got.num_clusters == want_k
        assert np.array_equal(got.labels, want_labels)


def test_three_point_chain_example():
    # 0-1 close, 1-2 close, 0-2 far: with min_samples=2 all three chain together
    dist = np.array([
        [0.0, 0.3, 0.8],
        [0.3, 0.0, 0.3],
        [0.8, 0.3, 0.0],
    ])
    got = dbscan(dist, DbscanParams(eps=0.5, min_samples=2))
    assert np.array_equal(got.labels, [0, 0, 0])
    assert got.num_clusters == 1
    # min_samples=3 leaves only the middle point core; ends become border
    got3 = dbscan(dist, DbscanParams(eps=0.5, min_samples=3))
    assert np.array_equal(got3.labels, [0, 0, 0])
    # tighter eps: nobody is core
    tight = dbscan(dist, DbscanParams(eps=0.2, min_samples=2))
    assert np.array_equal(tight.labels, [OUTLIER] * 3)
    assert tight.num_clusters == 0


def test_strict_threshold_boundary():
    # a distance exactly equal to eps is NOT a neighbor
    dist = np.array([[0.0, 0.5], [0.5, 0.0]])
    got = dbscan(dist, DbscanParams(eps=0.5, min_samples=2))
    assert np.array_equal(got.labels, [OUTLIER, OUTLIER])
    got = dbscan(dist, DbscanParams(eps=0.5000001, min_samples=2))
    assert np.array_equal(got.labels, [0, 0])


def test_self_inclusive_neighborhoods():
    # min_samples=1 makes every point core via its own zero self-distance
    dist = np.full((4, 4), 9.0)
    np.fill_diagonal(dist, 0.0)
    got = dbscan(dist, DbscanParams(eps=0.5, min_samples=1))
    assert np.array_equal(got.labels, [0, 1, 2, 3])
    assert got.num_clusters == 4


def test_labels_ordered_by_smallest_member():
    # two separated groups; the group containing index 0 must get label 0
    dist = np.full((6, 6), 9.0)
    np.fill_diagonal(dist, 0.0)
    for a, b in [(0, 4), (4, 0), (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2)]:
        dist[a, b] = 0.1
    got = dbscan(dist, DbscanParams(eps=0.2, min_samples=2))
    assert got.labels[0] == 0 and got.labels[4] == 0
    assert got.labels[1] == got.labels[2] == got.labels[3] == 1
    assert got.labels[5] == OUTLIER


def test_growing_eps_absorbs_more_points():
    rng = np.random.default_rng(1)
    dist = random_distance_matrix(rng, 40)
    counts = []
    for eps in (0.1, 0.4, 0.8, 1.2, 1.9):
        counts.append(dbscan(dist, DbscanParams(eps=eps, min_samples=3)).num_clustered)
    assert counts == sorted(counts)
    assert counts[-1] == 40  # eps > max distance clusters everything


def test_param_validation():
    dist = np.zeros((2, 2))
    with pytest.raises(InvalidConfigError):
        dbscan(dist, DbscanParams(eps=0.0, min_samples=2))
    with pytest.raises(InvalidConfigError):
        dbscan(dist, DbscanParams(eps=0.5, min_samples=0))
    with pytest.raises(DimMismatchError):
        dbscan(np.zeros((2, 3)), DbscanParams())


def test_labeling_accessors():
    lab = PseudoLabeling(np.array([0, OUTLIER, 1, 0, OUTLIER]), 2)
    assert np.array_equal(lab.members(0), [0, 3])
    assert np.array_equal(lab.members(1), [2])
    assert np.array_equal(lab.outliers(), [1, 4])
    assert lab.num_clustered == 3
    with pytest.raises(IndexError):
        lab.members(2)


def test_accuracy_frozen_example():
    # cluster 0 majority 2/3, cluster 1 pure: mean is 5/6
    lab = PseudoLabeling(np.array([0, 0, 0, 1, 1, OUTLIER]), 2)
    ids = np.array([7, 7, 9, 4, 4, 7])
    assert clustering_accuracy(lab, ids) == pytest.approx(5.0 / 6.0, abs=1e-15)


def test_accuracy_perfect_and_uniform():
    lab = PseudoLabeling(np.array([0, 0, 1, 1]), 2)
    assert clustering_accuracy(lab, np.array([3, 3, 8, 8])) == 1.0
    # all-distinct identities in one cluster of 4: majority fraction 1/4
    lab1 = PseudoLabeling(np.array([0, 0, 0, 0]), 1)
    assert clustering_accuracy(lab1, np.array([0, 1, 2, 3])) == 0.25


def test_accuracy_unweighted_over_clusters():
    # a large impure cluster and a tiny pure one average with equal weight
    lab = PseudoLabeling(np.array([0] * 10 + [1]), 2)
    ids = np.array([5] * 5 + [6] * 5 + [2])
    assert clustering_accuracy(lab, ids) == pytest.approx((0.5 + 1.0) / 2, abs=1e-15)


def test_accuracy_ignores_outliers():
    lab = PseudoLabeling(np.array([0, 0, OUTLIER, OUTLIER]), 1)
    ids = np.array([1, 1, 2, 3])
    assert clustering_accuracy(lab, ids) == 1.0


def test_accuracy_errors():
    with pytest.raises(NoClustersError):
        clustering_accuracy(PseudoLabeling(np.array([OUTLIER]), 0), np.array([1]))
    with pytest.raises(DimMismatchError):
        clustering_accuracy(PseudoLabeling(np.array([0]), 1), np.array([1, 2]))
