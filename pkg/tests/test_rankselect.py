import numpy as np
import pytest
from scipy.cluster.hierarchy import cophenet, linkage
from scipy.spatial.distance import squareform

from rhythmnmf.errors import DegenerateError, DimensionError, ParameterError
from rhythmnmf import rankselect
from rhythmnmf.nmf import Factorization, SolverConfig
from rhythmnmf.rankselect import (
    average_linkage_cophenetic,
    connectivity,
    consensus,
    cophenetic_coefficient,
    rank_seeds,
    rank_sweep,
)


def random_distances(rng, n):
    pts = rng.random((n, 3))
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    return D


def test_connectivity_first_max_wins():
    W = np.array([[0.9, 0.1], [0.5, 0.5], [0.2, 0.8]])
    C = connectivity(W)
    np.testing.assert_array_equal(C, [[1, 1, 0], [1, 1, 0], [0, 0, 1]])
    assert C.dtype == np.int64


def test_consensus_mean_and_errors():
    a = np.array([[1, 0], [0, 1]])
    b = np.array([[1, 1], [1, 1]])
    np.testing.assert_array_equal(consensus([a, b, b]), [[1, 2 / 3], [2 / 3, 1]])
    with pytest.raises(ParameterError):
        consensus([a])
    with pytest.raises(DimensionError):
        consensus([a, np.ones((3, 3), dtype=int)])


def test_consensus_order_independent(rng):
    mats = [connectivity(rng.random((12, 3))) for _ in range(7)]
    np.testing.assert_array_equal(consensus(mats), consensus(mats[::-1]))


def test_upgma_matches_scipy(rng):
    for n in (3, 5, 12, 30):
        D = random_distances(rng, n)
        ours = average_linkage_cophenetic(D)
        ref = squareform(cophenet(linkage(squareform(D, checks=False), method="average")))
        np.testing.assert_allclose(ours, ref, atol=1e-12)


def test_upgma_hand_computed():
    # a-b merge at 1; c-d at 2; then {a,b}-{c,d} at mean(4,6,5,7) = 5.5
    D = np.array([
        [0, 1, 4, 6],
        [1, 0, 5, 7],
        [4, 5, 0, 2],
        [6, 7, 2, 0],
    ], dtype=float)
    expected = np.array([
        [0, 1, 5.5, 5.5],
        [1, 0, 5.5, 5.5],
        [5.5, 5.5, 0, 2],
        [5.5, 5.5, 2, 0],
    ])
    np.testing.assert_array_equal(average_linkage_cophenetic(D), expected)


def test_upgma_ties_resolved_by_index():
    D = np.ones((4, 4)) - np.eye(4)
    D[0, 1] = D[1, 0] = 0.5
    D[2, 3] = D[3, 2] = 0.5
    coph = average_linkage_cophenetic(D)
    assert coph[0, 1] == 0.5 and coph[2, 3] == 0.5
    assert coph[0, 2] == 1.0


def test_coefficient_perfect_blocks():
    labels = np.array([0, 0, 0, 1, 1, 2, 2, 2])
    C = (labels[:, None] == labels[None]).astype(float)
    assert cophenetic_coefficient(C) == pytest.approx(1.0)


def test_coefficient_in_range(rng):
    mats = [connectivity(rng.random((15, 3))) for _ in range(10)]
    c = cophenetic_coefficient(consensus(mats))
    assert -1.0 <= c <= 1.0


def test_coefficient_degenerate():
    with pytest.raises(DegenerateError):
        cophenetic_coefficient(np.ones((5, 5)))
    with pytest.raises(ParameterError):
        cophenetic_coefficient(np.eye(2))


def test_rank_seeds():
    assert rank_seeds(3, 3, base_seed=5) == [3_000_005, 3_000_006, 3_000_007]


def test_sweep_recovers_clear_blocks(rng):
    H = np.zeros((30, 3))
    for k in range(3):
        H[10 * k:10 * (k + 1), k] = 1.0
    W = np.zeros((45, 3))
    for i in range(45):
        W[i, i % 3] = 1.0
        W[i, (i + 1) % 3] = 0.3 * rng.random()
    X = W @ H.T + 0.01 * rng.random((45, 30))
    sweep = rank_sweep(X, [2, 3, 4], runs_per_k=10, config=SolverConfig(max_iterations=200))
    assert sweep.selected_k == 3
    assert [k for k, _ in sweep.curve] == [2, 3, 4]


def test_sweep_range_validation(rng):
    X = rng.random((5, 6))
    with pytest.raises(ParameterError):
        rank_sweep(X, [1, 2])
    with pytest.raises(ParameterError):
        rank_sweep(X, [2, 6])
    with pytest.raises(ParameterError):
        rank_sweep(X, [])


def test_degenerate_consensus_is_flagged(monkeypatch):
    # every run puts every person on the same component: constant consensus
    def same_runs(X, K, seeds, config, n_jobs=1):
        W = np.tile([1.0, 0.0], (len(X), 1))
        return [Factorization(W, np.ones((X.shape[1], 2)), 0.0, s, 1) for s in seeds]

    monkeypatch.setattr(rankselect, "run_seeds", same_runs)
    res = rankselect.consensus_for_rank(np.ones((6, 4)), 2, runs_per_k=3)
    assert res.degenerate
    assert res.cophenetic == 1.0
