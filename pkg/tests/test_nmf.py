import numpy as np
import pytest

from rhythmnmf.errors import DegenerateError, DimensionError, DomainError, ParameterError
from rhythmnmf.nmf import (
    SolverConfig,
    best_of,
    canonical_scaling,
    frobenius_error,
    hals_factorize,
    initial_factors,
    multi_restart,
    normalize_weights,
    reconstruct,
    run_seeds,
)


def brute_force_error(X, W, H):
    total = 0.0
    for i in range(X.shape[0]):
        for j in range(X.shape[1]):
            approx = sum(W[i, k] * H[j, k] for k in range(W.shape[1]))
            total += (X[i, j] - approx) ** 2
    return 0.5 * total


def rank1_optimum(X):
    s = np.linalg.svd(X, compute_uv=False)
    return 0.5 * (np.sum(X * X) - s[0] ** 2)


def test_frobenius_matches_double_loop(rng):
    for _ in range(5):
        n, m, k = rng.integers(1, 9, size=3)
        X, W, H = rng.random((n, m)), rng.random((n, k)), rng.random((m, k))
        assert frobenius_error(X, W, H) == pytest.approx(brute_force_error(X, W, H), abs=1e-12)


def test_frobenius_shape_mismatch():
    with pytest.raises(DimensionError):
        frobenius_error(np.ones((3, 4)), np.ones((3, 2)), np.ones((5, 2)))
    with pytest.raises(DimensionError):
        frobenius_error(np.ones((3, 4)), np.ones((3, 2)), np.ones((4, 3)))


def test_reconstruct_is_sum_of_rank_ones(rng):
    W, H = rng.random((6, 3)), rng.random((10, 3))
    f = hals_factorize(rng.random((6, 10)), 3)
    f.W, f.H = W, H
    expected = sum(np.outer(W[:, k], H[:, k]) for k in range(3))
    np.testing.assert_allclose(reconstruct(f), expected, atol=1e-14)


def test_initial_factors_deterministic_and_scaled():
    X = np.full((30, 40), 4.0)
    W1, H1 = initial_factors(X, 2, seed=9)
    W2, H2 = initial_factors(X, 2, seed=9)
    np.testing.assert_array_equal(W1, W2)
    np.testing.assert_array_equal(H1, H2)
    assert W1.max() <= np.sqrt(2.0) and H1.min() >= 0
    W3, _ = initial_factors(X, 2, seed=10)
    assert not np.array_equal(W1, W3)


def test_descent_and_nonnegativity(rng):
    X = rng.random((20, 30))
    f = hals_factorize(X, 4, seed=1, config=SolverConfig(max_iterations=300, relative_tolerance=1e-12))
    hist = np.array(f.error_history)
    assert np.all(np.diff(hist) <= 1e-10)
    assert f.W.min() >= 0 and f.H.min() >= 0
    assert f.final_error == pytest.approx(hist[-1], rel=1e-12)
    assert len(hist) == f.iterations_run + 1


def test_canonical_scaling():
    W = np.array([[1.0, 2.0], [3.0, 0.0]])
    H = np.array([[2.0, 1.0], [2.0, 3.0]])
    W2, H2 = canonical_scaling(W, H)
    np.testing.assert_allclose(H2.sum(axis=0), 1.0)
    np.testing.assert_allclose(W2 @ H2.T, W @ H.T)


def test_exact_recovery_of_low_rank(rng):
    W0 = rng.random((40, 3))
    H0 = rng.random((25, 3))
    X = W0 @ H0.T
    cfg = SolverConfig(max_iterations=3000, relative_tolerance=1e-12, restart_seeds=range(5))
    f = multi_restart(X, 3, cfg)
    assert f.final_error < 1e-6 * 0.5 * np.sum(X * X)


def test_rank_one_matches_svd(rng):
    X = rng.random((15, 12))
    f = multi_restart(X, 1, SolverConfig(restart_seeds=range(3), relative_tolerance=1e-12))
    assert f.final_error == pytest.approx(rank1_optimum(X), rel=1e-6)


def test_zero_matrix():
    f = hals_factorize(np.zeros((4, 5)), 2)
    # factors sit on the epsilon floor
    assert f.final_error < 1e-40
    assert np.all(np.isfinite(f.W)) and np.all(np.isfinite(f.H))


@pytest.mark.parametrize("X,K,err", [
    (-np.ones((3, 3)), 1, DomainError),
    (np.full((3, 3), np.nan), 1, DomainError),
    (np.ones((3, 3)), 0, ParameterError),
    (np.ones((3, 5)), 4, ParameterError),
    (np.ones(5), 1, DimensionError),
])
def test_invalid_input(X, K, err):
    with pytest.raises(err):
        hals_factorize(X, K)


def test_solver_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(max_iterations=0)
    with pytest.raises(ParameterError):
        SolverConfig(relative_tolerance=0)
    with pytest.raises(ParameterError):
        SolverConfig(epsilon_floor=-1)
    with pytest.raises(ParameterError):
        multi_restart(np.ones((3, 3)), 1, SolverConfig(restart_seeds=()))


def test_seed_reproducible_and_parallel_identical(rng):
    X = rng.random((25, 30))
    cfg = SolverConfig(max_iterations=50)
    serial = run_seeds(X, 3, [4, 2, 9], cfg)
    again = run_seeds(X, 3, [4, 2, 9], cfg)
    parallel = run_seeds(X, 3, [4, 2, 9], cfg, n_jobs=2)
    assert [f.seed for f in parallel] == [4, 2, 9]
    for a, b, c in zip(serial, again, parallel):
        np.testing.assert_array_equal(a.W, b.W)
        np.testing.assert_array_equal(a.W, c.W)
        np.testing.assert_array_equal(a.H, c.H)
        assert a.error_history == c.error_history


def test_best_of_tie_breaks_on_seed(rng):
    X = rng.random((5, 6))
    runs = run_seeds(X, 1, [7, 3, 5], SolverConfig(max_iterations=5))
    for f in runs:
        f.final_error = 1.0
    assert best_of(runs).seed == 3
    runs[2].final_error = 0.5
    assert best_of(runs).seed == 5


def test_normalize_weights():
    W = np.array([[1.0, 3.0], [2.0, 2.0]])
    np.testing.assert_allclose(normalize_weights(W), [[0.25, 0.75], [0.5, 0.5]])
    with pytest.raises(DegenerateError, match="p2"):
        normalize_weights(np.array([[1.0, 0.0], [0.0, 0.0]]), ["p1", "p2"])
