"""Non-negative matrix factorization X ~ W H^T by hierarchical alternating least squares.

X is N x M (persons x hour-of-week bins), W is N x K (per-person weights) and
H is M x K (components, one per column). The objective is

    E = 1/2 * sum_ij (x_ij - sum_k w_ik h_jk)^2
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateError, DimensionError, DomainError, ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 500
    relative_tolerance: float = 1e-6
    restart_seeds: tuple[int, ...] = tuple(range(1000))
    epsilon_floor: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if not self.relative_tolerance > 0:
            raise ParameterError("relative_tolerance must be > 0")
        if self.epsilon_floor < 0:
            raise ParameterError("epsilon_floor must be >= 0")
        object.__setattr__(self, "restart_seeds", tuple(int(s) for s in self.restart_seeds))


@dataclass
class Factorization:
    W: np.ndarray
    H: np.ndarray
    final_error: float
    seed: int
    iterations_run: int
    # error before the first sweep followed by the error after every sweep
    error_history: list[float] = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.W.shape[1]


def _check_shapes(X, W, H):
    if X.ndim != 2 or W.ndim != 2 or H.ndim != 2:
        raise DimensionError("X, W and H must be 2-D")
    n, m = X.shape
    if W.shape[0] != n or H.shape[0] != m or W.shape[1] != H.shape[1]:
        raise DimensionError(
            f"shapes do not conform: X {X.shape}, W {W.shape}, H {H.shape}"
        )


def frobenius_error(X, W, H) -> float:
    """Half the squared Frobenius norm of X - W H^T."""
    X, W, H = (np.asarray(a, dtype=float) for a in (X, W, H))
    _check_shapes(X, W, H)
    return _error(X, W, H)


def _error(X, W, H) -> float:
    residual = X - W @ H.T
    return 0.5 * float(np.vdot(residual, residual))


def reconstruct(f: Factorization) -> np.ndarray:
    """W H^T, i.e. the sum of the K rank-one matrices w_k h_k^T."""
    return f.W @ f.H.T


def initial_factors(X: np.ndarray, K: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform(0, 1) entries scaled by sqrt(mean(X) / K).

    Drawn from a Philox (counter-based) generator keyed by ``seed``: W first,
    then H.
    """
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    n, m = X.shape
    scale = np.sqrt(X.mean() / K)
    W = scale * rng.random((n, K))
    H = scale * rng.random((m, K))
    return W, H


def _validate(X, K: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise DomainError("X contains non-finite entries")
    if np.any(X < 0):
        raise DomainError("X contains negative entries")
    n, m = X.shape
    if not 1 <= K <= min(n, m):
        raise ParameterError(f"K={K} outside [1, min(N, M)] = [1, {min(n, m)}]")
    return X


def _sweep(F: np.ndarray, XG: np.ndarray, G: np.ndarray, floor: float) -> None:
    """One HALS pass over the columns of F (in place).

    For column j: f_j <- max(floor, f_j + (XG_j - F G_j) / G_jj), where XG is
    the data times the other factor and G the other factor's Gram matrix.
    """
    for j in range(F.shape[1]):
        gjj = G[j, j]
        if gjj <= 0:
            continue
        col = F[:, j] + (XG[:, j] - F @ G[:, j]) / gjj
        np.maximum(col, floor, out=col)
        F[:, j] = col


def hals_factorize(X, K: int, seed: int = 0, config: SolverConfig = SolverConfig()) -> Factorization:
    """Factorize X with HALS from a seeded random start.

    Each iteration updates the columns of H (in index order) and then the
    columns of W. Stops when the relative error change drops below
    ``config.relative_tolerance`` or after ``config.max_iterations`` sweeps.
    """
    X = _validate(X, K)
    floor = config.epsilon_floor
    W, H = initial_factors(X, K, seed)
    np.maximum(W, floor, out=W)
    np.maximum(H, floor, out=H)
    Xt = X.T

    err = _error(X, W, H)
    history = [err]
    it = 0
    while it < config.max_iterations:
        it += 1
        _sweep(H, Xt @ W, W.T @ W, floor)
        _sweep(W, X @ H, H.T @ H, floor)
        new_err = _error(X, W, H)
        history.append(new_err)
        change = abs(err - new_err) / err if err > 0 else 0.0
        err = new_err
        if change < config.relative_tolerance:
            break
    W, H = canonical_scaling(W, H)
    err = _error(X, W, H)
    return Factorization(W=W, H=H, final_error=err, seed=int(seed), iterations_run=it,
                         error_history=history)


def canonical_scaling(W: np.ndarray, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rescale so every column of H sums to one; W H^T is unchanged.

    Fixes the per-component scale freedom of NMF, so the weights w_ik are the
    share of person i's activity carried by component k and their argmax is
    comparable across runs.
    """
    scale = H.sum(axis=0)
    scale[scale <= 0] = 1.0
    return W * scale, H / scale


def _run(args):
    X, K, seed, config = args
    return hals_factorize(X, K, seed, config)


def run_seeds(X, K: int, seeds: Sequence[int], config: SolverConfig, n_jobs: int = 1) -> list[Factorization]:
    """Independent HALS runs, returned in the order of ``seeds``."""
    X = _validate(X, K)
    tasks = [(X, K, int(s), config) for s in seeds]
    if n_jobs is None or n_jobs <= 1 or len(tasks) <= 1:
        return [_run(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run, tasks, chunksize=max(1, len(tasks) // (4 * n_jobs))))


def best_of(runs: Sequence[Factorization]) -> Factorization:
    """Smallest final error; ties go to the smallest seed."""
    return min(runs, key=lambda f: (f.final_error, f.seed))


def multi_restart(X, K: int, config: SolverConfig = SolverConfig(), n_jobs: int = 1) -> Factorization:
    if not config.restart_seeds:
        raise ParameterError("restart_seeds is empty")
    runs = run_seeds(X, K, config.restart_seeds, config, n_jobs=n_jobs)
    best = best_of(runs)
    logger.debug("best of %d restarts: seed %d, error %.6g", len(runs), best.seed, best.final_error)
    return best


def normalize_weights(f: Factorization | np.ndarray, person_ids: Sequence[str] | None = None) -> np.ndarray:
    """Row-normalized copy of W (each person's weights sum to one)."""
    W = f.W if isinstance(f, Factorization) else np.asarray(f, dtype=float)
    totals = W.sum(axis=1)
    bad = np.flatnonzero(~(totals > 0))
    if len(bad):
        labels = [person_ids[i] for i in bad] if person_ids is not None else bad.tolist()
        raise DegenerateError(f"all-zero weight rows for persons: {labels}")
    return W / totals[:, None]
