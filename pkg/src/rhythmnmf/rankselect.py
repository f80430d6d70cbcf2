"""Choosing the number of components by consensus-clustering stability.

Each NMF run assigns every person to the component with the largest weight.
Runs are summarized by a consensus matrix (fraction of runs in which two
persons share a component) and scored by the cophenetic correlation of an
average-linkage dendrogram built on ``1 - consensus``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateError, DimensionError, ParameterError
from .nmf import Factorization, SolverConfig, run_seeds

logger = logging.getLogger(__name__)

RANK_SEED_STRIDE = 10**6


@dataclass
class ConsensusResult:
    K: int
    consensus: np.ndarray
    cophenetic: float
    runs: int
    degenerate: bool = False


@dataclass
class RankSweep:
    results: list[ConsensusResult]
    selected_k: int

    @property
    def curve(self) -> list[tuple[int, float]]:
        return [(r.K, r.cophenetic) for r in self.results]


def connectivity(f: Factorization | np.ndarray) -> np.ndarray:
    """Binary N x N matrix: 1 where two persons share their argmax component."""
    W = f.W if isinstance(f, Factorization) else np.asarray(f)
    labels = np.argmax(W, axis=1)  # first maximum wins ties
    return (labels[:, None] == labels[None, :]).astype(np.int64)


def consensus(connectivities: Sequence[np.ndarray]) -> np.ndarray:
    mats = list(connectivities)
    if len(mats) < 2:
        raise ParameterError("consensus needs at least two connectivity matrices")
    shape = mats[0].shape
    for c in mats[1:]:
        if c.shape != shape:
            raise DimensionError(f"connectivity shapes differ: {shape} vs {c.shape}")
    # integer accumulation keeps the mean independent of summation order
    stacked = np.stack(mats)
    if np.issubdtype(stacked.dtype, np.integer) or np.issubdtype(stacked.dtype, np.bool_):
        return stacked.sum(axis=0, dtype=np.int64) / len(mats)
    return stacked.mean(axis=0)


def average_linkage_cophenetic(D: np.ndarray) -> np.ndarray:
    """Cophenetic distances of the average-linkage (UPGMA) dendrogram of D.

    Entry (i, j) is the height at which i and j first join a common cluster.
    Among equally close cluster pairs the one with the lowest indices merges
    first, which keeps the result reproducible when distances tie.
    """
    D = np.array(D, dtype=float)
    n = D.shape[0]
    coph = np.zeros((n, n))
    dist = D.copy()
    np.fill_diagonal(dist, np.inf)
    sizes = np.ones(n)
    members = [[i] for i in range(n)]
    for _ in range(n - 1):
        flat = int(np.argmin(dist))
        a, b = divmod(flat, n)
        if a > b:
            a, b = b, a
        height = dist[a, b]
        ia, ib = members[a], members[b]
        coph[np.ix_(ia, ib)] = height
        coph[np.ix_(ib, ia)] = height
        merged = (sizes[a] * dist[a] + sizes[b] * dist[b]) / (sizes[a] + sizes[b])
        dist[a, :] = merged
        dist[:, a] = merged
        dist[a, a] = np.inf
        dist[b, :] = np.inf
        dist[:, b] = np.inf
        sizes[a] += sizes[b]
        members[a] = ia + ib
        members[b] = []
    return coph


def cophenetic_coefficient(consensus_matrix: np.ndarray) -> float:
    """Pearson correlation of consensus distances with UPGMA cophenetic distances.

    Raises DegenerateError when the off-diagonal distances are all equal.
    """
    C = np.asarray(consensus_matrix, dtype=float)
    n = C.shape[0]
    if C.ndim != 2 or C.shape[1] != n:
        raise DimensionError("consensus matrix must be square")
    if n < 3:
        raise ParameterError("cophenetic correlation needs at least 3 items")
    D = 1.0 - C
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    upper = np.triu_indices(n, k=1)
    d = D[upper]
    if np.ptp(d) == 0:
        raise DegenerateError("consensus distances are constant")
    c = average_linkage_cophenetic(D)[upper]
    d = d - d.mean()
    c = c - c.mean()
    return float(np.clip((d @ c) / np.sqrt((d @ d) * (c @ c)), -1.0, 1.0))


def rank_seeds(K: int, runs: int, base_seed: int = 0) -> list[int]:
    return [base_seed + K * RANK_SEED_STRIDE + r for r in range(runs)]


def consensus_for_rank(
    X: np.ndarray,
    K: int,
    runs_per_k: int = 50,
    config: SolverConfig = SolverConfig(),
    base_seed: int = 0,
    n_jobs: int = 1,
) -> ConsensusResult:
    if runs_per_k < 2:
        raise ParameterError("runs_per_k must be >= 2")
    seeds = rank_seeds(K, runs_per_k, base_seed)
    facs = run_seeds(X, K, seeds, config, n_jobs=n_jobs)
    cons = consensus([connectivity(f) for f in facs])
    try:
        coeff, degenerate = cophenetic_coefficient(cons), False
    except DegenerateError:
        # every pair agrees in every run: perfectly stable
        logger.warning("K=%d: constant consensus distances, coefficient set to 1.0", K)
        coeff, degenerate = 1.0, True
    return ConsensusResult(K=K, consensus=cons, cophenetic=coeff, runs=runs_per_k,
                           degenerate=degenerate)


def rank_sweep(
    X: np.ndarray,
    k_range: Iterable[int],
    runs_per_k: int = 50,
    config: SolverConfig = SolverConfig(),
    base_seed: int = 0,
    n_jobs: int = 1,
) -> RankSweep:
    """Cophenetic coefficient for every K; the maximum selects K (ties: smaller K)."""
    X = np.asarray(X, dtype=float)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ParameterError("empty rank range")
    upper = min(X.shape)
    if ks[0] < 2 or ks[-1] > upper:
        raise ParameterError(f"rank range {ks} outside [2, {upper}]")
    results = []
    for K in ks:
        res = consensus_for_rank(X, K, runs_per_k, config, base_seed, n_jobs)
        logger.info("K=%d cophenetic=%.6f", K, res.cophenetic)
        results.append(res)
    best = max(results, key=lambda r: (r.cophenetic, -r.K))
    return RankSweep(results=results, selected_k=best.K)
