"""Correlation reports between component weights and sleep parameters."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.special import betainc

from .errors import AlignmentError, DegenerateError, DimensionError, ParameterError
from .sleep import SleepSummary

SLEEP_PARAMETERS = ("sleep_time", "wake_time", "mid_sleep", "duration")
P_DISPLAY_FLOOR = 1e-4


@dataclass(frozen=True)
class CorrelationReport:
    x_label: str
    y_label: str
    r: float
    p_value: float
    n: int

    @property
    def p_display(self) -> str:
        return format_p(self.p_value)


@dataclass
class Hist2D:
    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray


def format_p(p: float) -> str:
    return f"<{P_DISPLAY_FLOOR:g}" if p < P_DISPLAY_FLOOR else f"{p:.4f}"


def t_two_sided_p(r: float, n: int) -> float:
    """Two-sided p-value of the t statistic r * sqrt((n-2) / (1-r^2)).

    Uses P(|T| > t) = I_x(df/2, 1/2) with x = df / (df + t^2).
    """
    df = n - 2
    if abs(r) >= 1.0:
        return 0.0
    t2 = r * r * df / (1.0 - r * r)
    return float(np.clip(betainc(df / 2.0, 0.5, df / (df + t2)), 0.0, 1.0))


def pearson(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError("pearson needs two 1-D vectors of equal length")
    n = len(x)
    if n < 3:
        raise ParameterError("pearson needs at least 3 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DegenerateError("constant input vector")
    r = float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))
    return r, t_two_sided_p(r, n)


def _report(x, y, xl, yl) -> CorrelationReport:
    r, p = pearson(x, y)
    return CorrelationReport(xl, yl, r, p, len(x))


def component_labels(K: int) -> list[str]:
    return [f"comp_{k + 1}" for k in range(K)]


def weight_correlations(W_normalized, labels: Sequence[str] | None = None) -> list[CorrelationReport]:
    """Pearson r and p for every pair of weight columns."""
    W = np.asarray(W_normalized, dtype=float)
    K = W.shape[1]
    if K < 2:
        raise ParameterError("need at least two components")
    labels = list(labels) if labels is not None else component_labels(K)
    return [_report(W[:, a], W[:, b], labels[a], labels[b]) for a, b in combinations(range(K), 2)]


def sleep_parameter_matrix(summaries: Sequence[SleepSummary]) -> np.ndarray:
    """n x 4 array: anchored sleep, wake and mid-sleep hours, mean duration."""
    return np.array([
        [s.sleep_anchored, s.wake_anchored, s.mid_sleep_anchored, s.mean_duration_hours]
        for s in summaries
    ])


def align_summaries(person_ids: Sequence[str], summaries: Sequence[SleepSummary]) -> list[SleepSummary]:
    by_id = {s.person_id: s for s in summaries}
    missing = [p for p in person_ids if p not in by_id]
    extra = sorted(set(by_id) - set(person_ids))
    if missing or extra:
        raise AlignmentError(
            f"person sets differ: {len(missing)} only in weights {missing[:5]}, "
            f"{len(extra)} only in sleep summaries {extra[:5]}"
        )
    return [by_id[p] for p in person_ids]


def sleep_weight_correlations(
    W_normalized,
    summaries: Sequence[SleepSummary],
    person_ids: Sequence[str] | None = None,
    labels: Sequence[str] | None = None,
) -> list[list[CorrelationReport]]:
    """K x 4 grid of reports: component weight vs sleep parameter.

    With ``person_ids`` the summaries are matched to the rows of W by id;
    otherwise they must already be in row order and of equal count.
    """
    W = np.asarray(W_normalized, dtype=float)
    if person_ids is not None:
        if len(person_ids) != W.shape[0]:
            raise AlignmentError("person_ids do not match the rows of W")
        summaries = align_summaries(person_ids, summaries)
    elif len(summaries) != W.shape[0]:
        raise AlignmentError(f"{W.shape[0]} weight rows but {len(summaries)} sleep summaries")
    labels = list(labels) if labels is not None else component_labels(W.shape[1])
    params = sleep_parameter_matrix(summaries)
    return [
        [_report(W[:, k], params[:, j], labels[k], name) for j, name in enumerate(SLEEP_PARAMETERS)]
        for k in range(W.shape[1])
    ]


def hist2d(x, y, nbins: int = 10) -> Hist2D:
    """Equal-width 2-D histogram over the data range; the last edge is inclusive."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 1 or len(x) != len(y):
        raise DimensionError("hist2d needs equally long, non-empty inputs")
    if nbins < 1:
        raise ParameterError("nbins must be >= 1")

    def edges(v):
        lo, hi = float(v.min()), float(v.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        return np.linspace(lo, hi, nbins + 1)

    xe, ye = edges(x), edges(y)
    counts, _, _ = np.histogram2d(x, y, bins=[xe, ye])
    return Hist2D(xe, ye, counts.astype(np.int64))
