"""Synthetic screen-event populations with known components, weights and sleep.

Each person's expected weekly activity is a weighted mix of component
templates with their planted sleep hours zeroed out. With
``waking_presence`` (the default) every waking hour of every day receives
at least one screen_on event, so without noise the planted sleep window is
the only inactivity run of each night. Stray events (``noise_rate``) fall
inside planted sleep hours.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .ingest import (
    HOURS_PER_WEEK,
    SECONDS_PER_HOUR,
    EventLog,
    StudyWindow,
)

COMPONENT_NAMES = ("morning", "noon", "evening", "night")
DEFAULT_PEAK_HOURS = (7.9, 13.1, 18.3, 23.6)


def bump_templates(
    peak_hours=DEFAULT_PEAK_HOURS,
    concentration: float = 10.0,
    weekend_attenuation=(0.6, 1.0, 0.6, 1.0),
) -> np.ndarray:
    """Circular (von Mises shaped) daily bumps repeated over the week.

    ``weekend_attenuation[k]`` scales template k on Saturday and Sunday.
    Returns a K x 168 array whose rows sum to one.
    """
    hours = np.arange(24)
    day_factor = np.ones(7)
    rows = []
    for peak, atten in zip(peak_hours, weekend_attenuation):
        daily = np.exp(concentration * np.cos(2 * np.pi * (hours - peak) / 24))
        day_factor[5:] = atten
        weekly = (day_factor[:, None] * daily[None, :]).ravel()
        rows.append(weekly / weekly.sum())
    return np.array(rows)


@dataclass
class PopulationSpec:
    n_persons: int = 200
    templates: np.ndarray = field(default_factory=bump_templates)
    weight_prior: tuple[float, ...] = (0.3, 0.3, 0.3, 0.3)
    events_per_week: float = 300.0
    weeks: int = 50
    start_week: int = 2
    year: int = 2014
    tz_offset_minutes: int = 0
    # (onset clock hour, duration hours) per person; None derives them from
    # the weights: onset = base + sum_k w_k * shift_k + jitter
    sleep_windows: list[tuple[int, int]] | None = None
    base_onset: float = 25.0
    onset_shifts: tuple[float, ...] = (-3.0, 0.0, -1.5, 3.0)
    onset_jitter: int = 1
    duration_range: tuple[int, int] = (6, 9)
    noise_rate: float = 0.0
    # per-person shift of the whole rhythm by an integer number of hours in
    # [-phase_jitter, phase_jitter] (chronotype phase variation)
    phase_jitter: int = 1
    # put each person's largest weight on component (i mod K)
    balanced: bool = True
    waking_presence: bool = True
    screen_off: bool = True
    seed: int = 0

    def window(self) -> StudyWindow:
        return StudyWindow(self.start_week, self.start_week + self.weeks - 1, self.year,
                           self.tz_offset_minutes)


@dataclass
class GroundTruth:
    person_ids: list[str]
    weights: np.ndarray
    templates: np.ndarray
    sleep_onsets: np.ndarray
    sleep_durations: np.ndarray

    def to_dict(self) -> dict:
        return {
            "person_ids": self.person_ids,
            "weights": self.weights.tolist(),
            "templates": self.templates.tolist(),
            "sleep_onsets": self.sleep_onsets.tolist(),
            "sleep_durations": self.sleep_durations.tolist(),
        }


def _validate(spec: PopulationSpec) -> np.ndarray:
    T = np.asarray(spec.templates, dtype=float)
    if spec.n_persons < 1:
        raise ParameterError("n_persons must be >= 1")
    if spec.weeks < 1:
        raise ParameterError("weeks must be >= 1")
    if not spec.events_per_week > 0:
        raise ParameterError("events_per_week must be positive")
    if T.ndim != 2 or T.shape[1] != HOURS_PER_WEEK or np.any(T < 0):
        raise ParameterError("templates must be a non-negative K x 168 array")
    if not np.allclose(T.sum(axis=1), 1.0):
        raise ParameterError("each template must sum to one")
    if spec.sleep_windows is None and len(spec.onset_shifts) != T.shape[0]:
        raise ParameterError("onset_shifts needs one entry per template")
    if len(spec.weight_prior) != T.shape[0] or min(spec.weight_prior) <= 0:
        raise ParameterError("weight_prior needs one positive concentration per template")
    if not 0 <= spec.noise_rate <= 1:
        raise ParameterError("noise_rate must lie in [0, 1]")
    if spec.sleep_windows is not None and len(spec.sleep_windows) != spec.n_persons:
        raise ParameterError("one sleep window per person is required")
    return T


def _planted_sleep(spec: PopulationSpec, weights: np.ndarray, rng: np.random.Generator):
    if spec.sleep_windows is not None:
        onsets = np.array([int(o) % 24 for o, _ in spec.sleep_windows])
        durations = np.array([int(d) for _, d in spec.sleep_windows])
    else:
        jitter = rng.integers(-spec.onset_jitter, spec.onset_jitter + 1, size=len(weights))
        shift = weights @ np.asarray(spec.onset_shifts, dtype=float)
        onsets = np.round(spec.base_onset + shift).astype(int) + jitter
        onsets = onsets % 24
        lo, hi = spec.duration_range
        durations = rng.integers(lo, hi + 1, size=len(weights))
    if np.any(durations < 1) or np.any(durations > 23):
        raise ParameterError("sleep durations must lie in 1..23 hours")
    return onsets, durations


def _balance(weights: np.ndarray) -> np.ndarray:
    n, K = weights.shape
    out = weights.copy()
    for i in range(n):
        top = int(np.argmax(out[i]))
        target = i % K
        out[i, [top, target]] = out[i, [target, top]]
    return out


def sleep_mask(onset: int, duration: int) -> np.ndarray:
    """Boolean 168-vector marking the hour-of-week bins inside a nightly sleep window."""
    daily = np.zeros(24, dtype=bool)
    daily[(onset + np.arange(duration)) % 24] = True
    return np.tile(daily, 7)


def _person_log(pid, rhythm, asleep, spec, window, rng) -> EventLog:
    awake = ~asleep
    lam = np.where(awake, rhythm, 0.0)
    lam = spec.events_per_week * lam / lam.sum()
    counts = rng.poisson(lam, size=(spec.weeks, HOURS_PER_WEEK))
    if spec.waking_presence:
        counts[:, awake] = np.maximum(counts[:, awake], 1)
    if spec.noise_rate > 0:
        stray = rng.random((spec.weeks, HOURS_PER_WEEK)) < spec.noise_rate
        counts += (stray & asleep).astype(counts.dtype)
    hour_starts = (window.start_ts
                   + SECONDS_PER_HOUR * np.arange(spec.weeks * HOURS_PER_WEEK, dtype=np.int64))
    flat = counts.ravel()
    on = np.repeat(hour_starts, flat) + rng.integers(0, SECONDS_PER_HOUR, size=flat.sum())
    if not spec.screen_off:
        return EventLog(pid, on, np.ones(len(on), dtype=bool))
    off = on + rng.integers(5, 300, size=len(on))
    return EventLog(pid,
                    np.concatenate([on, off]),
                    np.concatenate([np.ones(len(on), bool), np.zeros(len(off), bool)]))


def generate_population(spec: PopulationSpec) -> tuple[list[EventLog], GroundTruth]:
    T = _validate(spec)
    window = spec.window()
    root = np.random.SeedSequence(spec.seed)
    pop_rng = np.random.default_rng(root.spawn(1)[0])
    weights = pop_rng.dirichlet(spec.weight_prior, size=spec.n_persons)
    if spec.balanced:
        weights = _balance(weights)
    onsets, durations = _planted_sleep(spec, weights, pop_rng)
    phases = pop_rng.integers(-spec.phase_jitter, spec.phase_jitter + 1, size=spec.n_persons)
    person_seeds = np.random.SeedSequence([spec.seed, 1]).spawn(spec.n_persons)
    ids = [f"p{i:04d}" for i in range(spec.n_persons)]
    logs = []
    for i, pid in enumerate(ids):
        rng = np.random.default_rng(person_seeds[i])
        rhythm = np.roll(weights[i] @ T, phases[i])
        logs.append(_person_log(pid, rhythm, sleep_mask(onsets[i], durations[i]), spec, window, rng))
    truth = GroundTruth(ids, weights, T, onsets, durations)
    return logs, truth


def match_components(found: np.ndarray, truth: np.ndarray) -> tuple[tuple[int, ...], np.ndarray]:
    """Best permutation of found components onto true ones by cosine similarity.

    Both arguments hold one component per row. Brute force over all
    permutations; returns (perm, similarities) with found[perm[k]] matched
    to truth[k].
    """
    a = found / np.linalg.norm(found, axis=1, keepdims=True)
    b = truth / np.linalg.norm(truth, axis=1, keepdims=True)
    sim = b @ a.T
    K = len(truth)
    if len(found) != K:
        raise ParameterError("component counts differ")
    best = max(itertools.permutations(range(K)), key=lambda p: sim[np.arange(K), p].sum())
    return best, sim[np.arange(K), best]
