"""Nightly sleep inference from hourly phone-use presence.

Days are anchored at 15:00 local time so that a night's inactivity is not
split at midnight. The longest run of inactive hours in an anchored day is
taken as sleep: its first hour is the sleep time and the first active hour
after it the wake-up time. Per person the typical times are the modes over
all nights, the duration is the mean.
"""
from __future__ import annotations

import datetime as dt
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInputError
from .ingest import SECONDS_PER_DAY, SECONDS_PER_HOUR, EventLog, StudyWindow, day_start_ts

logger = logging.getLogger(__name__)

ANCHOR_HOUR = 15
HOURS = 24
DEFAULT_MIN_DURATION = 2


@dataclass
class DayPresence:
    person_id: str
    anchor_date: dt.date
    active: np.ndarray  # 24 booleans, index 0 = 15:00-16:00


@dataclass(frozen=True)
class NightRecord:
    sleep_onset_hour: int
    duration_hours: int

    @property
    def wake_hour(self) -> int:
        return self.sleep_onset_hour + self.duration_hours

    @property
    def mid_sleep_hour(self) -> float:
        return self.sleep_onset_hour + self.duration_hours / 2


@dataclass
class SleepSummary:
    person_id: str
    typical_sleep_time: float
    typical_wake_time: float
    typical_mid_sleep: float
    mean_duration_hours: float
    nights_used: int

    # anchored (15:00 = 0) versions, continuous across midnight
    @property
    def sleep_anchored(self) -> float:
        return to_anchored(self.typical_sleep_time)

    @property
    def wake_anchored(self) -> float:
        return to_anchored(self.typical_wake_time)

    @property
    def mid_sleep_anchored(self) -> float:
        return to_anchored(self.typical_mid_sleep)


def to_clock(anchored: float) -> float:
    return (anchored + ANCHOR_HOUR) % HOURS


def to_anchored(clock: float) -> float:
    return (clock - ANCHOR_HOUR) % HOURS


def _anchor_start(anchor_date: dt.date, tz_offset_minutes: int) -> int:
    return day_start_ts(anchor_date, tz_offset_minutes) + ANCHOR_HOUR * SECONDS_PER_HOUR


def daily_presence(log: EventLog, anchor_date: dt.date, tz_offset_minutes: int = 0) -> DayPresence:
    """Hours of the anchored day holding at least one screen_on event."""
    start = _anchor_start(anchor_date, tz_offset_minutes)
    on = log.screen_on
    on = on[(on >= start) & (on < start + SECONDS_PER_DAY)]
    active = np.zeros(HOURS, dtype=bool)
    active[(on - start) // SECONDS_PER_HOUR] = True
    return DayPresence(log.person_id, anchor_date, active)


def presence_matrix(log: EventLog, window: StudyWindow) -> tuple[list[dt.date], np.ndarray]:
    """Presence for every anchored day that fits inside ``window``.

    The last calendar day of the window is not used as an anchor because
    its anchored day runs past the window end.
    """
    dates = window.dates()[:-1]
    start = _anchor_start(window.first_day, window.tz_offset_minutes)
    on = log.screen_on
    rel = on - start
    rel = rel[(rel >= 0) & (rel < len(dates) * SECONDS_PER_DAY)]
    active = np.zeros((len(dates), HOURS), dtype=bool)
    active[rel // SECONDS_PER_DAY, (rel % SECONDS_PER_DAY) // SECONDS_PER_HOUR] = True
    return dates, active


def longest_inactive_run(p: DayPresence | np.ndarray) -> tuple[int, int] | None:
    """(start, length) of the longest run of inactive hours, earliest on ties.

    None when there is no inactive hour or when the longest run reaches the
    end of the anchored day (no wake-up hour inside the day).
    """
    active = p.active if isinstance(p, DayPresence) else np.asarray(p, dtype=bool)
    best_start, best_len = -1, 0
    run_start = None
    for h in range(HOURS + 1):
        idle = h < HOURS and not active[h]
        if idle and run_start is None:
            run_start = h
        elif not idle and run_start is not None:
            if h - run_start > best_len:
                best_start, best_len = run_start, h - run_start
            run_start = None
    if best_len == 0 or best_start + best_len == HOURS:
        return None
    return best_start, best_len


def infer_night(p: DayPresence | np.ndarray) -> NightRecord | None:
    run = longest_inactive_run(p)
    if run is None:
        return None
    return NightRecord(sleep_onset_hour=run[0], duration_hours=run[1])


def person_nights(
    log: EventLog,
    window: StudyWindow,
    min_duration: int = DEFAULT_MIN_DURATION,
) -> list[NightRecord]:
    """Nights of one person; runs shorter than ``min_duration`` hours are dropped."""
    _, active = presence_matrix(log, window)
    nights = []
    for day in active:
        night = infer_night(day)
        if night is not None and night.duration_hours >= min_duration:
            nights.append(night)
    return nights


def _mode(values: Iterable[float]) -> float:
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def summarize(nights: Sequence[NightRecord], person_id: str = "") -> SleepSummary:
    """Modes of sleep, wake and mid-sleep hours and the mean duration.

    Modes are taken in anchored hours (earliest wins ties) and reported as
    clock hours; mid-sleep is first rounded to the nearest half hour.
    """
    if not nights:
        raise EmptyInputError(f"no usable nights for person {person_id!r}")
    onset = _mode(n.sleep_onset_hour for n in nights)
    wake = _mode(n.wake_hour for n in nights)
    mid = _mode(round(2 * n.mid_sleep_hour) / 2 for n in nights)
    duration = float(np.mean([n.duration_hours for n in nights]))
    return SleepSummary(
        person_id=person_id,
        typical_sleep_time=float(to_clock(onset)),
        typical_wake_time=float(to_clock(wake)),
        typical_mid_sleep=float(to_clock(mid)),
        mean_duration_hours=duration,
        nights_used=len(nights),
    )


def summarize_population(
    logs: Sequence[EventLog],
    window: StudyWindow,
    min_duration: int = DEFAULT_MIN_DURATION,
) -> tuple[list[SleepSummary], list[str]]:
    """Summaries for every person with at least one usable night.

    Returns (summaries, skipped person ids).
    """
    summaries, skipped = [], []
    for log in logs:
        nights = person_nights(log, window, min_duration)
        if not nights:
            logger.warning("person %s: no usable nights, excluded from sleep summary", log.person_id)
            skipped.append(log.person_id)
            continue
        summaries.append(summarize(nights, log.person_id))
    return summaries, skipped
