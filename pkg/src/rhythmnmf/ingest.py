"""Screen-event parsing, participant filtering and weekly rhythm construction."""
from __future__ import annotations

import datetime as dt
import io
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptyInputError, FormatError, InvalidWindowError

logger = logging.getLogger(__name__)

HOURS_PER_WEEK = 168
SECONDS_PER_HOUR = 3600
SECONDS_PER_DAY = 86400
DAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
BIN_LABELS = tuple(f"{d}{h:02d}" for d in DAY_NAMES for h in range(24))

# 1970-01-01 was a Thursday
_EPOCH_WEEKDAY = 3


class EventKind(str, Enum):
    SCREEN_ON = "screen_on"
    SCREEN_OFF = "screen_off"


@dataclass(frozen=True)
class Event:
    person_id: str
    timestamp: int
    kind: EventKind


@dataclass
class EventLog:
    """All events of one person, sorted by timestamp.

    Stored column-wise: ``timestamps`` (int64 epoch seconds) and ``is_on``
    (True for screen_on, False for screen_off).
    """

    person_id: str
    timestamps: np.ndarray
    is_on: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        on = np.asarray(self.is_on, dtype=bool)
        if ts.shape != on.shape:
            raise ValueError("timestamps and is_on must have the same length")
        # stable sort keeps screen_on/off order of equal timestamps reproducible
        order = np.lexsort((~on, ts))
        self.timestamps = ts[order]
        self.is_on = on[order]

    @classmethod
    def from_events(cls, person_id: str, events: Iterable[Event]) -> "EventLog":
        events = list(events)
        return cls(
            person_id,
            np.array([e.timestamp for e in events], dtype=np.int64),
            np.array([e.kind is EventKind.SCREEN_ON for e in events], dtype=bool),
        )

    @property
    def events(self) -> list[Event]:
        return [
            Event(self.person_id, int(t), EventKind.SCREEN_ON if on else EventKind.SCREEN_OFF)
            for t, on in zip(self.timestamps, self.is_on)
        ]

    @property
    def screen_on(self) -> np.ndarray:
        return self.timestamps[self.is_on]

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class StudyWindow:
    """ISO weeks ``start_week..end_week`` (inclusive) of ``year``.

    ``tz_offset_minutes`` is a fixed offset from UTC; no DST is modelled.
    """

    start_week: int = 2
    end_week: int = 51
    year: int = 2014
    tz_offset_minutes: int = 0

    def __post_init__(self):
        if self.start_week > self.end_week:
            raise InvalidWindowError(
                f"start_week {self.start_week} is after end_week {self.end_week}"
            )
        try:
            self.first_day
            dt.date.fromisocalendar(self.year, self.end_week, 7)
        except ValueError as exc:
            raise InvalidWindowError(str(exc)) from exc

    @property
    def first_day(self) -> dt.date:
        return dt.date.fromisocalendar(self.year, self.start_week, 1)

    @property
    def n_weeks(self) -> int:
        return self.end_week - self.start_week + 1

    @property
    def n_days(self) -> int:
        return 7 * self.n_weeks

    @property
    def offset_seconds(self) -> int:
        return 60 * self.tz_offset_minutes

    @property
    def start_ts(self) -> int:
        """UTC epoch second of the window's first local midnight."""
        return day_start_ts(self.first_day, self.tz_offset_minutes)

    @property
    def end_ts(self) -> int:
        return self.start_ts + self.n_days * SECONDS_PER_DAY

    def dates(self) -> list[dt.date]:
        return [self.first_day + dt.timedelta(days=i) for i in range(self.n_days)]

    def contains(self, timestamps: np.ndarray) -> np.ndarray:
        return (timestamps >= self.start_ts) & (timestamps < self.end_ts)


def day_start_ts(day: dt.date, tz_offset_minutes: int) -> int:
    """UTC epoch second of local midnight starting ``day``."""
    days = (day - dt.date(1970, 1, 1)).days
    return days * SECONDS_PER_DAY - 60 * tz_offset_minutes


@dataclass(frozen=True)
class FilterCriteria:
    min_active_day_fraction: float = 0.8
    min_mean_weekly_events: float = 280.0


@dataclass
class ActivityRhythm:
    person_id: str
    bins: np.ndarray


@dataclass
class ParseResult:
    logs: list[EventLog]
    n_lines: int = 0
    malformed_lines: list[int] = field(default_factory=list)

    @property
    def n_malformed(self) -> int:
        return len(self.malformed_lines)


@dataclass
class FilterReport:
    total: int
    retained: int
    failed_active_days: list[str]
    failed_weekly_events: list[str]
    active_day_fraction: dict[str, float]
    mean_weekly_events: dict[str, float]

    @property
    def excluded(self) -> int:
        return self.total - self.retained


_HEADER = ("person_id", "timestamp", "kind")
_KINDS = {"screen_on": True, "screen_off": False}


def _lines(stream: BinaryIO | bytes | str) -> Iterator[str]:
    if isinstance(stream, bytes):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield raw.rstrip("\r\n")


def parse_events(stream: BinaryIO | bytes | str, max_malformed: int | None = 100) -> ParseResult:
    """Parse ``person_id,timestamp,kind`` records into one EventLog per person.

    Blank lines and an optional header line are skipped. Malformed lines are
    recorded by line number; more than ``max_malformed`` of them raises
    FormatError (``None`` disables the limit).
    """
    stamps: dict[str, list[int]] = {}
    kinds: dict[str, list[bool]] = {}
    malformed: list[int] = []
    n_lines = 0
    try:
        for lineno, line in enumerate(_lines(stream), start=1):
            n_lines = lineno
            if not line.strip():
                continue
            parts = [p.strip() for p in line.split(",")]
            if lineno == 1 and tuple(parts) == _HEADER:
                continue
            if len(parts) != 3 or not parts[0] or parts[2] not in _KINDS:
                malformed.append(lineno)
            else:
                try:
                    ts = int(parts[1])
                except ValueError:
                    malformed.append(lineno)
                else:
                    stamps.setdefault(parts[0], []).append(ts)
                    kinds.setdefault(parts[0], []).append(_KINDS[parts[2]])
            if max_malformed is not None and len(malformed) > max_malformed:
                raise FormatError(
                    f"more than {max_malformed} malformed lines (latest: line {malformed[-1]})"
                )
    except UnicodeDecodeError as exc:
        raise FormatError(f"input is not valid UTF-8: {exc}") from exc
    if malformed:
        logger.warning("skipped %d malformed lines (first: %d)", len(malformed), malformed[0])
    logs = [EventLog(pid, np.array(stamps[pid]), np.array(kinds[pid])) for pid in stamps]
    return ParseResult(logs=logs, n_lines=n_lines, malformed_lines=malformed)


def format_events(logs: Iterable[EventLog]) -> str:
    """Serialize logs in the text format read by :func:`parse_events`."""
    out = io.StringIO()
    for log in logs:
        for t, on in zip(log.timestamps.tolist(), log.is_on.tolist()):
            out.write(f"{log.person_id},{t},{'screen_on' if on else 'screen_off'}\n")
    return out.getvalue()


def local_day_index(timestamps: np.ndarray, window: StudyWindow) -> np.ndarray:
    """Day number relative to the window's first day (may be out of range)."""
    return (np.asarray(timestamps, dtype=np.int64) - window.start_ts) // SECONDS_PER_DAY


def weekly_bin(timestamps: np.ndarray, tz_offset_minutes: int) -> np.ndarray:
    """Hour-of-week bin (Monday 00:00 = 0) for each timestamp in local time."""
    local = np.asarray(timestamps, dtype=np.int64) + 60 * tz_offset_minutes
    days = local // SECONDS_PER_DAY
    weekday = (days + _EPOCH_WEEKDAY) % 7
    hour = (local % SECONDS_PER_DAY) // SECONDS_PER_HOUR
    return weekday * 24 + hour


def active_day_fraction(log: EventLog, window: StudyWindow) -> float:
    day = local_day_index(log.timestamps, window)
    day = day[(day >= 0) & (day < window.n_days)]
    return len(np.unique(day)) / window.n_days


def mean_weekly_events(log: EventLog, window: StudyWindow) -> float:
    return int(window.contains(log.timestamps).sum()) / window.n_weeks


def filter_participants(
    logs: Sequence[EventLog],
    criteria: FilterCriteria = FilterCriteria(),
    window: StudyWindow = StudyWindow(),
) -> tuple[list[EventLog], FilterReport]:
    """Keep persons active on enough days with enough events per week.

    A day counts as active if it holds at least one event of either kind;
    the weekly volume counts screen_on and screen_off events together.
    """
    if not logs:
        raise EmptyInputError("no event logs to filter")
    if window.n_days <= 0:
        raise InvalidWindowError("study window contains no days")
    kept, low_days, low_volume = [], [], []
    fractions, volumes = {}, {}
    for log in logs:
        frac = active_day_fraction(log, window)
        vol = mean_weekly_events(log, window)
        fractions[log.person_id] = frac
        volumes[log.person_id] = vol
        ok = True
        if frac < criteria.min_active_day_fraction:
            low_days.append(log.person_id)
            ok = False
        if vol < criteria.min_mean_weekly_events:
            low_volume.append(log.person_id)
            ok = False
        if ok:
            kept.append(log)
    report = FilterReport(
        total=len(logs),
        retained=len(kept),
        failed_active_days=low_days,
        failed_weekly_events=low_volume,
        active_day_fraction=fractions,
        mean_weekly_events=volumes,
    )
    return kept, report


def build_weekly_rhythm(log: EventLog, window: StudyWindow = StudyWindow()) -> ActivityRhythm:
    """Normalized 168-bin histogram of screen_on events inside ``window``."""
    on = log.screen_on
    on = on[window.contains(on)]
    if len(on) == 0:
        raise EmptyInputError(f"person {log.person_id} has no screen_on events in the window")
    counts = np.bincount(weekly_bin(on, window.tz_offset_minutes), minlength=HOURS_PER_WEEK)
    return ActivityRhythm(log.person_id, counts / counts.sum())


def population_average(rhythms: Sequence[ActivityRhythm] | np.ndarray) -> np.ndarray:
    if len(rhythms) == 0:
        raise EmptyInputError("population average of no rhythms")
    if isinstance(rhythms, np.ndarray):
        mat = rhythms
    else:
        mat = np.vstack([r.bins for r in rhythms])
    # shifted by the first row so that identical rows average back exactly
    ref = mat[0]
    return ref + (mat - ref).mean(axis=0)
