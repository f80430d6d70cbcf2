import datetime as dt

import numpy as np
import pytest

from rhythmnmf.ingest import SECONDS_PER_HOUR, EventLog, StudyWindow, day_start_ts


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def short_window():
    # two ISO weeks of 2014: Mon 2014-01-06 .. Sun 2014-01-19
    return StudyWindow(start_week=2, end_week=3, year=2014)


def hourly_log(pid, window, active_hours, per_hour=1, skip_days=()):
    """A log with ``per_hour`` screen_on events in each listed local clock hour of every day."""
    stamps = []
    for d, day in enumerate(window.dates()):
        if d in skip_days:
            continue
        base = day_start_ts(day, window.tz_offset_minutes)
        for h in active_hours:
            for k in range(per_hour):
                stamps.append(base + h * SECONDS_PER_HOUR + 60 * k + 7)
    stamps = np.array(stamps, dtype=np.int64)
    return EventLog(pid, stamps, np.ones(len(stamps), dtype=bool))


def local_ts(window, date: dt.date, hour: int, minute: int = 0) -> int:
    return day_start_ts(date, window.tz_offset_minutes) + hour * SECONDS_PER_HOUR + 60 * minute


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
