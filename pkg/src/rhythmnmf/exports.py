"""Text file formats for pipeline inputs and outputs.

Numbers are written with ``repr`` (shortest round-trip decimal), so files are
diffable and reload to the exact same floats.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError
from .ingest import BIN_LABELS, HOURS_PER_WEEK, FilterReport
from .nmf import Factorization
from .rankselect import RankSweep
from .sleep import SleepSummary
from .stats import SLEEP_PARAMETERS, CorrelationReport, Hist2D


def fmt(x) -> str:
    return repr(float(x))


class OutputBatch:
    """Collects output files and writes them only on :meth:`commit`.

    Nothing touches the output directory until every product has been
    computed, so a failing command leaves no partial outputs behind.
    """

    def __init__(self, out_dir: str | os.PathLike):
        self.out_dir = Path(out_dir)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def commit(self) -> list[Path]:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.files.items():
            target = self.out_dir / name
            fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, target)
            written.append(target)
        return written


def _csv(rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _read_csv(path) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not valid UTF-8") from exc
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _labeled_matrix(path, expected_cols: int | None = None) -> tuple[list[str], list[str], np.ndarray]:
    rows = _read_csv(path)
    if not rows:
        raise FormatError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if len(header) < 2 or (expected_cols is not None and len(header) != expected_cols + 1):
        raise FormatError(f"{path}: unexpected header with {len(header)} columns")
    ids, values = [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            values.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        ids.append(row[0])
    if not ids:
        raise FormatError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate row labels")
    mat = np.array(values, dtype=float)
    if not np.all(np.isfinite(mat)):
        raise FormatError(f"{path}: non-finite values")
    return header[1:], ids, mat


# rhythm matrix ---------------------------------------------------------------

def rhythm_matrix_text(person_ids: Sequence[str], X: np.ndarray) -> str:
    rows = [["person_id", *BIN_LABELS]]
    rows += [[pid, *map(fmt, row)] for pid, row in zip(person_ids, X)]
    return _csv(rows)


def read_rhythm_matrix(path) -> tuple[list[str], np.ndarray]:
    labels, ids, X = _labeled_matrix(path, HOURS_PER_WEEK)
    if tuple(labels) != BIN_LABELS:
        raise FormatError(f"{path}: header is not the 168 weekday-hour labels")
    return ids, X


# factorization ---------------------------------------------------------------

def components_text(f: Factorization, labels: Sequence[str]) -> str:
    rows = [["bin", *labels]]
    rows += [[b, *map(fmt, row)] for b, row in zip(BIN_LABELS, f.H)]
    return _csv(rows)


def weights_text(person_ids: Sequence[str], W: np.ndarray, labels: Sequence[str]) -> str:
    rows = [["person_id", *labels]]
    rows += [[pid, *map(fmt, row)] for pid, row in zip(person_ids, W)]
    return _csv(rows)


def read_weights(path) -> tuple[list[str], list[str], np.ndarray]:
    """Returns (component labels, person ids, weight matrix)."""
    labels, ids, W = _labeled_matrix(path)
    if np.any(W < 0):
        raise FormatError(f"{path}: negative weights")
    return labels, ids, W


def factorization_meta(f: Factorization, n_restarts: int) -> str:
    return _json({
        "K": f.K,
        "seed": f.seed,
        "final_error": f.final_error,
        "iterations": f.iterations_run,
        "restarts": n_restarts,
    })


def vector_text(values: np.ndarray, name: str = "value") -> str:
    return _csv([["bin", name], *[[b, fmt(v)] for b, v in zip(BIN_LABELS, values)]])


# rank selection --------------------------------------------------------------

def rank_curve_text(sweep: RankSweep) -> str:
    return _csv([["K", "cophenetic"], *[[str(k), fmt(c)] for k, c in sweep.curve]])


def rank_selection_json(sweep: RankSweep) -> str:
    return _json({
        "selected_k": sweep.selected_k,
        "runs_per_k": sweep.results[0].runs,
        "degenerate_k": [r.K for r in sweep.results if r.degenerate],
    })


# sleep -----------------------------------------------------------------------

SLEEP_HEADER = ["person_id", "sleep_time", "wake_time", "mid_sleep", "mean_duration", "nights_used"]


def sleep_summary_text(summaries: Sequence[SleepSummary]) -> str:
    rows = [SLEEP_HEADER]
    rows += [[s.person_id, fmt(s.typical_sleep_time), fmt(s.typical_wake_time),
              fmt(s.typical_mid_sleep), fmt(s.mean_duration_hours), str(s.nights_used)]
             for s in summaries]
    return _csv(rows)


def read_sleep_summaries(path) -> list[SleepSummary]:
    rows = _read_csv(path)
    if not rows or rows[0] != SLEEP_HEADER:
        raise FormatError(f"{path}: unexpected sleep summary header")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            pid, st, wt, mid, dur, nights = row
            out.append(SleepSummary(pid, float(st), float(wt), float(mid), float(dur), int(nights)))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return out


# reports ---------------------------------------------------------------------

def filter_report_json(report: FilterReport, n_malformed: int = 0) -> str:
    return _json({
        "total": report.total,
        "retained": report.retained,
        "excluded": report.excluded,
        "failed_active_days": report.failed_active_days,
        "failed_weekly_events": report.failed_weekly_events,
        "malformed_lines": n_malformed,
    })


def weight_correlations_text(reports: Sequence[CorrelationReport]) -> str:
    rows = [["component_a", "component_b", "r", "p_value", "p_display", "n"]]
    rows += [[c.x_label, c.y_label, fmt(c.r), fmt(c.p_value), c.p_display, str(c.n)] for c in reports]
    return _csv(rows)


def sleep_table_text(grid: Sequence[Sequence[CorrelationReport]]) -> str:
    """Component x sleep-parameter table: one r row and one p row per component."""
    rows = [["component", "stat", *SLEEP_PARAMETERS]]
    for line in grid:
        label = line[0].x_label
        rows.append([label, "r", *[fmt(c.r) for c in line]])
        rows.append([label, "p_value", *[fmt(c.p_value) for c in line]])
        rows.append([label, "p_display", *[c.p_display for c in line]])
    return _csv(rows)


def hist_json(hists: dict[str, Hist2D]) -> str:
    return _json({
        name: {"x_edges": h.x_edges.tolist(), "y_edges": h.y_edges.tolist(),
               "counts": h.counts.tolist()}
        for name, h in hists.items()
    })
