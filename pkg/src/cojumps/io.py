"""CSV and JSON readers/writers for every file the pipeline exchanges."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .events import EventSeries
from .hawkes import HawkesModel
from .ingest import METHODS, ReturnSeries, SessionSpec, TickSeries


class MalformedInput(ValueError):
    def __init__(self, path, line, reason):
        super().__init__(f"{path}:{line}: {reason}")
        self.path, self.line = str(path), line


def _rows(path, header):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise MalformedInput(path, 1, "missing header") from None
        head = [h.strip() for h in head]
        if head[: len(header)] != list(header):
            raise MalformedInput(path, 1, f"expected header {','.join(header)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            yield reader.line_num, row


def _write(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# ---------------------------------------------------------------------- ticks


def read_ticks(path, symbol: str | None = None, day_seconds: float = 86_400.0) -> TickSeries:
    """Trades as ``timestamp_ms,price``; timestamps are milliseconds since the first day's open."""
    times, prices = [], []
    last = -np.inf
    for line, row in _rows(path, ("timestamp_ms", "price")):
        if len(row) < 2:
            raise MalformedInput(path, line, "expected two fields")
        try:
            t, p = float(row[0]) / 1000.0, float(row[1])
        except ValueError:
            raise MalformedInput(path, line, "non-numeric field") from None
        if not np.isfinite(p) or p <= 0:
            raise MalformedInput(path, line, "price must be positive")
        if t < last:
            raise MalformedInput(path, line, "timestamps must be non-decreasing")
        last = t
        times.append(t)
        prices.append(p)
    return TickSeries(symbol or Path(path).stem, np.array(times), np.array(prices))


def write_ticks(path, ticks: TickSeries):
    ms = np.round(ticks.times * 1000.0).astype(np.int64)
    return _write(path, ("timestamp_ms", "price"), (
        (int(t), repr(float(p))) for t, p in zip(ms, ticks.prices)))


# -------------------------------------------------------------------- returns


def write_returns(path, series: dict):
    """One row per slot: ``day,minute,return_MO1,return_MO2,return_MO3``; NA is empty."""
    session = next(iter(series.values())).session
    cols = [series[m].values for m in METHODS]
    m = session.slots_per_day
    rows = (
        (i // m + 1, i % m + 1, *(_fmt(float(c[i])) for c in cols))
        for i in range(session.n)
    )
    return _write(path, ("day", "minute", *(f"return_{x}" for x in METHODS)), rows)


def read_returns(path, symbol: str | None = None) -> dict:
    days, minutes, vals = [], [], []
    for line, row in _rows(path, ("day", "minute", *(f"return_{x}" for x in METHODS))):
        if len(row) != 5:
            raise MalformedInput(path, line, "expected five fields")
        try:
            days.append(int(row[0]))
            minutes.append(int(row[1]))
            vals.append([float(c) if c.strip() else np.nan for c in row[2:]])
        except ValueError:
            raise MalformedInput(path, line, "non-numeric field") from None
    if not days:
        raise MalformedInput(path, 2, "no return rows")
    n_days, per_day = max(days), max(minutes)
    if len(days) != n_days * per_day:
        raise MalformedInput(path, len(days) + 1, "incomplete day/minute grid")
    session = SessionSpec(per_day, n_days)
    v = np.array(vals)
    sym = symbol or Path(path).stem.removesuffix(".returns")
    return {m: ReturnSeries(sym, v[:, j], m, session) for j, m in enumerate(METHODS)}


# --------------------------------------------------------------------- events


def write_jumps(path, minutes, directions, masks):
    return _write(path, ("minute", "direction", "method_mask"),
                  ((int(t), int(d), int(k)) for t, d, k in zip(minutes, directions, masks)))


def read_jumps(path, symbol: str | None = None, require_mask: int | None = None) -> EventSeries:
    """Jump file as events; with ``require_mask`` keep minutes where all those bits fired."""
    t, d = [], []
    for line, row in _rows(path, ("minute", "direction", "method_mask")):
        try:
            minute, direction, mask = int(row[0]), int(row[1]), int(row[2])
        except (ValueError, IndexError):
            raise MalformedInput(path, line, "expected three integer fields") from None
        if require_mask is None or (mask & require_mask) == require_mask:
            t.append(minute)
            d.append(direction)
    return EventSeries(symbol or Path(path).stem.removesuffix(".jumps"), np.array(t, dtype=np.int64), d)


def write_events(path, times):
    return _write(path, ("minute",), ((int(t),) for t in times))


def read_events(path, symbol: str | None = None) -> EventSeries:
    """One-column ``minute`` file, or a jump file (first column used)."""
    with Path(path).open(encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if header[:3] == ["minute", "direction", "method_mask"]:
        return read_jumps(path, symbol)
    t = []
    for line, row in _rows(path, ("minute",)):
        try:
            t.append(int(row[0]))
        except ValueError:
            raise MalformedInput(path, line, "minute must be an integer") from None
    try:
        return EventSeries(symbol or Path(path).stem, np.array(t, dtype=np.int64))
    except ValueError as exc:
        raise MalformedInput(path, 2, str(exc)) from None


def read_gaps(path) -> np.ndarray:
    """Intertrade gaps in seconds, one per row after a header line."""
    vals = []
    with Path(path).open(encoding="utf-8") as fh:
        next(fh, None)
        for i, raw in enumerate(fh, start=2):
            raw = raw.strip().split(",")[0]
            if not raw:
                continue
            try:
                vals.append(float(raw))
            except ValueError:
                raise MalformedInput(path, i, "gap must be numeric") from None
    return np.array(vals)


def write_truth(path, minutes, sizes):
    return _write(path, ("minute", "size", "direction"),
                  ((int(t), repr(float(s)), int(np.sign(s))) for t, s in zip(minutes, sizes)))


def write_tally(path, tally):
    return _write(path, ("minute", "J"), tally.rows())


def write_band(path, band, observed=None):
    rows = band.to_rows(observed)
    keys = ("w", "observed", "mean", "lo95", "hi95", "lo99", "hi99", "source")
    return _write(path, keys, ([_fmt(r[k]) for k in keys] for r in rows))


# ----------------------------------------------------------------------- json


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_model(path) -> HawkesModel:
    return HawkesModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
