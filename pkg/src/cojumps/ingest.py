"""From raw trades to cleaned, deseasonalized one-minute returns.

Tick timestamps are seconds measured from the open of the first session; the
session of day ``d`` opens at ``d * day_seconds``. Sampling slot ``j`` of a day
(``1 <= j <= minutes_per_day``) holds the return between minute boundaries
``j - 1`` and ``j``, where the price at a boundary is the last trade at or
before it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

METHODS = ("MO1", "MO2", "MO3")


@dataclass
class SessionSpec:
    minutes_per_day: int = 505
    days: int = 1
    sampling_interval: int = 1
    day_seconds: float = 86_400.0

    def __post_init__(self):
        if self.minutes_per_day <= 0 or self.days <= 0 or self.sampling_interval <= 0:
            raise ValueError("session sizes must be positive")
        if self.minutes_per_day % self.sampling_interval:
            raise ValueError("minutes_per_day must be a multiple of sampling_interval")

    @property
    def slots_per_day(self) -> int:
        return self.minutes_per_day // self.sampling_interval

    @property
    def n(self) -> int:
        """Total number of sampling slots."""
        return self.slots_per_day * self.days


@dataclass
class TickSeries:
    symbol: str
    times: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.prices = np.asarray(self.prices, dtype=float)
        if self.times.shape != self.prices.shape:
            raise ValueError("times and prices must have the same length")
        if self.times.size > 1 and np.any(np.diff(self.times) < 0):
            raise ValueError(f"{self.symbol}: tick timestamps must be non-decreasing")
        if np.any(self.prices <= 0):
            raise ValueError(f"{self.symbol}: prices must be strictly positive")

    def __len__(self):
        return int(self.times.size)

    def subset(self, keep) -> "TickSeries":
        return TickSeries(self.symbol, self.times[keep], self.prices[keep])


@dataclass
class ReturnSeries:
    symbol: str
    values: np.ndarray
    method: str
    session: SessionSpec
    pattern: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if self.values.size != self.session.n:
            raise ValueError("return series length does not match the session")

    def by_day(self) -> np.ndarray:
        return self.values.reshape(self.session.days, self.session.slots_per_day)

    @property
    def available(self) -> np.ndarray:
        return np.isfinite(self.values)


# ----------------------------------------------------------------------------
# outliers


@njit(cache=True)
def _outlier_flags(p, k, n_trim, c, gamma):
    n = p.size
    bad = np.zeros(n, dtype=np.bool_)
    buf = np.empty(k)
    half = k // 2
    for i in range(n):
        lo = i - half
        if lo < 0:
            lo = 0
        hi = lo + k  # inclusive upper index once i itself is skipped
        if hi > n - 1:
            hi = n - 1
            lo = hi - k
        m = 0
        for j in range(lo, hi + 1):
            if j != i:
                buf[m] = p[j]
                m += 1
        s = np.sort(buf[:m])
        kept = s[n_trim:m - n_trim]
        mean = kept.mean()
        sd = 0.0
        if kept.size > 1:
            acc = 0.0
            for v in kept:
                acc += (v - mean) ** 2
            sd = math.sqrt(acc / (kept.size - 1))
        if abs(p[i] - mean) >= c * sd + gamma:
            bad[i] = True
    return bad


def remove_outliers(ticks: TickSeries, k: int = 60, delta: float = 0.10, c: float = 3.0,
                    gamma: float = 0.05, max_passes: int = 50) -> TickSeries:
    """Trimmed-neighbourhood outlier filter repeated until no tick is flagged.

    A tick is flagged when ``|p_i - mean_i| >= c * sd_i + gamma``, with the
    mean and standard deviation taken over the ``k`` closest other ticks after
    dropping the ``ceil(delta * k / 2)`` lowest and highest of them.
    """
    if k < 3 or not 0 <= delta < 0.5 or c <= 0 or gamma < 0:
        raise ValueError("invalid cleaning parameters")
    if len(ticks) < k + 1:
        raise ValueError("insufficient neighborhood: series shorter than k + 1 ticks")
    n_trim = math.ceil(delta * k / 2)
    if 2 * n_trim >= k:
        raise ValueError("trim fraction leaves no neighbours")
    keep = np.arange(len(ticks))
    for _ in range(max_passes):
        if keep.size < k + 1:
            break
        bad = _outlier_flags(ticks.prices[keep], k, n_trim, c, gamma)
        if not bad.any():
            break
        keep = keep[~bad]
    else:
        log.warning("%s: outlier filter did not reach a fixed point", ticks.symbol)
    return ticks.subset(keep)


# ----------------------------------------------------------------------------
# auctions and sampling


def _day_and_minute(ticks: TickSeries, session: SessionSpec):
    day = np.floor(ticks.times / session.day_seconds).astype(np.int64)
    minute = (ticks.times - day * session.day_seconds) / 60.0
    return day, minute


def detect_auctions(ticks: TickSeries, threshold_minutes: float = 10.0,
                    day_seconds: float = 86_400.0) -> list[tuple[float, float]]:
    """Intervals between consecutive same-day trades at least ``threshold_minutes`` apart.

    Intervals are returned in the tick time unit (seconds).
    """
    if threshold_minutes <= 0:
        raise ValueError("threshold must be positive")
    t = ticks.times
    if t.size < 2:
        return []
    gaps = np.diff(t)
    same_day = np.floor(t[1:] / day_seconds) == np.floor(t[:-1] / day_seconds)
    idx = np.flatnonzero(same_day & (gaps >= threshold_minutes * 60.0))
    return [(float(t[i]), float(t[i + 1])) for i in idx]


def auction_mask(auctions, session: SessionSpec) -> np.ndarray:
    """Boolean ``(days, slots)`` mask of sampling slots overlapping an auction."""
    mask = np.zeros((session.days, session.slots_per_day), dtype=bool)
    dt = session.sampling_interval
    for a, b in auctions:
        d = int(math.floor(a / session.day_seconds))
        if not 0 <= d < session.days:
            continue
        ta = (a - d * session.day_seconds) / 60.0 / dt
        tb = (b - d * session.day_seconds) / 60.0 / dt
        j = np.arange(1, session.slots_per_day + 1)
        mask[d] |= (j > ta) & (j - 1 < tb)
    return mask


def sample_prices(ticks: TickSeries, session: SessionSpec):
    """Last-price sampling on slot boundaries.

    Returns ``(last, traded)``: ``last[d, m]`` is the log-price at boundary ``m``
    (NaN before the day's first trade) and ``traded[d, j]`` tells whether slot
    ``j`` (``1..slots``) contains at least one trade. Slot 0 is the open.
    """
    s = session.slots_per_day
    day, minute = _day_and_minute(ticks, session)
    slot = np.ceil(minute / session.sampling_interval - 1e-9).astype(np.int64)
    ok = (day >= 0) & (day < session.days) & (slot >= 0) & (slot <= s)
    if (~ok).any():
        log.debug("%s: %d ticks outside the sessions ignored", ticks.symbol, int((~ok).sum()))
    day, slot, lp = day[ok], slot[ok], np.log(ticks.prices[ok])
    flat = day * (s + 1) + slot
    at_slot = np.full(session.days * (s + 1), np.nan)
    is_last = np.ones(flat.size, dtype=bool)
    is_last[:-1] = flat[1:] != flat[:-1]  # flat is non-decreasing for time-ordered ticks
    at_slot[flat[is_last]] = lp[is_last]
    at_slot = at_slot.reshape(session.days, s + 1)
    traded = np.isfinite(at_slot)
    # forward fill within each day
    idx = np.where(traded, np.arange(s + 1), -1)
    np.maximum.accumulate(idx, axis=1, out=idx)
    last = np.take_along_axis(at_slot, np.maximum(idx, 0), axis=1)
    last[idx < 0] = np.nan
    return last, traded, idx


def build_returns(ticks: TickSeries, session: SessionSpec, method: str = "MO1",
                  auctions=None) -> ReturnSeries:
    """Raw one-minute log-returns under one missing-observation convention.

    MO1 gives tradeless slots a zero return, MO2 marks them NA and lets the next
    traded slot span the gap, MO3 divides that spanning return by the square
    root of the gap length. Slots touching an auction are NA for every method,
    and the first slot of a day is measured from that day's open (no overnight
    returns).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method tag {method!r}")
    last, traded, idx = sample_prices(ticks, session)
    r = np.diff(last, axis=1)
    if method in ("MO2", "MO3"):
        r[~traded[:, 1:]] = np.nan
    if method == "MO3":
        gap = np.arange(1, session.slots_per_day + 1) - idx[:, :-1]
        with np.errstate(invalid="ignore"):
            r = r / np.sqrt(np.where(idx[:, :-1] >= 0, gap, 1))
    if auctions:
        r[auction_mask(auctions, session)] = np.nan
    empty = ~traded.any(axis=1)
    if empty.any():
        log.info("%s: %d days without trades", ticks.symbol, int(empty.sum()))
    return ReturnSeries(ticks.symbol, r.ravel(), method, session)


def check_splits(returns: ReturnSeries, bound: float = 0.2) -> list[int]:
    """Indices of returns larger than ``bound`` in absolute value (strict)."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    with np.errstate(invalid="ignore"):
        return [int(i) for i in np.flatnonzero(np.abs(returns.values) > bound)]


class SplitDetected(RuntimeError):
    def __init__(self, symbol, indices):
        super().__init__(f"{symbol}: |return| above split bound at indices {indices[:10]}")
        self.indices = indices


# ----------------------------------------------------------------------------
# intraday pattern


def intraday_pattern(raw: ReturnSeries) -> np.ndarray:
    """Average over days of absolute returns scaled by each day's std of absolute returns."""
    x = np.abs(raw.by_day())
    if raw.session.days < 2:
        raise ValueError("need at least two days to estimate the intraday pattern")
    with np.errstate(invalid="ignore", divide="ignore"):
        finite = np.isfinite(x)
        usable = finite.sum(axis=1) >= 2
        s_day = np.full(x.shape[0], np.nan)
        s_day[usable] = np.nanstd(x[usable], axis=1, ddof=1)
        valid_day = np.isfinite(s_day) & (s_day > 0)
        scaled = x[valid_day] / s_day[valid_day, None]
        counts = np.isfinite(scaled).sum(axis=0)
        zeta = np.nansum(scaled, axis=0) / np.where(counts > 0, counts, 1)
    bad = np.flatnonzero((counts == 0) | ~(zeta > 0))
    if bad.size:
        raise ValueError(f"undefined pattern slot(s) {bad[:10].tolist()}")
    return zeta


def deseasonalize(raw: ReturnSeries, session: SessionSpec | None = None) -> ReturnSeries:
    """Divide returns by the in-sample intraday volatility pattern."""
    zeta = intraday_pattern(raw)
    values = (raw.by_day() / zeta[None, :]).ravel()
    return ReturnSeries(raw.symbol, values, raw.method, raw.session, pattern=zeta,
                        meta=dict(raw.meta, deseasonalized=True))


@dataclass
class CleaningReport:
    symbol: str
    n_ticks: int
    outliers_removed: int
    auctions: list
    split_flags: dict


def prepare(ticks: TickSeries, session: SessionSpec, k=60, delta=0.10, c=3.0, gamma=0.05,
            auction_threshold=10.0, split_bound=0.2, clean=True):
    """Clean ticks and build deseasonalized MO1/MO2/MO3 series.

    Raises ``SplitDetected`` when any raw return exceeds the split bound.
    """
    cleaned = remove_outliers(ticks, k, delta, c, gamma) if clean else ticks
    auctions = detect_auctions(cleaned, auction_threshold, session.day_seconds)
    out, flags = {}, {}
    for m in METHODS:
        raw = build_returns(cleaned, session, m, auctions)
        flags[m] = check_splits(raw, split_bound)
        if flags[m]:
            raise SplitDetected(ticks.symbol, flags[m])
        out[m] = deseasonalize(raw)
    report = CleaningReport(ticks.symbol, len(ticks), len(ticks) - len(cleaned), auctions, flags)
    return out, report
