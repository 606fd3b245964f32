"""Jump-robust EWMA volatility and threshold jump detection.

``sigma[t]`` is always built from returns strictly before ``t``. After the
warm-up, the recursions only feed on admissible returns: finite returns that
were not themselves flagged as jumps. When the latest return is not
admissible, the update reuses the most recent admissible one(s).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .events import EventSeries
from .ingest import METHODS, ReturnSeries

MU1 = math.sqrt(2.0 / math.pi)
ESTIMATORS = ("abs", "bv")
VARIANTS = tuple(itertools.product(METHODS, ESTIMATORS))


def ewma_weight(m: int = 60) -> float:
    return 2.0 / (m + 1)


@dataclass
class VolatilitySeries:
    values: np.ndarray
    estimator: str
    alpha: float
    theta: float
    warmup_end: int
    jump_flags: np.ndarray = field(repr=False, default=None)
    mu1: float = MU1


@dataclass
class DetectionConfig:
    theta: float = 4.0
    m: int = 60
    warmup: int = 60
    methods: tuple = VARIANTS

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if not self.methods:
            raise ValueError("need at least one detection variant")
        self.methods = tuple(tuple(x) for x in self.methods)

    @property
    def alpha(self) -> float:
        return ewma_weight(self.m)


@njit(cache=True)
def _robust_ewma(r, bipower, alpha, theta, warmup, exclude, mu1):
    n = r.size
    sigma = np.empty(n)
    flags = np.zeros(n, dtype=np.bool_)
    # seed from the first `warmup` finite returns
    acc = 0.0
    cnt = 0
    prev = np.nan
    warm_end = n
    seen = 0
    for t in range(n):
        x = r[t]
        if not np.isfinite(x):
            continue
        seen += 1
        if bipower:
            if np.isfinite(prev):
                acc += abs(x) * abs(prev)
                cnt += 1
            prev = x
        else:
            acc += abs(x)
            cnt += 1
        if seen == warmup:
            warm_end = t + 1
            break
    if cnt == 0:
        return sigma, flags, -1
    if bipower:
        state = acc / cnt / (mu1 * mu1)
    else:
        state = acc / cnt / mu1
    a1 = np.nan  # most recent admissible |r|
    a2 = np.nan  # the one before
    for t in range(n):
        sigma[t] = math.sqrt(state) if bipower else state
        x = r[t]
        admissible = False
        if np.isfinite(x):
            if t < warm_end:
                admissible = True
            else:
                if sigma[t] > 0 and abs(x) / sigma[t] > theta:
                    flags[t] = True
                elif not exclude[t]:
                    admissible = True
        if admissible:
            a2 = a1
            a1 = abs(x)
        if bipower:
            if np.isfinite(a2):
                state = alpha * a1 * a2 / (mu1 * mu1) + (1.0 - alpha) * state
        elif np.isfinite(a1):
            state = alpha * a1 / mu1 + (1.0 - alpha) * state
    return sigma, flags, warm_end


def _ewma(returns, estimator, alpha, theta, warmup, jump_flags):
    r = returns.values if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    if not np.isfinite(r).any():
        raise ValueError("all returns are NA")
    if not 0 < alpha < 1:
        raise ValueError("EWMA weight must lie in (0, 1)")
    exclude = np.zeros(r.size, dtype=bool) if jump_flags is None else np.asarray(jump_flags, dtype=bool)
    sigma, flags, warm_end = _robust_ewma(r, estimator == "bv", alpha, theta, warmup, exclude, MU1)
    if warm_end < 0:
        raise ValueError("not enough finite returns to seed the estimator")
    return VolatilitySeries(sigma, estimator, alpha, theta, int(warm_end), flags)


def ewma_abs_vol(returns, jump_flags=None, alpha: float = ewma_weight(60), theta: float = 4.0,
                 warmup: int = 60) -> VolatilitySeries:
    """Jump-robust EWMA of absolute returns, scaled by ``1/mu1``.

    ``jump_flags`` marks extra returns to keep out of the recursion; returns
    flagged by the threshold rule itself are always excluded.
    """
    return _ewma(returns, "abs", alpha, theta, warmup, jump_flags)


def ewma_bv_vol(returns, jump_flags=None, alpha: float = ewma_weight(60), theta: float = 4.0,
                warmup: int = 60) -> VolatilitySeries:
    """Jump-robust EWMA of products of the two latest admissible absolute returns."""
    return _ewma(returns, "bv", alpha, theta, warmup, jump_flags)


def detect_jumps(returns, vol: VolatilitySeries, theta: float = 4.0, symbol: str | None = None) -> EventSeries:
    """Minutes (1-based) where ``|r_t| / sigma_t > theta``, outside the warm-up."""
    r = returns.values if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    if r.size != vol.values.size:
        raise ValueError("returns and volatility are not aligned")
    with np.errstate(invalid="ignore", divide="ignore"):
        hit = np.isfinite(r) & (np.abs(r) / vol.values > theta)
    hit[:vol.warmup_end] = False
    idx = np.flatnonzero(hit)
    if symbol is None:
        symbol = returns.symbol if isinstance(returns, ReturnSeries) else ""
    return EventSeries(symbol, idx + 1, np.sign(r[idx]).astype(np.int8))


def intersect_jumps(series) -> EventSeries:
    """Minutes present in every input series."""
    series = list(series)
    if not series:
        raise ValueError("nothing to intersect")
    common = series[0].times
    for s in series[1:]:
        common = np.intersect1d(common, s.times)
    directions = None
    if all(s.directions is not None for s in series):
        dirs = np.stack([s.directions[np.searchsorted(s.times, common)] for s in series])
        if np.any(dirs != dirs[0]):
            raise ValueError("jump directions disagree at a common minute")
        directions = dirs[0]
    return EventSeries(series[0].symbol, common, directions)


@dataclass
class DetectionResult:
    symbol: str
    variants: dict
    vols: dict = field(repr=False, default_factory=dict)

    @property
    def jumps(self) -> EventSeries:
        return intersect_jumps(self.variants.values())

    def combined(self, methods=None, estimators=None) -> EventSeries:
        methods = methods or METHODS
        estimators = estimators or ESTIMATORS
        keys = [(m, e) for m in methods for e in estimators if (m, e) in self.variants]
        return intersect_jumps(self.variants[k] for k in keys)

    def method_mask(self):
        """Union of detected minutes with a 6-bit mask of the variants that fired.

        Bit order follows ``VARIANTS``: MO1/abs is bit 0, MO3/bv bit 5.
        """
        masks = {}
        directions = {}
        for bit, key in enumerate(VARIANTS):
            ev = self.variants.get(key)
            if ev is None:
                continue
            for t, d in zip(ev.times.tolist(), ev.directions.tolist()):
                masks[t] = masks.get(t, 0) | (1 << bit)
                directions[t] = d
        minutes = np.array(sorted(masks), dtype=np.int64)
        return minutes, np.array([directions[t] for t in minutes], dtype=np.int8), \
            np.array([masks[t] for t in minutes], dtype=np.int64)


def detect_all(series: dict, config: DetectionConfig | None = None) -> DetectionResult:
    """Run every configured (method, estimator) variant on deseasonalized returns."""
    config = config or DetectionConfig()
    variants, vols = {}, {}
    symbol = next(iter(series.values())).symbol
    for method, est in config.methods:
        r = series[method]
        fn = ewma_abs_vol if est == "abs" else ewma_bv_vol
        vol = fn(r, alpha=config.alpha, theta=config.theta, warmup=config.warmup)
        variants[(method, est)] = detect_jumps(r, vol, config.theta, symbol)
        vols[(method, est)] = vol
    return DetectionResult(symbol, variants, vols)
