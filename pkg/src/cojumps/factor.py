"""Common-factor models for simultaneous jumps across stocks.

Two models live here: a bivariate Poisson factor with closed-form calibration
and an N-stock Hawkes factor, where a factor process broadcasts each of its
events to stock ``s`` with probability ``p_s`` on top of independent
idiosyncratic Hawkes streams.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import hawkes
from .events import EventSeries, discretize
from .hawkes import HawkesModel


# ----------------------------------------------------------------------------
# bivariate Poisson factor


@dataclass(frozen=True)
class PoissonFactor2:
    lambda_f: float
    p1: float
    p2: float

    def expected_counts(self, horizon: float) -> tuple[float, float, float]:
        """Expected ``(n1, n2, n12)`` over ``horizon`` minutes."""
        nf = self.lambda_f * horizon
        return self.p1 * nf, self.p2 * nf, self.p1 * self.p2 * nf

    def simulate(self, horizon: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
        """Factor events at Poisson minutes, each thinned independently into the two stocks."""
        rng = np.random.default_rng(seed)
        k = rng.poisson(self.lambda_f * horizon)
        f = discretize(rng.uniform(0, horizon, size=k), horizon)
        a = f[rng.random(f.size) < self.p1]
        b = f[rng.random(f.size) < self.p2]
        return a, b


def fit_poisson_factor2(n1: int, n2: int, n12: int, horizon: float) -> PoissonFactor2:
    """Invert ``n1 = p1 lF T``, ``n2 = p2 lF T``, ``n12 = p1 p2 lF T``."""
    if n12 <= 0:
        raise ValueError("no coupling identifiable: zero cojumps")
    if n12 > min(n1, n2):
        raise ValueError("cojumps cannot exceed either jump count")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    return PoissonFactor2(n1 * n2 / (n12 * horizon), n12 / n2, n12 / n1)


# ----------------------------------------------------------------------------
# cojump tallies


@dataclass
class CojumpTally:
    counts: np.ndarray  # J_t for t = 1..N
    histogram: dict  # J -> number of minutes with exactly J jumping stocks (J >= 1)

    @property
    def max_j(self) -> int:
        return int(self.counts.max()) if self.counts.size else 0

    def rows(self):
        idx = np.flatnonzero(self.counts)
        return [(int(i + 1), int(self.counts[i])) for i in idx]


def _counts(events, n_minutes: int) -> np.ndarray:
    j = np.zeros(n_minutes, dtype=np.int64)
    for ev in events:
        t = np.asarray(getattr(ev, "times", ev), dtype=np.int64)
        t = t[(t >= 1) & (t <= n_minutes)]
        j[t - 1] += 1  # times are unique within a series
    return j


def cojump_tally(events, n_minutes: int) -> CojumpTally:
    """Number of stocks jumping in each minute, and how many minutes see each count."""
    j = _counts(events, n_minutes)
    values, freq = np.unique(j[j > 0], return_counts=True)
    return CojumpTally(j, {int(v): int(f) for v, f in zip(values, freq)})


# ----------------------------------------------------------------------------
# Poisson-binomial tails


@njit(cache=True)
def _pb_tails(probs, observed):
    m, n = probs.shape
    out = np.empty(m)
    pmf = np.empty(n + 1)
    for r in range(m):
        j = observed[r]
        if j <= 0:
            out[r] = 1.0
            continue
        pmf[:] = 0.0
        pmf[0] = 1.0
        for s in range(n):
            p = probs[r, s]
            for k in range(s + 1, 0, -1):
                pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p
            pmf[0] *= 1.0 - p
        tail = 0.0
        for k in range(j, n + 1):
            tail += pmf[k]
        out[r] = min(tail, 1.0)
    return out


def poisson_binomial_pmf(p) -> np.ndarray:
    """Distribution of a sum of independent Bernoulli(p_s) variables, by convolution."""
    pmf = np.array([1.0])
    for x in np.asarray(p, dtype=float):
        pmf = np.convolve(pmf, [1.0 - x, x])
    return pmf


def poisson_binomial_tail(p, j) -> np.ndarray:
    """``P(J >= j)`` for success vector(s) ``p`` (one row per test)."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    j = np.broadcast_to(np.asarray(j, dtype=np.int64), (p.shape[0],)).copy()
    if np.any((p < 0) | (p > 1)):
        raise ValueError("success probabilities must lie in [0, 1]")
    out = _pb_tails(np.ascontiguousarray(p), j)
    return out if out.size > 1 else out[:1]


# ----------------------------------------------------------------------------
# systemic scan and factor extraction


_CLAMP = 1.0 - 1e-12


@dataclass
class ScanResult:
    rejected: np.ndarray  # rejected minutes (1-based)
    tails: np.ndarray  # upper tails at the rejected minutes
    counts: np.ndarray  # J_t
    threshold: float  # per-minute significance
    clamped: int = 0

    @property
    def min_rejected_j(self) -> int | None:
        """Smallest simultaneous count that was rejected (the empirical detectability threshold)."""
        return int(self.counts[self.rejected - 1].min()) if self.rejected.size else None


def jump_probabilities(events, models, horizon: int, dt: float = 1.0) -> np.ndarray:
    """``(horizon, N)`` matrix of ``I_s(t) dt`` from each stock's history strictly before ``t``."""
    cols = []
    for ev, m in zip(events, models):
        lam, alpha, beta = m.uni() if isinstance(m, HawkesModel) else m
        cols.append(hawkes.intensity_on_grid(lam, alpha, beta, np.asarray(getattr(ev, "times", ev)), horizon) * dt)
    return np.column_stack(cols)


def systemic_scan(events, models, horizon: int, significance: float = 0.01, dt: float = 1.0) -> ScanResult:
    """Minutes whose simultaneous jump count is too large for independent stocks.

    A minute is rejected when the one-sided Poisson-binomial tail of its
    observed count falls below ``significance / horizon``.
    """
    if len(events) != len(models):
        raise ValueError("need one model per stock")
    counts = _counts(events, horizon)
    cand = np.flatnonzero(counts >= 1)
    probs = jump_probabilities(events, models, horizon, dt)[cand]
    clamped = int(np.count_nonzero(probs >= 1.0))
    if clamped:
        warnings.warn(f"{clamped} jump probabilities >= 1 clamped; reduce dt", RuntimeWarning, stacklevel=2)
        probs = np.minimum(probs, _CLAMP)
    level = significance / horizon
    tails = _pb_tails(np.ascontiguousarray(probs), counts[cand]) if cand.size else np.zeros(0)
    hit = tails < level
    return ScanResult(cand[hit] + 1, tails[hit], counts, level, clamped)


@dataclass
class FactorDecomposition:
    factor_events: EventSeries
    idiosyncratic: list
    factor_model: HawkesModel | None
    idio_models: list
    p: np.ndarray
    iterations: int
    original_counts: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def removed_counts(self) -> np.ndarray:
        """``n_s - n'_s`` per stock."""
        return self.original_counts - np.array([len(e) for e in self.idiosyncratic])

    def to_dict(self) -> dict:
        return {
            "factor_events": self.factor_events.times.astype(int).tolist(),
            "factor_model": None if self.factor_model is None else self.factor_model.to_dict(),
            "iterations": self.iterations,
            "stocks": [
                {"symbol": ev.symbol, "idio_events": ev.times.astype(int).tolist(), "p_s": float(p),
                 "model": None if m is None else m.to_dict()}
                for ev, p, m in zip(self.idiosyncratic, self.p, self.idio_models)
            ],
            "diagnostics": self.diagnostics,
        }


def _fit_all(series, horizon, seed):
    return [hawkes.fit_uni(s.times, horizon, seed=seed).model for s in series]


def _direction_agreement(original, factor_minutes):
    agree, total = 0, 0
    for t in factor_minutes:
        dirs = [ev.directions[np.searchsorted(ev.times, t)] for ev in original
                if ev.directions is not None and np.isin(t, ev.times)]
        if len(dirs) >= 2:
            total += 1
            agree += int(len(set(dirs)) == 1)
    return agree / total if total else None


def extract_factor(events, horizon: int, significance: float = 0.01, max_iters: int = 20,
                   dt: float = 1.0, seed: int = 0) -> FactorDecomposition:
    """Peel systemic minutes off a panel of jump series until none remain.

    Each pass refits a univariate Hawkes model per stock on the current
    idiosyncratic events, scans for systemic minutes and removes every stock's
    event at those minutes. The factor and residual series are fitted at the end
    and transmission probabilities estimated from the removed counts.
    """
    events = [e if isinstance(e, EventSeries) else EventSeries(f"s{i}", np.asarray(e, dtype=np.int64))
              for i, e in enumerate(events)]
    if any(len(e) < 5 for e in events):
        raise ValueError("need at least 5 events per stock")
    current = list(events)
    factor = np.zeros(0, dtype=np.int64)
    passes = 0
    for passes in range(1, max_iters + 1):
        models = _fit_all(current, horizon, seed)
        scan = systemic_scan(current, models, horizon, significance, dt)
        if scan.rejected.size == 0:
            break
        factor = np.union1d(factor, scan.rejected)
        current = [_drop(ev, scan.rejected) for ev in current]
        if any(len(e) < 5 for e in current):
            raise ValueError("extraction left a stock with fewer than 5 events")
    else:
        warnings.warn(f"factor extraction hit max_iters={max_iters}", RuntimeWarning, stacklevel=2)
    idio_models = _fit_all(current, horizon, seed)
    original = np.array([len(e) for e in events])
    diag = {"passes": passes, "min_rejected_count": None, "direction_agreement": None}
    if factor.size:
        diag["min_rejected_count"] = int(_counts(events, horizon)[factor - 1].min())
        diag["direction_agreement"] = _direction_agreement(events, factor)
    factor_model = None
    if factor.size >= 5:
        factor_model = hawkes.fit_uni(factor, horizon, seed=seed).model
    decomp = FactorDecomposition(EventSeries("factor", factor), current, factor_model, idio_models,
                                 np.zeros(len(events)), passes, original, diag)
    if factor.size == 0:
        warnings.warn("no systemic component detected", RuntimeWarning, stacklevel=2)
    elif factor_model is not None:
        decomp.p = estimate_transmission(decomp, horizon)
    else:
        # too few factor events for a Hawkes fit: fall back to the empirical frequency
        decomp.p = np.clip(decomp.removed_counts / factor.size, 0.0, 1.0)
    return decomp


def _drop(ev: EventSeries, minutes) -> EventSeries:
    keep = ~np.isin(ev.times, minutes)
    d = None if ev.directions is None else ev.directions[keep]
    return EventSeries(ev.symbol, ev.times[keep], d, dict(ev.meta))


def estimate_transmission(decomp: FactorDecomposition, horizon: float) -> np.ndarray:
    """Match each stock's removed-event count to its expected share of factor jumps."""
    removed = decomp.removed_counts.astype(float)
    if decomp.factor_model is None:
        return np.zeros(removed.size)
    expected = float(decomp.factor_model.expected_count(horizon)[0])
    p = removed / expected
    if np.any((p < 0) | (p > 1)):
        warnings.warn("transmission probabilities outside [0, 1] clipped", RuntimeWarning, stacklevel=2)
    return np.clip(p, 0.0, 1.0)


# ----------------------------------------------------------------------------
# simulation


@dataclass
class FactorSample:
    stocks: list  # EventSeries per stock, integer minutes
    factor: EventSeries  # factor minutes
    transmitted: list  # per stock, factor minutes copied into it
    idiosyncratic: list  # per stock, its own minutes before the union


def simulate_factor_model(factor: HawkesModel, p, idio, horizon: int, seed=None) -> FactorSample:
    """Factor Hawkes events broadcast with probabilities ``p`` plus idiosyncratic Hawkes streams.

    Everything is discretized to integer minutes; a factor copy landing on a
    minute where the stock already has an idiosyncratic jump counts once.
    """
    p = np.asarray(p, dtype=float)
    if len(idio) != p.size:
        raise ValueError("need one idiosyncratic model per transmission probability")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("transmission probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    f = discretize(hawkes.simulate(factor, horizon, rng)[0], horizon)
    stocks, sent, own_all = [], [], []
    for s, model in enumerate(idio):
        copy = f[rng.random(f.size) < p[s]]
        lam, alpha, beta = model.uni()
        own = discretize(hawkes.simulate_uni(lam, alpha, beta, horizon, rng), horizon) if lam > 0 else np.zeros(0, np.int64)
        stocks.append(EventSeries(f"s{s}", np.union1d(copy, own).astype(np.int64)))
        sent.append(copy)
        own_all.append(own)
    return FactorSample(stocks, EventSeries("factor", f), sent, own_all)
