"""Synthetic trades from a jump diffusion with GOU stochastic volatility.

Time is measured in days for the diffusion (``dt = 1/1440``); every day has a
1440-minute volatility grid of which the first ``minutes_per_day`` minutes form
the trading session. Log-prices move only during the session; trades are
thinned from the one-minute grid with a configurable intertrade-time law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .events import EventSeries
from .ingest import SessionSpec, TickSeries


# ----------------------------------------------------------------------------
# intertrade times


@dataclass
class IntertradeSampler:
    """I.i.d. gaps between trades, in seconds."""

    kind: str = "exponential"
    mean: float = 2.0
    shape: float = 1.0
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "empirical":
            if self.values is None or len(self.values) == 0:
                raise ValueError("empirical sampler needs a non-empty gap sample")
            self.values = np.asarray(self.values, dtype=float)
            if np.any(self.values <= 0):
                raise ValueError("intertrade gaps must be positive")
        elif self.kind in ("exponential", "weibull"):
            if self.mean <= 0 or self.shape <= 0:
                raise ValueError("mean and shape must be positive")
        else:
            raise ValueError(f"unknown intertrade sampler {self.kind!r}")

    @property
    def expected_gap(self) -> float:
        if self.kind == "empirical":
            return float(self.values.mean())
        return self.mean

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "exponential":
            return rng.exponential(self.mean, size)
        if self.kind == "weibull":
            scale = self.mean / math.gamma(1.0 + 1.0 / self.shape)
            return scale * rng.weibull(self.shape, size)
        return rng.choice(self.values, size=size, replace=True)


def intertrade_sampler(source) -> IntertradeSampler:
    """Build a sampler from ``{"kind": ..., ...}``, a path to a one-column gap CSV, or a sampler."""
    if isinstance(source, IntertradeSampler):
        return source
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        from .io import read_gaps

        return IntertradeSampler("empirical", values=read_gaps(source))
    source = dict(source)
    return IntertradeSampler(**source)


# ----------------------------------------------------------------------------
# configuration


def default_pattern(minutes: int = 505) -> np.ndarray:
    """U-shaped intraday volatility multiplier with unit mean square."""
    m = np.arange(minutes) + 0.5
    f = 1.0 + 1.5 * np.exp(-m / 30.0) + 0.8 * np.exp(-(minutes - m) / 40.0)
    return f / np.sqrt(np.mean(f * f))


@dataclass
class SimConfig:
    days: int = 4400
    minutes_per_day: int = 505
    grid_minutes: int = 1440
    mu: float = 0.0
    noise_std: float = 1e-5 / 1440
    jump_rate: float = 3.0
    jump_multiplier: tuple = ("uniform", 4.5, 8.0)
    gou_a: float = 0.6802
    gou_b: float = 0.1
    gou_s: float = 0.25
    rho: float = -0.62
    intertrade: object = field(default_factory=lambda: {"kind": "exponential", "mean": 2.0})
    pattern: np.ndarray | None = None
    price0: float = 10.0
    tick_mode: str = "compact"
    seed: int = 0

    def __post_init__(self):
        if self.days <= 0 or self.minutes_per_day <= 0 or self.minutes_per_day > self.grid_minutes:
            raise ValueError("invalid session layout")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if self.jump_rate < 0 or self.noise_std < 0:
            raise ValueError("jump rate and noise must be non-negative")
        if self.tick_mode not in ("compact", "full"):
            raise ValueError("tick_mode must be 'compact' or 'full'")
        if self.pattern is None:
            self.pattern = default_pattern(self.minutes_per_day)
        self.pattern = np.asarray(self.pattern, dtype=float)
        if self.pattern.size != self.minutes_per_day or np.any(self.pattern <= 0):
            raise ValueError("pattern must hold one positive factor per session minute")

    @property
    def dt(self) -> float:
        return 1.0 / self.grid_minutes

    @property
    def session(self) -> SessionSpec:
        return SessionSpec(self.minutes_per_day, self.days)

    @property
    def stationary_logvar_mean(self) -> float:
        return -self.gou_a / self.gou_b

    def draw_multiplier(self, rng, size):
        kind, *args = self.jump_multiplier
        if kind == "uniform":
            return rng.uniform(args[0], args[1], size)
        if kind == "constant":
            return np.full(size, float(args[0]))
        if kind == "pareto":
            # threshold-exceedance law: scale * U^(-1/shape), all draws above `scale`
            scale, shape = args
            return scale * rng.random(size) ** (-1.0 / shape)
        if kind == "empirical":
            return rng.choice(np.asarray(args[0], dtype=float), size=size, replace=True)
        raise ValueError(f"unknown jump multiplier law {kind!r}")


@dataclass
class SimOutput:
    ticks: TickSeries
    true_jumps: EventSeries
    jump_sizes: np.ndarray
    true_vol: np.ndarray
    session: SessionSpec
    logprice: np.ndarray = field(repr=False, default=None)
    shocks: tuple = field(repr=False, default=None)


# ----------------------------------------------------------------------------
# simulation


def simulate_logvar(cfg: SimConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """Euler path of ``log sigma^2`` on the full minute grid and its Gaussian shocks."""
    n = cfg.days * cfg.grid_minutes
    dt = cfg.dt
    z = rng.standard_normal(n)
    phi = 1.0 - cfg.gou_b * dt
    stat_sd = cfg.gou_s / math.sqrt(2.0 * cfg.gou_b)
    x0 = cfg.stationary_logvar_mean + stat_sd * rng.standard_normal()
    u = -cfg.gou_a * dt + cfg.gou_s * math.sqrt(dt) * z
    # x[i+1] = phi * x[i] + u[i]
    x, _ = signal.lfilter([1.0], [1.0, -phi], u[:-1], zi=[phi * x0])
    return np.concatenate([[x0], x]), z


def simulate_market(cfg: SimConfig) -> SimOutput:
    """Simulate the efficient price, plant jumps and thin it into trades.

    Deterministic for a given configuration (including ``seed``).
    """
    rng = np.random.default_rng(cfg.seed)
    sampler = intertrade_sampler(cfg.intertrade)
    m, g, days = cfg.minutes_per_day, cfg.grid_minutes, cfg.days
    logvar, z_vol = simulate_logvar(cfg, rng)
    logvar = logvar.reshape(days, g)[:, :m]
    z_vol = z_vol.reshape(days, g)[:, :m]
    sigma = np.exp(0.5 * logvar)
    spot = sigma * cfg.pattern[None, :] * math.sqrt(cfg.dt)  # per-minute std of slot j+1
    z_perp = rng.standard_normal((days, m))
    dw = cfg.rho * z_vol + math.sqrt(1.0 - cfg.rho ** 2) * z_perp
    incr = cfg.mu * cfg.dt + spot * dw

    n_jumps = rng.poisson(cfg.jump_rate, size=days)
    jump_slots, jump_sizes = [], []
    for d in range(days):
        k = min(int(n_jumps[d]), m)
        if k == 0:
            continue
        slots = np.sort(rng.choice(m, size=k, replace=False))
        size = cfg.draw_multiplier(rng, k) * spot[d, slots] * rng.choice([-1.0, 1.0], size=k)
        incr[d, slots] += size
        jump_slots.append(d * m + slots + 1)
        jump_sizes.append(size)
    jt = np.concatenate(jump_slots) if jump_slots else np.zeros(0, dtype=np.int64)
    js = np.concatenate(jump_sizes) if jump_sizes else np.zeros(0)

    x = np.empty((days, m + 1))
    x[:, 0] = 0.0
    np.cumsum(incr, axis=1, out=x[:, 1:])
    x += math.log(cfg.price0) + np.concatenate([[0.0], np.cumsum(incr.sum(axis=1))[:-1]])[:, None]

    ticks = _thin(cfg, x, sampler, rng)
    true = EventSeries("sim", jt, np.sign(js).astype(np.int8))
    return SimOutput(ticks, true, js, spot.ravel(), cfg.session, x, (z_vol, dw))


def _thin(cfg: SimConfig, x: np.ndarray, sampler: IntertradeSampler, rng) -> TickSeries:
    m = cfg.minutes_per_day
    horizon = m * 60.0
    day_s = cfg.session.day_seconds
    batch = int(1.3 * horizon / sampler.expected_gap) + 64
    times, prices = [], []
    for d in range(cfg.days):
        gaps = sampler.draw(rng, batch)
        t = np.concatenate([[0.0], np.cumsum(gaps)])
        while t[-1] <= horizon:
            t = np.concatenate([t, t[-1] + np.cumsum(sampler.draw(rng, batch))])
        t = t[t <= horizon]
        slot = np.ceil(t / 60.0 - 1e-9).astype(np.int64)
        if cfg.tick_mode == "compact":
            first = np.ones(t.size, dtype=bool)
            first[1:] = slot[1:] != slot[:-1]
            last = np.ones(t.size, dtype=bool)
            last[:-1] = slot[1:] != slot[:-1]
            keep = first | last
            t, slot = t[keep], slot[keep]
        lp = x[d, slot] + cfg.noise_std * rng.standard_normal(t.size)
        times.append(d * day_s + t)
        prices.append(np.exp(lp))
    return TickSeries("sim", np.concatenate(times), np.concatenate(prices))


# ----------------------------------------------------------------------------
# evaluation


def _match(detected: np.ndarray, truth: np.ndarray, window: int):
    if truth.size == 0 or detected.size == 0:
        return np.zeros(detected.size, dtype=bool), np.zeros(truth.size, dtype=bool)
    pos = np.searchsorted(truth, detected)
    left = np.clip(pos - 1, 0, truth.size - 1)
    right = np.clip(pos, 0, truth.size - 1)
    dist = np.minimum(np.abs(detected - truth[left]), np.abs(detected - truth[right]))
    det_ok = dist <= window
    pos = np.searchsorted(detected, truth)
    left = np.clip(pos - 1, 0, detected.size - 1)
    right = np.clip(pos, 0, detected.size - 1)
    dist = np.minimum(np.abs(truth - detected[left]), np.abs(truth - detected[right]))
    return det_ok, dist <= window


def size_power(sim: SimOutput, detection, match_window: int = 0) -> dict:
    """Size and power per detection variant and per intersection of variants.

    ``detection`` is a ``DetectionResult`` (or a dict of name -> EventSeries).
    Size is false positives over minutes without a true jump; power is the
    fraction of true jumps hit by a detection within ``match_window`` minutes.
    """
    from .detect import ESTIMATORS, DetectionResult
    from .ingest import METHODS

    if isinstance(detection, DetectionResult):
        series = {f"{m}/{e}": ev for (m, e), ev in detection.variants.items()}
        for mth in METHODS:
            if all((mth, e) in detection.variants for e in ESTIMATORS):
                series[f"{mth}/all"] = detection.combined(methods=[mth])
        for est in ESTIMATORS:
            if all((mth, est) in detection.variants for mth in METHODS):
                series[f"all/{est}"] = detection.combined(estimators=[est])
        series["all/all"] = detection.jumps
    else:
        series = dict(detection)
    truth = np.asarray(sim.true_jumps.times)
    n = sim.session.n
    quiet = n - truth.size
    table = {}
    for name, ev in series.items():
        det = np.asarray(ev.times)
        det_ok, truth_hit = _match(det, truth, match_window)
        fp = int((~det_ok).sum())
        table[name] = {
            "size": fp / quiet if quiet else 0.0,
            "power": float(truth_hit.mean()) if truth.size else 0.0,
            "rp": int(det_ok.sum()),
            "fp": fp,
            "n_true": int(truth.size),
        }
    return table


def run_pipeline(sim: SimOutput, clean: bool = True, detection_config=None, **clean_kwargs):
    """Clean, sample, deseasonalize and detect on simulated trades."""
    from .detect import detect_all
    from .ingest import prepare

    series, report = prepare(sim.ticks, sim.session, clean=clean, **clean_kwargs)
    return detect_all(series, detection_config), report
