"""Multi-scale multiple-jump (MJ) and cross-jump (CJ) window statistics and their bands.

Windows are disjoint, left aligned at minute 1 and of length ``w``; window ``i``
covers minutes ``(i-1)w+1 .. iw`` (equivalently continuous times in
``((i-1)w, iw]``). The trailing partial window is discarded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

DEFAULT_LEVELS = (0.95, 0.99)


def _window_index(times, w: int, n: int) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    idx = np.ceil(t / w).astype(np.int64) - 1
    return idx[(idx >= 0) & (idx < n // w)]


def mj_stat(times, w: int, n: int) -> float:
    """Fraction of the ``n // w`` windows holding at least two events."""
    if not 1 <= w <= n:
        raise ValueError("window length must satisfy 1 <= w <= N")
    _, counts = np.unique(_window_index(times, w, n), return_counts=True)
    return float(np.count_nonzero(counts >= 2)) / (n // w)


def cj_stat(a, b, w: int, n: int) -> float:
    """Fraction of windows in which both series have at least one event."""
    if not 1 <= w <= n:
        raise ValueError("window length must satisfy 1 <= w <= N")
    common = np.intersect1d(_window_index(a, w, n), _window_index(b, w, n))
    return float(common.size) / (n // w)


@dataclass
class WindowStat:
    w: np.ndarray
    values: np.ndarray
    n: int

    @classmethod
    def mj(cls, times, w_grid, n):
        w = np.asarray(w_grid, dtype=int)
        return cls(w, np.array([mj_stat(times, int(x), n) for x in w]), n)

    @classmethod
    def cj(cls, a, b, w_grid, n):
        w = np.asarray(w_grid, dtype=int)
        return cls(w, np.array([cj_stat(a, b, int(x), n) for x in w]), n)


@dataclass
class ConfidenceBand:
    """Per-window mean and two-sided bands, already Bonferroni adjusted over the grid."""

    w: np.ndarray
    mean: np.ndarray
    lower: dict
    upper: dict
    source: str
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def levels(self):
        return sorted(self.lower)

    def to_rows(self, observed=None):
        rows = []
        for i, w in enumerate(self.w):
            row = {"w": int(w), "observed": "" if observed is None else float(observed[i]),
                   "mean": float(self.mean[i])}
            for lvl in (0.95, 0.99):
                tag = int(round(lvl * 100))
                row[f"lo{tag}"] = float(self.lower[lvl][i]) if lvl in self.lower else ""
                row[f"hi{tag}"] = float(self.upper[lvl][i]) if lvl in self.upper else ""
            row["source"] = self.source
            rows.append(row)
        return rows


def bonferroni_alpha(level: float, n_tests: int) -> float:
    """Per-test significance for a family-wise ``level`` over ``n_tests`` hypotheses."""
    return (1.0 - level) / n_tests


def _normal_band(w, mean, var, levels, source):
    sd = np.sqrt(var)
    lower, upper = {}, {}
    for lvl in levels:
        z = stats.norm.isf(bonferroni_alpha(lvl, len(w)) / 2)
        lower[lvl] = np.clip(mean - z * sd, 0.0, 1.0)
        upper[lvl] = np.clip(mean + z * sd, 0.0, 1.0)
    return ConfidenceBand(np.asarray(w), mean, lower, upper, source)


def poisson_mj_mean(lam: float, w) -> np.ndarray:
    x = lam * np.atleast_1d(np.asarray(w, dtype=float))
    # 1 - e^{-x}(1 + x), written to stay accurate for small x
    return -np.expm1(-x) - x * np.exp(-x)


def _binomial_band(w, p, n, levels, source):
    windows = n // w
    lower, upper = {}, {}
    for lvl in levels:
        a = bonferroni_alpha(lvl, len(w)) / 2
        lower[lvl] = stats.binom.ppf(a, windows, p) / windows
        upper[lvl] = stats.binom.ppf(1 - a, windows, p) / windows
    return ConfidenceBand(np.asarray(w), p, lower, upper, source)


def _analytic_band(w, p, n, levels, method):
    if method == "normal":
        return _normal_band(w, p, (p - p * p) / (n // w), levels, "analytic-poisson")
    if method == "binomial":
        # window counts are exactly Binomial(n // w, p) for a Poisson null
        return _binomial_band(w, p, n, levels, "analytic-poisson-binomial")
    raise ValueError(f"unknown band method {method!r}")


def poisson_mj_band(lam: float, w_grid, n: int, levels=DEFAULT_LEVELS, method: str = "normal") -> ConfidenceBand:
    """Analytic band for the MJ estimator under a Poisson process of rate ``lam``.

    ``method="normal"`` is the central-limit band; ``"binomial"`` uses exact
    quantiles of the window count, which matter when few windows are expected
    to qualify.
    """
    w = np.asarray(w_grid, dtype=int)
    return _analytic_band(w, poisson_mj_mean(lam, w), n, levels, method)


def poisson_cj_band(lam_l: float, lam_k: float, w_grid, n: int, levels=DEFAULT_LEVELS,
                    method: str = "normal") -> ConfidenceBand:
    """Analytic band for the CJ estimator under two independent Poisson processes."""
    w = np.asarray(w_grid, dtype=int)
    q = lambda lam: -np.expm1(-lam * w.astype(float))
    return _analytic_band(w, q(lam_l) * q(lam_k), n, levels, method)


def _quantile_band(w, samples, levels, source):
    lower, upper = {}, {}
    for lvl in levels:
        a = bonferroni_alpha(lvl, len(w)) / 2
        lower[lvl] = np.quantile(samples, a, axis=0)
        upper[lvl] = np.quantile(samples, 1 - a, axis=0)
    return ConfidenceBand(np.asarray(w), samples.mean(axis=0), lower, upper, source, samples)


def mc_band(null_model: Callable[[np.random.Generator], Sequence], stat: str, w_grid, n: int,
            n_mc: int = 10_000, levels=DEFAULT_LEVELS, seed: int = 0, name: str = "model") -> ConfidenceBand:
    """Empirical band from ``n_mc`` samples of a null model.

    ``null_model(rng)`` returns a list of event-time arrays on ``(0, n]``: one
    array for ``stat="MJ"``, at least two for ``stat="CJ"`` (the first two are used).
    Replica ``i`` draws from its own stream spawned from ``seed``.
    """
    if n_mc < 2:
        raise ValueError("need at least two Monte-Carlo samples")
    stat = stat.upper()
    w = np.asarray(w_grid, dtype=int)
    samples = np.empty((n_mc, w.size))
    for i, ss in enumerate(np.random.SeedSequence(seed).spawn(n_mc)):
        ev = null_model(np.random.default_rng(ss))
        if stat == "MJ":
            samples[i] = [mj_stat(ev[0], int(x), n) for x in w]
        elif stat == "CJ":
            samples[i] = [cj_stat(ev[0], ev[1], int(x), n) for x in w]
        else:
            raise ValueError(f"unknown statistic {stat!r}")
    return _quantile_band(w, samples, levels, f"monte-carlo({name},{n_mc})")


@dataclass
class Verdict:
    level: float
    reject: bool
    offending_w: list


def run_test(observed: WindowStat, band: ConfidenceBand) -> dict[float, Verdict]:
    """Reject at a level iff some window length falls outside that level's band."""
    if not np.array_equal(np.asarray(observed.w), np.asarray(band.w)):
        raise ValueError("observed statistic and band use different window grids")
    out = {}
    for lvl in band.levels:
        bad = (observed.values < band.lower[lvl]) | (observed.values > band.upper[lvl])
        out[lvl] = Verdict(lvl, bool(bad.any()), [int(x) for x in band.w[bad]])
    return out


# ----------------------------------------------------------------------------
# simulators usable as null models


def _finish(arrays, n, discretize):
    if not discretize:
        return arrays
    from .events import discretize as to_minutes

    return [to_minutes(a, n) for a in arrays]


def poisson_null(rates, n: int, discretize: bool = False):
    """Independent homogeneous Poisson streams on ``(0, n]``.

    With ``discretize`` the times are mapped to integer minutes, which
    collapses events sharing a minute the way detected jump series do.
    """
    rates = np.atleast_1d(rates)

    def draw(rng):
        out = []
        for lam in rates:
            k = rng.poisson(lam * n)
            out.append(np.sort(rng.uniform(0.0, n, size=k)))
        return _finish(out, n, discretize)

    return draw


def hawkes_null(models, n: int, discretize: bool = False):
    """Independent univariate Hawkes streams (one model per stream) or one K-variate model."""
    from . import hawkes

    if isinstance(models, hawkes.HawkesModel):
        return lambda rng: _finish(hawkes.simulate(models, n, rng), n, discretize)
    return lambda rng: _finish([hawkes.simulate_uni(*m.uni(), n, rng) for m in models], n, discretize)
