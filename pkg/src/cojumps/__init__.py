"""Jump detection, Hawkes modelling and cojump factor analysis for minute-level price data."""

from .detect import DetectionConfig, DetectionResult, detect_all, detect_jumps, ewma_abs_vol, ewma_bv_vol, intersect_jumps
from .events import EventSeries, discretize
from .factor import (FactorDecomposition, PoissonFactor2, cojump_tally, estimate_transmission, extract_factor,
                     fit_poisson_factor2, poisson_binomial_tail, simulate_factor_model, systemic_scan)
from .hawkes import FitReport, HawkesModel, fit, intensity, loglik_multi, loglik_uni, simulate
from .ingest import (ReturnSeries, SessionSpec, TickSeries, build_returns, check_splits, deseasonalize,
                     detect_auctions, prepare, remove_outliers)
from .marketsim import SimConfig, SimOutput, intertrade_sampler, simulate_market, size_power
from .mctests import ConfidenceBand, WindowStat, cj_stat, mc_band, mj_stat, poisson_cj_band, poisson_mj_band, run_test

__version__ = "0.1.0"
