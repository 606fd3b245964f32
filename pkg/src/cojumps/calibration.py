"""Reference parameter sets estimated on Italian blue-chip jump data (minutes as time unit).

They serve as realistic defaults for simulations and as regression targets.
"""

from __future__ import annotations

import numpy as np

from .hawkes import HawkesModel

SAMPLE_MINUTES = 44_440  # 88 trading days of 505 minutes

# univariate Hawkes fit of the Generali jump series
GENERALI = HawkesModel.univariate(2.1e-3, 3.1e-2, 2.5e-1)
GENERALI_POISSON_RATE = 2.4e-3

# common factor of the 20-stock panel
FACTOR = HawkesModel.univariate(2.0e-3, 4.9e-2, 3.3e-1)

# per stock: ISIN, transmission probability, lambda (1e-3), alpha (1e-2), beta (1e-1)
_PANEL = [
    ("IT0000062072", 0.31, 1.4, 2.6, 2.2),
    ("IT0000062957", 0.12, 1.1, 1.1, 2.3),
    ("IT0000064482", 0.10, 2.2, 3.7, 2.6),
    ("IT0000068525", 0.24, 1.2, 0.9, 0.3),
    ("IT0000072618", 0.48, 1.6, 0.6, 1.0),
    ("IT0001063210", 0.08, 1.0, 0.6, 0.6),
    ("IT0001334587", 0.17, 2.9, 6.2, 3.0),
    ("IT0001976403", 0.31, 1.7, 2.8, 1.7),
    ("IT0003128367", 0.39, 2.6, 2.4, 1.2),
    ("IT0003132476", 0.37, 2.2, 1.3, 0.9),
    ("IT0003487029", 0.18, 1.0, 5.1, 3.9),
    ("IT0003497168", 0.31, 1.8, 0.7, 0.4),
    ("IT0003856405", 0.11, 1.6, 0.8, 0.7),
    ("IT0004176001", 0.14, 0.9, 0.7, 0.2),
    ("IT0004231566", 0.16, 1.7, 1.8, 1.5),
    ("IT0004623051", 0.15, 1.8, 2.4, 1.0),
    ("IT0004644743", 0.21, 1.4, 3.6, 1.9),
    ("IT0004781412", 0.37, 1.4, 1.0, 0.5),
    ("LU0156801721", 0.17, 0.8, 1.0, 0.7),
    ("NL0000226223", 0.22, 1.0, 3.2, 1.2),
]

PANEL_SYMBOLS = [row[0] for row in _PANEL]
TRANSMISSION = np.array([row[1] for row in _PANEL])
IDIOSYNCRATIC = [HawkesModel.univariate(lam * 1e-3, a * 1e-2, b * 1e-1) for _, _, lam, a, b in _PANEL]

# pair used for the bivariate Poisson factor example
PAIR_COUNTS = {"n1": 103, "n2": 127, "n12": 26}

# trade rates of a liquid and an illiquid name, mean seconds between trades
LIQUID_MEAN_GAP = 1.67
ILLIQUID_MEAN_GAP = 7.2
