"""INI configuration with one section per pipeline stage."""

from __future__ import annotations

import configparser
import io
from pathlib import Path

DEFAULTS = {
    "run": {"seed": "0"},
    "session": {"minutes_per_day": "505", "days": ""},
    "clean": {"enabled": "true", "k": "60", "delta": "0.10", "c": "3.0", "gamma": "0.05"},
    "auction": {"threshold_min": "10"},
    "split": {"bound": "0.2"},
    "detect": {"theta": "4.0", "m": "60", "warmup": "60", "methods": "all"},
    "hawkes": {"anneal_restarts": "100", "anneal_steps": "200", "paper_convention": "false"},
    "test": {"w_min": "1", "w_max": "30", "n_mc": "10000", "levels": "0.95, 0.99",
             "null": "hawkes", "stat": "MJ", "discretize": "true"},
    "factor": {"significance": "0.01", "max_iters": "20", "dt": "1.0"},
    "sim": {"days": "4400", "minutes_per_day": "505", "grid_minutes": "1440", "mu": "0.0",
            "noise_std": repr(1e-5 / 1440), "jump_rate": "3.0", "jump_multiplier": "uniform, 4.5, 8.0",
            "gou_a": "0.6802", "gou_b": "0.1", "gou_s": "0.25", "rho": "-0.62",
            "intertrade": "exponential", "intertrade_mean": "1.67", "intertrade_shape": "1.0",
            "intertrade_file": "", "price0": "10.0", "tick_mode": "compact", "match_window": "0"},
}


def load(path=None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    cfg.read_dict(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        cfg.read(path, encoding="utf-8")
    unknown = set(cfg.sections()) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config sections: {', '.join(sorted(unknown))}")
    return cfg


def snapshot(cfg: configparser.ConfigParser) -> dict:
    return {s: dict(cfg[s]) for s in cfg.sections()}


def dumps(cfg: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cfg.write(buf)
    return buf.getvalue()


def floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def sim_config(cfg: configparser.ConfigParser, seed: int, days: int | None = None):
    from .marketsim import SimConfig

    s = cfg["sim"]
    kind, *args = [x.strip() for x in s["jump_multiplier"].split(",")]
    if s["intertrade_file"].strip():
        intertrade = s["intertrade_file"].strip()
    else:
        intertrade = {"kind": s["intertrade"].strip(), "mean": s.getfloat("intertrade_mean"),
                      "shape": s.getfloat("intertrade_shape")}
    return SimConfig(
        days=days or s.getint("days"), minutes_per_day=s.getint("minutes_per_day"),
        grid_minutes=s.getint("grid_minutes"), mu=s.getfloat("mu"), noise_std=s.getfloat("noise_std"),
        jump_rate=s.getfloat("jump_rate"), jump_multiplier=(kind, *map(float, args)),
        gou_a=s.getfloat("gou_a"), gou_b=s.getfloat("gou_b"), gou_s=s.getfloat("gou_s"),
        rho=s.getfloat("rho"), intertrade=intertrade, price0=s.getfloat("price0"),
        tick_mode=s["tick_mode"].strip(), seed=seed,
    )


def detection_config(cfg: configparser.ConfigParser):
    from .detect import VARIANTS, DetectionConfig

    d = cfg["detect"]
    spec = d["methods"].strip()
    if spec == "all":
        methods = VARIANTS
    else:
        methods = [tuple(x.strip().split("/")) for x in spec.split(",")]
        bad = [m for m in methods if m not in VARIANTS]
        if bad:
            raise ValueError(f"unknown detection variants: {bad}")
    return DetectionConfig(d.getfloat("theta"), d.getint("m"), d.getint("warmup"), tuple(methods))


def w_grid(cfg: configparser.ConfigParser):
    t = cfg["test"]
    return list(range(t.getint("w_min"), t.getint("w_max") + 1))
