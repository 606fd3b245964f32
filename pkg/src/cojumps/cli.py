"""Command-line driver: ``cojumps <command> [inputs] --out DIR``.

Every command writes its outputs plus ``manifest.json`` (config snapshot,
input digests, seed, versions, timestamps) and ``config.ini`` into ``--out``.
Diagnostics go to standard error; the exit code is non-zero on any error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import io

log = logging.getLogger("cojumps")

FULL_MASK = (1 << 6) - 1


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def _collect(paths, patterns):
    files = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            found = set()
            for pat in patterns:
                found.update(p.glob(pat))
            files.extend(sorted(found))
        elif p.is_file():
            files.append(p)
        else:
            raise UsageError(f"input not found: {p}")
    if not files:
        raise UsageError("no inputs")
    return files


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    import numba
    import scipy

    return {"cojumps": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def _map(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _symbol(path: Path) -> str:
    name = path.name
    for suffix in (".returns.csv", ".jumps.csv", ".events.csv", ".ticks.csv", ".csv"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def _horizon(args, cfg, inputs):
    if getattr(args, "horizon", None):
        return int(args.horizon)
    days = cfg["session"]["days"].strip()
    if days:
        return int(days) * cfg["session"].getint("minutes_per_day")
    for f in inputs:
        rep = Path(f).parent / "detect_report.json"
        if rep.is_file():
            return int(json.loads(rep.read_text())["horizon"])
    raise UsageError("sample length unknown: pass --horizon or set [session] days")


def _events(files):
    out = []
    for f in files:
        if f.name.endswith(".jumps.csv"):
            out.append(io.read_jumps(f, _symbol(f), require_mask=FULL_MASK))
        else:
            out.append(io.read_events(f, _symbol(f)))
    return out


# ---------------------------------------------------------------- commands


def _clean_one(job):
    path, cfg_text = job
    import configparser

    from .ingest import SessionSpec, prepare

    cfg = configparser.ConfigParser()
    cfg.read_string(cfg_text)
    day_s = 86_400.0
    ticks = io.read_ticks(path, _symbol(path))
    if len(ticks) == 0:
        raise ValueError(f"{path}: no ticks")
    days = cfg["session"]["days"].strip()
    n_days = int(days) if days else int(ticks.times[-1] // day_s) + 1
    session = SessionSpec(cfg["session"].getint("minutes_per_day"), n_days)
    c = cfg["clean"]
    series, report = prepare(ticks, session, k=c.getint("k"), delta=c.getfloat("delta"), c=c.getfloat("c"),
                             gamma=c.getfloat("gamma"), auction_threshold=cfg["auction"].getfloat("threshold_min"),
                             split_bound=cfg["split"].getfloat("bound"), clean=c.getboolean("enabled"))
    return ticks.symbol, series, report


def cmd_clean(args, cfg, out: Path):
    files = _collect(args.inputs, ["*.csv"])
    results = _map(_clean_one, [(f, cfgmod.dumps(cfg)) for f in files], args.jobs)
    report = {}
    outputs = []
    for symbol, series, rep in results:
        outputs.append(io.write_returns(out / f"{symbol}.returns.csv", series))
        report[symbol] = {"ticks": rep.n_ticks, "outliers_removed": rep.outliers_removed,
                          "auctions": [[a / 60.0, b / 60.0] for a, b in rep.auctions]}
        log.info("%s: %d ticks, %d outliers, %d auctions", symbol, rep.n_ticks, rep.outliers_removed, len(rep.auctions))
    outputs.append(io.write_json(out / "cleaning_report.json", report))
    return files, outputs


def cmd_detect(args, cfg, out: Path):
    from .detect import VARIANTS, detect_all

    files = _collect(args.inputs, ["*.returns.csv"])
    dcfg = cfgmod.detection_config(cfg)
    report, outputs, horizon = {}, [], None
    for f in files:
        series = io.read_returns(f, _symbol(f))
        horizon = next(iter(series.values())).session.n
        res = detect_all(series, dcfg)
        minutes, dirs, masks = res.method_mask()
        outputs.append(io.write_jumps(out / f"{res.symbol}.jumps.csv", minutes, dirs, masks))
        report[res.symbol] = {
            "variants": {f"{m}/{e}": len(res.variants[(m, e)]) for m, e in VARIANTS if (m, e) in res.variants},
            "intersection": len(res.jumps),
        }
    outputs.append(io.write_json(out / "detect_report.json", {"horizon": horizon, "symbols": report}))
    return files, outputs


def cmd_fit(args, cfg, out: Path):
    from . import hawkes

    files = _collect(args.inputs, ["*.jumps.csv", "*.events.csv"])
    horizon = _horizon(args, cfg, files)
    events = _events(files)
    h = cfg["hawkes"]
    outputs, summary = [], {}
    if args.multivariate:
        rep = hawkes.fit_multi([e.times for e in events], horizon, anneal_restarts=h.getint("anneal_restarts"),
                               anneal_steps=h.getint("anneal_steps"), seed=args.seed,
                               paper_convention=h.getboolean("paper_convention"))
        d = rep.model.to_dict() | {"symbols": [e.symbol for e in events], "loglik": rep.loglik,
                                   "converged": rep.converged}
        outputs.append(io.write_json(out / "model.json", d))
        print(rep.summary(), file=sys.stderr)
    else:
        for ev in events:
            rep = hawkes.fit_uni(ev.times, horizon, seed=args.seed, paper_convention=h.getboolean("paper_convention"))
            d = rep.model.to_dict() | {"symbol": ev.symbol, "loglik": rep.loglik, "converged": rep.converged,
                                       "n_events": len(ev), "horizon": horizon}
            outputs.append(io.write_json(out / f"{ev.symbol}.model.json", d))
            summary[ev.symbol] = rep.summary()
            print(f"{ev.symbol}\n{rep.summary()}", file=sys.stderr)
    return files, outputs


def _null(args, cfg, events, horizon, out_models):
    from . import hawkes, mctests

    kind = args.null or cfg["test"]["null"].strip()
    disc = cfg["test"].getboolean("discretize")
    if kind == "poisson":
        rates = [len(e) / horizon for e in events]
        return mctests.poisson_null(rates, horizon, disc), "poisson", rates
    if kind == "hawkes":
        models = [hawkes.fit_uni(e.times, horizon, seed=args.seed).model for e in events]
        out_models.extend(models)
        return mctests.hawkes_null(models, horizon, disc), "hawkes", None
    path = Path(kind.removeprefix("model:"))
    if not path.is_file():
        raise UsageError(f"unknown null model {kind!r}")
    model = io.read_model(path)
    return mctests.hawkes_null(model if model.K > 1 else [model], horizon, disc), path.stem, None


def cmd_test(args, cfg, out: Path):
    from . import mctests

    files = _collect(args.inputs, ["*.jumps.csv", "*.events.csv"])
    stat = (args.stat or cfg["test"]["stat"]).upper()
    need = 1 if stat == "MJ" else 2
    if len(files) != need:
        raise UsageError(f"{stat} test needs exactly {need} event file(s), got {len(files)}")
    horizon = _horizon(args, cfg, files)
    events = _events(files)
    w = cfgmod.w_grid(cfg)
    levels = tuple(cfgmod.floats(cfg["test"]["levels"]))
    n_mc = args.n_mc or cfg["test"].getint("n_mc")
    models = []
    null, name, rates = _null(args, cfg, events, horizon, models)
    if stat == "MJ":
        observed = mctests.WindowStat.mj(events[0].times, w, horizon)
    else:
        observed = mctests.WindowStat.cj(events[0].times, events[1].times, w, horizon)
    if args.analytic:
        if rates is None:
            raise UsageError("--analytic needs --null poisson")
        band = (mctests.poisson_mj_band(rates[0], w, horizon, levels) if stat == "MJ"
                else mctests.poisson_cj_band(rates[0], rates[1], w, horizon, levels))
    else:
        band = mctests.mc_band(null, stat, w, horizon, n_mc=n_mc, levels=levels, seed=args.seed, name=name)
    verdict = mctests.run_test(observed, band)
    outputs = [io.write_band(out / "band.csv", band, observed.values)]
    outputs.append(io.write_json(out / "verdict.json", {
        "stat": stat, "null": name, "symbols": [e.symbol for e in events], "horizon": horizon,
        "levels": {str(l): {"reject": v.reject, "offending_w": v.offending_w} for l, v in verdict.items()},
        "null_models": [m.to_dict() for m in models],
    }))
    for l, v in verdict.items():
        print(f"{stat} {name} level={l}: {'reject' if v.reject else 'no rejection'} {v.offending_w}", file=sys.stderr)
    return files, outputs


def cmd_factor(args, cfg, out: Path):
    from . import factor

    files = _collect(args.inputs, ["*.jumps.csv", "*.events.csv"])
    horizon = _horizon(args, cfg, files)
    events = _events(files)
    f = cfg["factor"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        decomp = factor.extract_factor(events, horizon, significance=f.getfloat("significance"),
                                       max_iters=f.getint("max_iters"), dt=f.getfloat("dt"), seed=args.seed)
    for w in caught:
        log.warning("%s", w.message)
    tally = factor.cojump_tally(events, horizon)
    outputs = [io.write_json(out / "decomposition.json", decomp.to_dict() | {"horizon": horizon}),
               io.write_tally(out / "tally.csv", tally)]
    log.info("factor events: %d after %d passes", len(decomp.factor_events), decomp.iterations)
    return files, outputs


def _simulate(args, cfg):
    from .marketsim import simulate_market

    return simulate_market(cfgmod.sim_config(cfg, args.seed, getattr(args, "days", None)))


def cmd_simulate(args, cfg, out: Path):
    sim = _simulate(args, cfg)
    outputs = [io.write_ticks(out / "sim.ticks.csv", sim.ticks),
               io.write_truth(out / "sim.truth.csv", sim.true_jumps.times, sim.jump_sizes)]
    log.info("simulated %d ticks, %d planted jumps", len(sim.ticks), len(sim.true_jumps))
    return [], outputs


def cmd_size_power(args, cfg, out: Path):
    from .marketsim import run_pipeline, size_power

    sim = _simulate(args, cfg)
    c = cfg["clean"]
    det, _ = run_pipeline(sim, clean=c.getboolean("enabled"), detection_config=cfgmod.detection_config(cfg),
                          k=c.getint("k"), delta=c.getfloat("delta"), c=c.getfloat("c"), gamma=c.getfloat("gamma"),
                          auction_threshold=cfg["auction"].getfloat("threshold_min"),
                          split_bound=cfg["split"].getfloat("bound"))
    table = size_power(sim, det, cfg["sim"].getint("match_window"))
    rows = [(k, repr(v["size"]), repr(v["power"]), v["rp"], v["fp"], v["n_true"]) for k, v in table.items()]
    outputs = [io._write(out / "size_power.csv", ("variant", "size", "power", "rp", "fp", "n_true"), rows)]
    for k, v in table.items():
        print(f"{k:8s} size={100 * v['size']:.3f}% power={100 * v['power']:.1f}% rp={v['rp']} fp={v['fp']}",
              file=sys.stderr)
    return [], outputs


COMMANDS = {
    "clean": cmd_clean, "detect": cmd_detect, "fit": cmd_fit, "test": cmd_test,
    "factor": cmd_factor, "simulate": cmd_simulate, "size-power": cmd_size_power,
}


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file; flags override it")
    common.add_argument("--seed", type=int, default=None, help="random seed (default from [run] seed)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cojumps", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("clean", "detect"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("inputs", nargs="*", default=[])
    for name in ("fit", "test", "factor"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("inputs", nargs="*", default=[])
        s.add_argument("--horizon", type=int, help="sample length in minutes")
        if name == "fit":
            s.add_argument("--multivariate", action="store_true", help="fit one K-variate model")
        if name == "test":
            s.add_argument("--stat", choices=["MJ", "CJ", "mj", "cj"])
            s.add_argument("--null", help="poisson, hawkes, or model:PATH")
            s.add_argument("--n-mc", type=int, dest="n_mc")
            s.add_argument("--analytic", action="store_true", help="analytic Poisson band")
    for name in ("simulate", "size-power"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--days", type=int, help="override [sim] days")
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    started = datetime.now(timezone.utc).isoformat()
    try:
        cfg = cfgmod.load(args.config)
        if args.seed is None:
            args.seed = cfg["run"].getint("seed")
        cfg["run"]["seed"] = str(args.seed)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        inputs, outputs = COMMANDS[args.command](args, cfg, out)
        (out / "config.ini").write_text(cfgmod.dumps(cfg), encoding="utf-8")
        io.write_json(out / "manifest.json", {
            "command": args.command, "argv": argv, "config": cfgmod.snapshot(cfg), "seed": args.seed,
            "inputs": {str(f): _digest(f) for f in inputs},
            "outputs": {str(Path(f).name): _digest(f) for f in outputs},
            "versions": _versions(), "started": started,
            "finished": datetime.now(timezone.utc).isoformat(), "seconds": time.perf_counter() - t0,
        })
    except UsageError as exc:
        print(f"cojumps {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError, KeyError, io.MalformedInput) as exc:
        print(f"cojumps {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
