"""Command line entry point: ``udld run|sweep|figdata|calibrate``."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import experiments as ex
from . import linkbudget as lb
from .config import MODELS, ConfigError, SimConfig, base_config_path, load_config, parse_override
from .metrics import aggregate, tail_window, write_csv, write_json, write_table
from .environment import SPEED_CLASSES

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
FIGURES = ("fig1", "fig4", "fig5", "fig6", "fig7")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="udld", description="Ultra-dense indoor THz D2D relaying simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, episodes=True):
        sp.add_argument("--config", default=None, help="JSON config (default: packaged base.json)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="BLOCK.FIELD=VALUE",
                        help="override a config leaf, e.g. learning.alpha=0.02 (repeatable)")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        if episodes:
            sp.add_argument("--episodes", type=int, default=None, help="override simulation.episodes")

    sp = sub.add_parser("run", help="run one configuration")
    common(sp)
    sp.add_argument("--seed", type=int, default=None, help="seed (fallback: $UDLD_SEED, then config)")
    sp.add_argument("--model", choices=MODELS, default=None)
    sp.add_argument("--window-fraction", type=float, default=0.2, help="trailing fraction for the summary")

    sp = sub.add_parser("sweep", help="density x mobility x model grid over seeds")
    common(sp)
    sp.add_argument("--densities", type=_int_list, default=list(ex.DENSITIES))
    sp.add_argument("--mobilities", type=_str_list, default=list(ex.MOBILITIES))
    sp.add_argument("--models", type=_str_list, default=["model1", "model2"])
    sp.add_argument("--seeds", type=int, default=20, help="number of seeds, 0..S-1")
    sp.add_argument("--window-fraction", type=float, default=0.2)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    sp = sub.add_parser("figdata", help="emit the dataset behind one figure")
    sp.add_argument("figure", help=f"one of {', '.join(FIGURES)}")
    common(sp)
    sp.add_argument("--seeds", type=int, default=None, help="number of seeds (default 20, fig4/5 use 5)")
    sp.add_argument("--densities", type=_int_list, default=list(ex.DENSITIES))
    sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("calibrate", help="solve the absorption anchor for the target range")
    common(sp, episodes=False)
    sp.add_argument("--range", dest="target_range", type=float, default=3.0, help="target d0 in metres")
    return p


def _load(args) -> SimConfig:
    overrides = dict(parse_override(o) for o in args.overrides)
    if getattr(args, "episodes", None) is not None:
        overrides["simulation.episodes"] = args.episodes
    if getattr(args, "model", None) is not None:
        overrides["simulation.model"] = args.model
    seed = getattr(args, "seed", None)
    if seed is None and "seed" in vars(args) and os.environ.get("UDLD_SEED"):
        try:
            seed = int(os.environ["UDLD_SEED"])
        except ValueError:
            raise ConfigError([("UDLD_SEED", "must be an integer")]) from None
    if seed is not None:
        overrides["simulation.seed"] = seed
    path = args.config or base_config_path()
    return load_config(path, overrides)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    records = ex.run_once(cfg)
    stem = f"{cfg.model}_N{cfg.n_devices}_seed{cfg.seed}"
    write_csv(records, out / f"{stem}.csv")
    s = aggregate([records], tail_window(cfg.episodes, args.window_fraction))
    write_json(
        {
            "model": cfg.model,
            "n_devices": cfg.n_devices,
            "seed": cfg.seed,
            "episodes": cfg.episodes,
            "window_episodes": tail_window(cfg.episodes, args.window_fraction),
            "mean_coverage": s.mean_coverage,
            "std_coverage": s.std_coverage,
            "mean_total_reward": s.mean_reward,
            "std_total_reward": s.std_reward,
            "config": cfg.to_dict(),
        },
        out / f"{stem}.json",
    )
    print(f"{stem}: mean coverage {s.mean_coverage:.4f} over last {tail_window(cfg.episodes, args.window_fraction)} episodes")
    return EXIT_OK


def _check_lists(mobilities=(), models=()) -> None:
    bad = [m for m in mobilities if m not in SPEED_CLASSES]
    if bad:
        raise UsageError(f"unknown mobility {bad}; valid: {', '.join(SPEED_CLASSES)}")
    bad = [m for m in models if m not in MODELS]
    if bad:
        raise UsageError(f"unknown model {bad}; valid: {', '.join(MODELS)}")


def _write_sweep(result: ex.SweepResult, out: Path, name: str) -> None:
    header = ["density", "mobility", "model", "mean_coverage", "std_coverage", "seed_count", "mean_layer1_fraction"]
    rows = [[c.density, c.mobility, c.model, c.mean_coverage, c.std_coverage, c.seed_count, c.mean_layer1_fraction]
            for c in result.cells]
    write_table(rows, header, out / f"{name}.csv")
    write_json({"cells": [dict(zip(header, r)) for r in rows], "failures": result.failures}, out / f"{name}.json")


def cmd_sweep(args) -> int:
    _check_lists(args.mobilities, args.models)
    if args.seeds < 1 or not args.densities:
        raise UsageError("need at least one seed and one density")
    cfg = _load(args)
    out = _outdir(args)
    result = ex.sweep(cfg, args.densities, args.mobilities, args.models, range(args.seeds),
                      args.window_fraction, args.jobs)
    _write_sweep(result, out, "sweep")
    print(f"sweep: {len(result.cells)} cells written to {out / 'sweep.csv'}")
    if result.failures:
        for f in result.failures:
            print(f"failed: {f}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_figdata(args) -> int:
    if args.figure not in FIGURES:
        raise UsageError(f"unknown figure {args.figure!r}; valid ids: {', '.join(FIGURES)}")
    cfg = _load(args)
    out = _outdir(args)
    fig = args.figure
    path = out / f"{fig}.csv"

    if fig == "fig1":
        rows = ex.fig1_rows(cfg.radio.link_params(), cfg.radio.reference_bandwidth,
                            target_se=cfg.radio.target_spectral_efficiency)
        write_table(rows, ["frequency_ghz", "distance_m", "beamwidth_deg"], path)
    elif fig in ("fig4", "fig5"):
        seeds = range(args.seeds if args.seeds is not None else 5)
        models = ex.FIG4_MODELS if fig == "fig4" else ("model1", "model2")
        rows = []
        for model in models:
            runs = ex.seed_runs(cfg.replace(**{"simulation.model": model}), seeds, args.jobs)
            for ep in range(cfg.episodes):
                eps = [r[ep] for r in runs]
                if fig == "fig4":
                    rows.append([model, ep, float(np.mean([m.coverage for m in eps]))])
                else:
                    rows.append([model, ep, float(np.mean([m.total_reward for m in eps])),
                                 float(np.mean([m.mean_reward_per_agent for m in eps]))])
        header = ["model", "episode", "coverage"] if fig == "fig4" else ["model", "episode", "total_reward", "mean_reward"]
        write_table(rows, header, path)
    elif fig == "fig6":
        seeds = range(args.seeds if args.seeds is not None else 20)
        rows = []
        for n in sorted(set(args.densities)):
            runs = ex.seed_runs(cfg.replace(**{"scene.n_devices": n, "simulation.model": "no_d2d"}), seeds, args.jobs)
            for s, r in zip(seeds, runs):
                rows += [[n, s, m.episode, m.layer1_count, m.layer2_count] for m in r]
        write_table(rows, ["n_devices", "seed", "episode", "layer1", "layer2"], path)
    else:
        seeds = range(args.seeds if args.seeds is not None else 20)
        result = ex.sweep(cfg, args.densities, ex.MOBILITIES, ("model1", "model2"), seeds, jobs=args.jobs)
        _write_sweep(result, out, "fig7")
        if result.failures:
            for f in result.failures:
                print(f"failed: {f}", file=sys.stderr)
            return EXIT_RUNTIME
    print(f"{fig}: wrote {path}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    radio = cfg.radio
    params = radio.link_params()
    k = lb.calibrate_absorption(params, radio.reference_bandwidth, radio.target_spectral_efficiency,
                                args.target_range, anchor_frequency=radio.carrier_frequency)
    calibrated = cfg.replace(**{"radio.k_anchor": k, "radio.absorption_table_path": None})
    d0 = lb.max_range(calibrated.radio.link_params(), radio.reference_bandwidth, radio.target_spectral_efficiency)
    out = _outdir(args)
    write_json(calibrated.to_dict(), out / "calibrated.json")
    write_json({"k_anchor_per_m": k, "anchor_frequency_hz": radio.carrier_frequency, "max_range_m": d0,
                "target_range_m": args.target_range}, out / "calibration.json")
    print(f"k_anchor = {k!r} 1/m at {radio.carrier_frequency / 1e9:g} GHz -> max range {d0:.4f} m")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "figdata": cmd_figdata, "calibrate": cmd_calibrate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"udld: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print("udld: configuration error:", file=sys.stderr)
        for key, msg in exc.problems:
            print(f"  {key}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (lb.LinkBudgetError, ValueError) as exc:
        print(f"udld: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, OSError, ArithmeticError) as exc:
        print(f"udld: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
