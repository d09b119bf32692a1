"""Multi-seed runs, density x mobility sweeps and figure datasets."""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import linkbudget as lb
from .config import SimConfig
from .metrics import EpisodeMetrics, SweepCell, aggregate, tail_window
from .simulation import Simulation

DENSITIES = (10, 20, 40, 80)
MOBILITIES = ("static", "slow", "fast")
FIG4_MODELS = ("central", "model1", "model2", "no_d2d")


def run_once(config: SimConfig) -> list[EpisodeMetrics]:
    return list(Simulation(config))


def _run_job(config: SimConfig):
    try:
        return run_once(config), None
    except Exception as exc:  # noqa: BLE001 - reported per job by the collector
        return None, f"{type(exc).__name__}: {exc}"


def run_many(configs: Sequence[SimConfig], jobs: int = 1) -> list[tuple[Optional[list[EpisodeMetrics]], Optional[str]]]:
    """Run configs, optionally in worker processes; results keep input order."""
    if jobs <= 1 or len(configs) <= 1:
        return [_run_job(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_job, configs))


def seed_runs(config: SimConfig, seeds: Iterable[int], jobs: int = 1) -> list[list[EpisodeMetrics]]:
    configs = [config.replace(**{"simulation.seed": s}) for s in seeds]
    out = []
    for (res, err), cfg in zip(run_many(configs, jobs), configs):
        if err is not None:
            raise RuntimeError(f"seed {cfg.seed}: {err}")
        out.append(res)
    return out


@dataclass(frozen=True)
class SweepResult:
    cells: list[SweepCell]
    failures: list[str]


def sweep(
    base: SimConfig,
    densities: Sequence[int],
    mobilities: Sequence[str],
    models: Sequence[str],
    seeds: Sequence[int],
    window_fraction: float = 0.2,
    jobs: int = 1,
) -> SweepResult:
    """Average system coverage per (density, mobility, model) cell.

    A cell whose seeds all fail is dropped and listed in ``failures``; a cell
    with some failed seeds aggregates the seeds that completed.
    """
    if not (densities and mobilities and models and seeds):
        raise ValueError("sweep grid must be non-empty on every axis")
    grid = list(itertools.product(sorted(set(densities)), sorted(set(mobilities)), sorted(set(models))))
    jobs_list = []
    for n, mob, model in grid:
        cfg = base.replace(**{"scene.n_devices": n, "scene.speed_class": mob, "scene.speed": None, "simulation.model": model})
        jobs_list += [((n, mob, model), cfg.replace(**{"simulation.seed": s})) for s in seeds]
    results = run_many([c for _, c in jobs_list], jobs)

    by_cell: dict[tuple, list] = {key: [] for key in grid}
    failures = []
    for (key, cfg), (res, err) in zip(jobs_list, results):
        if err is not None:
            failures.append(f"N={key[0]} mobility={key[1]} model={key[2]} seed={cfg.seed}: {err}")
        else:
            by_cell[key].append(res)

    k = tail_window(base.episodes, window_fraction)
    cells = []
    for (n, mob, model), runs in by_cell.items():
        if not runs:
            continue
        s = aggregate(runs, k)
        l1 = float(np.mean([m.layer1_count / n for r in runs for m in r]))
        cells.append(SweepCell(n, mob, model, s.mean_coverage, s.std_coverage, len(runs), l1))
    return SweepResult(cells, failures)


def fig1_rows(
    params: lb.LinkBudgetParams,
    bandwidth: float,
    distances: Sequence[float] = (1.0, 2.0, 3.0),
    frequencies: Optional[Sequence[float]] = None,
    target_se: float = 10.0,
    humidity: float = 0.6,
) -> list[tuple[float, float, float]]:
    """(frequency_ghz, distance_m, beamwidth_deg) rows; NaN marks infeasible points."""
    if frequencies is None:
        frequencies = np.arange(500e9, 600e9 + 1, 5e9)
    rows = []
    for f in frequencies:
        p = params.with_(carrier_frequency=float(f), relative_humidity=humidity)
        for d in distances:
            bw = lb.min_beamwidth(p, d, target_se, bandwidth)
            rows.append((float(f) / 1e9, float(d), float("nan") if bw is None else bw))
    return rows
