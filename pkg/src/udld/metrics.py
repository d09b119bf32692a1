"""Per-episode records, cross-seed aggregation and CSV/JSON output."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CSV_COLUMNS = ("episode", "coverage", "total_reward", "mean_reward", "layer1", "layer2", "links", "epsilon")


@dataclass(frozen=True)
class EpisodeMetrics:
    episode: int
    coverage: float
    total_reward: float
    mean_reward_per_agent: float
    layer1_count: int
    layer2_count: int
    link_count: int
    epsilon: float

    def row(self) -> list:
        return [
            self.episode,
            self.coverage,
            self.total_reward,
            self.mean_reward_per_agent,
            self.layer1_count,
            self.layer2_count,
            self.link_count,
            self.epsilon,
        ]


@dataclass(frozen=True)
class SweepCell:
    density: int
    mobility: str
    model: str
    mean_coverage: float
    std_coverage: float
    seed_count: int
    mean_layer1_fraction: float = math.nan


@dataclass(frozen=True)
class Summary:
    mean_coverage: float
    std_coverage: float
    mean_reward: float
    std_reward: float
    per_seed_coverage: tuple[float, ...]
    per_seed_reward: tuple[float, ...]


def fmt(value) -> str:
    """6 significant digits for floats, plain ints otherwise."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    v = float(value)
    if v == 0:
        return "0"
    return f"{v:.6g}"


def write_csv(records: Iterable[EpisodeMetrics], path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for rec in records:
                w.writerow([fmt(v) for v in rec.row()])
    except OSError as exc:
        raise OSError(f"cannot write metrics CSV {path}: {exc}") from exc


def read_csv(path: str | Path) -> list[EpisodeMetrics]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        EpisodeMetrics(
            episode=int(r["episode"]),
            coverage=float(r["coverage"]),
            total_reward=float(r["total_reward"]),
            mean_reward_per_agent=float(r["mean_reward"]),
            layer1_count=int(r["layer1"]),
            layer2_count=int(r["layer2"]),
            link_count=int(r["links"]),
            epsilon=float(r["epsilon"]),
        )
        for r in rows
    ]


def write_table(rows: Sequence[Sequence], header: Sequence[str], path: str | Path) -> None:
    """Generic CSV with the same number formatting as :func:`write_csv`."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def window(stream: Sequence[EpisodeMetrics], last_k: int) -> Sequence[EpisodeMetrics]:
    if last_k < 1:
        raise ValueError("window must be >= 1")
    if not stream:
        raise ValueError("empty metrics stream")
    return stream[-last_k:]


def aggregate(runs: Sequence[Sequence[EpisodeMetrics]], last_k: int) -> Summary:
    """Mean/std of coverage and total reward over the last ``last_k`` episodes.

    Per-seed values are window means; the pooled mean/std run over all
    windowed episodes of all seeds together (population std, ddof=0).
    """
    if not runs:
        raise ValueError("no runs to aggregate")
    windows = [window(r, last_k) for r in runs]
    cov = [np.array([m.coverage for m in w]) for w in windows]
    rew = [np.array([m.total_reward for m in w]) for w in windows]
    all_cov = np.concatenate(cov)
    all_rew = np.concatenate(rew)
    return Summary(
        mean_coverage=float(all_cov.mean()),
        std_coverage=float(all_cov.std()),
        mean_reward=float(all_rew.mean()),
        std_reward=float(all_rew.std()),
        per_seed_coverage=tuple(float(c.mean()) for c in cov),
        per_seed_reward=tuple(float(r.mean()) for r in rew),
    )


def tail_window(episodes: int, fraction: float = 0.2) -> int:
    """Episode count of the trailing ``fraction`` of a run (at least 1)."""
    return max(1, int(round(episodes * fraction)))


def sweep_cell_dict(cell: SweepCell) -> dict:
    return asdict(cell)
