"""Experiment configuration: one JSON document with scene/radio/learning/simulation blocks."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from . import linkbudget as lb
from .agents import LearningConfig
from .environment import SPEED_CLASSES, Rect, Room

MODELS = ("model1", "model2", "central", "no_d2d")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists ``(dotted.field, message)`` pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{k}: {m}" for k, m in problems))


@dataclass(frozen=True)
class SceneConfig:
    width: float = 10.0
    height: float = 10.0
    ap_position: tuple[float, float] = (5.0, 5.0)
    obstacles: tuple[tuple[float, float, float, float], ...] = tuple(
        tuple(r.as_list()) for r in Room().static_obstacles
    )
    n_devices: int = 40
    speed_class: str = "fast"
    speed: Optional[float] = None  # overrides speed_class when set
    body_radius: float = 0.2
    queue_capacity: int = 5
    dt: float = 1.0

    @property
    def device_speed(self) -> float:
        return SPEED_CLASSES[self.speed_class] if self.speed is None else self.speed

    def room(self) -> Room:
        return Room(
            self.width,
            self.height,
            tuple(self.ap_position),
            tuple(Rect.from_seq(o) for o in self.obstacles),
        )


@dataclass(frozen=True)
class RadioConfig:
    band_low: float = 570e9
    band_high: float = 580e9
    transmit_power: float = 0.0
    beamwidth: float = 10.0
    relative_humidity: float = 0.6
    temperature: float = 296.0
    noise_density: float = -174.0
    reference_bandwidth: float = 250e6
    target_spectral_efficiency: float = 10.0
    k_anchor: float = lb.K_ANCHOR_575GHZ
    absorption_table_path: Optional[str] = None
    gamma0: Optional[float] = None  # dBm; derived from the target when unset
    ap_leg_bottleneck: bool = False

    @property
    def total_bandwidth(self) -> float:
        return self.band_high - self.band_low

    @property
    def carrier_frequency(self) -> float:
        return 0.5 * (self.band_low + self.band_high)

    def link_params(self) -> lb.LinkBudgetParams:
        if self.absorption_table_path:
            table = lb.load_absorption_table(self.absorption_table_path)
        else:
            table = lb.default_absorption_table(self.k_anchor)
        return lb.LinkBudgetParams(
            carrier_frequency=self.carrier_frequency,
            transmit_power=self.transmit_power,
            beamwidth=self.beamwidth,
            relative_humidity=self.relative_humidity,
            temperature=self.temperature,
            noise_density=self.noise_density,
            absorption_coefficient_table=table,
        )


@dataclass(frozen=True)
class SimConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)
    model: str = "model1"
    episodes: int = 500
    seed: int = 0

    @property
    def n_devices(self) -> int:
        return self.scene.n_devices

    def to_dict(self) -> dict:
        def block(obj) -> dict:
            out = {}
            for f in fields(obj):
                v = getattr(obj, f.name)
                if isinstance(v, tuple):
                    v = [list(x) if isinstance(x, tuple) else x for x in v]
                out[f.name] = v
            return out

        return {
            "scene": block(self.scene),
            "radio": block(self.radio),
            "learning": block(self.learning),
            "simulation": {"model": self.model, "episodes": self.episodes, "seed": self.seed},
        }

    def replace(self, **changes: Any) -> "SimConfig":
        """Apply dotted-path overrides, e.g. ``replace(**{"scene.n_devices": 80})``."""
        d = self.to_dict()
        for key, value in changes.items():
            set_dotted(d, key, value)
        return from_dict(d)


# ---------------------------------------------------------------- parsing

_BLOCKS = {"scene": SceneConfig, "radio": RadioConfig, "learning": LearningConfig}
_SIM_KEYS = {"model", "episodes", "seed"}
_ALIASES = {"learning.alpha": "learning.learning_rate", "learning.beta": "learning.discount"}


def _coerce(cls, name: str, value: Any) -> Any:
    default = next(f for f in fields(cls) if f.name == name).default
    if name == "obstacles":
        return tuple(tuple(float(x) for x in o) for o in value)
    if name == "ap_position":
        return tuple(float(x) for x in value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise TypeError("expected true/false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise TypeError("expected an integer")
        return int(value)
    if isinstance(default, float) or (default is None and name in {"speed", "gamma0"}):
        if value is None:
            return None
        if isinstance(value, bool):
            raise TypeError("expected a number")
        return float(value)
    return value


def from_dict(data: dict) -> SimConfig:
    problems: list[tuple[str, str]] = []
    if not isinstance(data, dict):
        raise ConfigError([("<root>", "expected a JSON object")])
    unknown = set(data) - set(_BLOCKS) - {"simulation"}
    problems += [(k, "unknown block") for k in sorted(unknown)]

    built: dict[str, Any] = {}
    for block, cls in _BLOCKS.items():
        raw = data.get(block, {}) or {}
        names = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            key = _ALIASES.get(f"{block}.{key}", f"{block}.{key}").split(".", 1)[1]
            if key not in names:
                problems.append((f"{block}.{key}", "unknown field"))
                continue
            try:
                kwargs[key] = _coerce(cls, key, value)
            except (TypeError, ValueError) as exc:
                problems.append((f"{block}.{key}", str(exc)))
        try:
            built[block] = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            first = str(exc).split(" ", 1)[0]
            problems.append((f"{block}.{first}" if first in names else block, str(exc)))

    sim = data.get("simulation", {}) or {}
    for key in sorted(set(sim) - _SIM_KEYS):
        problems.append((f"simulation.{key}", "unknown field"))
    model = sim.get("model", "model1")
    episodes = sim.get("episodes", 500)
    seed = sim.get("seed", 0)
    if model not in MODELS:
        problems.append(("simulation.model", f"must be one of {', '.join(MODELS)}"))
    if not isinstance(episodes, int) or isinstance(episodes, bool) or episodes < 1:
        problems.append(("simulation.episodes", "must be an integer >= 1"))
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        problems.append(("simulation.seed", "must be a non-negative integer"))

    scene = built.get("scene")
    if scene is not None:
        if scene.n_devices < 1:
            problems.append(("scene.n_devices", "must be >= 1"))
        if scene.speed is None and scene.speed_class not in SPEED_CLASSES:
            problems.append(("scene.speed_class", f"must be one of {', '.join(SPEED_CLASSES)}"))
        if scene.speed is not None and scene.speed < 0:
            problems.append(("scene.speed", "must be >= 0"))
        if scene.body_radius < 0:
            problems.append(("scene.body_radius", "must be >= 0"))
        if not 1 <= scene.queue_capacity <= 5:
            problems.append(("scene.queue_capacity", "must be in [1, 5]"))
        if scene.dt <= 0:
            problems.append(("scene.dt", "must be > 0"))
        try:
            scene.room()
        except ValueError as exc:
            problems.append(("scene", str(exc)))
    radio = built.get("radio")
    if radio is not None:
        if radio.band_high <= radio.band_low:
            problems.append(("radio.band_high", "must exceed band_low"))
        if radio.reference_bandwidth <= 0:
            problems.append(("radio.reference_bandwidth", "must be > 0"))
        try:
            radio.link_params()
        except ValueError as exc:
            problems.append(("radio", str(exc)))

    if problems:
        raise ConfigError(problems)
    return SimConfig(built["scene"], built["radio"], built["learning"], model, episodes, seed)


def set_dotted(d: dict, key: str, value: Any) -> None:
    key = _ALIASES.get(key, key)
    parts = key.split(".")
    if len(parts) != 2:
        raise ConfigError([(key, "override keys look like block.field")])
    d.setdefault(parts[0], {})[parts[1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    """``block.field=value`` with the value parsed as JSON when possible."""
    if "=" not in text:
        raise ConfigError([(text, "expected block.field=value")])
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(path: str | Path, overrides: Optional[dict[str, Any]] = None) -> SimConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError([(str(path), "config file not found")]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([(str(path), f"invalid JSON: {exc}")]) from None
    data = copy.deepcopy(data)
    for key, value in (overrides or {}).items():
        set_dotted(data, key, value)
    return from_dict(data)


def base_config_path() -> Path:
    return Path(str(resources.files("udld") / "data" / "base.json"))


def base_config(**overrides: Any) -> SimConfig:
    return load_config(base_config_path(), overrides)
