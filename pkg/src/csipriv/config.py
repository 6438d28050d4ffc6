"""Run configuration: nested dataclasses loaded from JSON with strict validation."""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .channel_sim import SceneConfig
from .charting import ChartConfig
from .fingerprinting import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class SeedConfig:
    scene: int = 7
    dataset: int = 1
    obfuscation: int = 2
    train: int = 3

    @classmethod
    def from_base(cls, base: int) -> "SeedConfig":
        return cls(base, base + 1, base + 2, base + 3)


@dataclass
class RecoveryConfig:
    epsilon: float | None = None
    whiten: bool = True
    tap_shift: int = 32


@dataclass
class TriangulationConfig:
    kappa_max: float = 50.0
    grid_step: float = 0.25


@dataclass
class AntennaConfig:
    arrays: list[int] | None = None
    rows: list[int] | None = None
    cols: list[int] | None = None

    def label(self, dims) -> str:
        B, R, C, _ = dims
        nb = len(self.arrays) if self.arrays is not None else B
        nr = len(self.rows) if self.rows is not None else R
        nc = len(self.cols) if self.cols is not None else C
        text = f"{nb}x{nr}x{nc}"
        if self.arrays is not None and nb != B:
            text += "_b" + "-".join(str(b) for b in self.arrays)
        return text


@dataclass
class GlobalConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    l_v: int = 16
    window: str | None = None
    split_ratio: float = 0.5
    recovery: RecoveryConfig = field(default_factory=RecoveryConfig)
    methods: list[str] = field(default_factory=lambda: ["fingerprint", "chart", "triangulation"])
    antenna_configs: list[AntennaConfig] = field(default_factory=lambda: [AntennaConfig()])
    fingerprint: TrainConfig = field(default_factory=TrainConfig)
    chart: ChartConfig = field(default_factory=ChartConfig)
    triangulation: TriangulationConfig = field(default_factory=TriangulationConfig)

    def __post_init__(self):
        unknown = set(self.methods) - {"fingerprint", "chart", "triangulation"}
        if unknown:
            raise ConfigError(f"unknown method(s) {sorted(unknown)}")
        if not 1 <= self.l_v <= self.scene.n_sub:
            raise ConfigError(f"l_v must lie in [1, {self.scene.n_sub}]")


def _convert(tp, value, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _convert(inner[0], value, where)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected an object, got {type(value).__name__}")
        return from_dict(tp, value, where)
    if origin in (list, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {type(value).__name__}")
        item = args[0] if args else typing.Any
        items = [_convert(item, v, f"{where}[{i}]") for i, v in enumerate(value)]
        return tuple(items) if origin is tuple else items
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def from_dict(cls, data: dict, where: str = ""):
    """Build dataclass ``cls`` from ``data``; unknown keys and type mismatches raise."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown configuration key '{where + '.' if where else ''}{key}'")
    kwargs = {k: _convert(hints[k], v, f"{where + '.' if where else ''}{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or cls.__name__}: {exc}") from exc


def to_dict(obj) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(obj)))


def _set_path(data: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set '{dotted}': '{k}' is not a section")
    node[keys[-1]] = value


def parse_override(text: str) -> tuple[str, object]:
    """``key.path=value`` with a JSON value (bare words are taken as strings)."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override '{text}' is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def parse_and_validate(config_path=None, overrides=(), seed: int | None = None) -> GlobalConfig:
    """Defaults, then the JSON file, then ``overrides``; ``seed`` resets all stage seeds."""
    data: dict = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"configuration file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
    if seed is not None:
        data["seeds"] = dataclasses.asdict(SeedConfig.from_base(seed))
    for item in overrides:
        key, value = item if isinstance(item, tuple) else parse_override(item)
        _set_path(data, key, value)
    return from_dict(GlobalConfig, data)
