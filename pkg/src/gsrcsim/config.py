"""Experiment configuration: flat ``section.key = value`` text files.

Blank lines and ``#`` comments are ignored. Sequences are comma separated.
Every key has a default, so an empty file is a complete configuration.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from gsrcsim.channel import ChannelParams
from gsrcsim.dqn import TrainerConfig
from gsrcsim.engine import Scheme
from gsrcsim.kinematics import SimClock, VelocitySets
from gsrcsim.repetition import RepetitionParams

TRAJECTORY_KINDS = ("random-walk", "waypoint-demo")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scene:
    bs_position: tuple[float, ...] = (50.0, 50.0, 0.0)
    start_position: tuple[float, ...] = (80.0, 80.0, 20.0)
    radius_m: float = 200.0

    def __post_init__(self) -> None:
        for name in ("bs_position", "start_position"):
            if len(getattr(self, name)) != 3:
                raise ValueError(f"{name} needs exactly 3 components")
        if not self.radius_m > 0:
            raise ValueError("radius_m must be > 0")
        if self.start_position[2] <= self.bs_position[2]:
            raise ValueError("start_position must be above bs_position")


@dataclass(frozen=True)
class QueueSettings:
    q_max: int = 10

    def __post_init__(self) -> None:
        if self.q_max < 1:
            raise ValueError("q_max must be >= 1")


@dataclass(frozen=True)
class Experiment:
    schemes: tuple[str, ...] = tuple(s.value for s in Scheme)
    episodes: int = 500
    base_seed: int = 2024
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.schemes:
            raise ValueError("schemes must not be empty")
        for s in self.schemes:
            Scheme.parse(s)
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class TrajectorySettings:
    kind: str = "random-walk"
    seed: int = 7

    def __post_init__(self) -> None:
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"kind must be one of {', '.join(TRAJECTORY_KINDS)}")


@dataclass(frozen=True)
class OutputSettings:
    dir: str = "out"
    trajectory_episodes: int = 1

    def __post_init__(self) -> None:
        if self.trajectory_episodes < 0:
            raise ValueError("trajectory_episodes must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    clock: SimClock = field(default_factory=SimClock)
    channel: ChannelParams = field(default_factory=lambda: ChannelParams(bandwidth_hz=1e5))
    scene: Scene = field(default_factory=Scene)
    repetition: RepetitionParams = field(default_factory=RepetitionParams)
    velocity: VelocitySets = field(default_factory=VelocitySets)
    queue: QueueSettings = field(default_factory=QueueSettings)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    experiment: Experiment = field(default_factory=Experiment)
    trajectory: TrajectorySettings = field(default_factory=TrajectorySettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def __post_init__(self) -> None:
        self.repetition.check(self.clock)

    @property
    def schemes(self) -> list[Scheme]:
        return [Scheme.parse(s) for s in self.experiment.schemes]

    def replace(self, section: str, **changes) -> ExperimentConfig:
        """Copy with some fields of one section changed (validated again)."""
        sub = dataclasses.replace(getattr(self, section), **changes)
        return dataclasses.replace(self, **{section: sub})


SECTIONS = tuple(f.name for f in dataclasses.fields(ExperimentConfig))


def _defaults() -> dict[str, object]:
    base = ExperimentConfig()
    out = {}
    for sec in SECTIONS:
        obj = getattr(base, sec)
        for f in dataclasses.fields(obj):
            out[f"{sec}.{f.name}"] = getattr(obj, f.name)
    return out


def _parse_scalar(text: str, like):
    if isinstance(like, bool):
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(like, int):
        try:
            return int(text)
        except ValueError:
            f = float(text)
            if not f.is_integer():
                raise ValueError(f"expected an integer, got {text!r}") from None
            return int(f)
    if isinstance(like, float):
        try:
            return float(text)
        except ValueError:
            raise ValueError(f"expected a number, got {text!r}") from None
    return text


def _parse_value(text: str, default):
    if isinstance(default, tuple):
        items = [t.strip() for t in text.split(",") if t.strip()]
        like = default[0] if default else ""
        return tuple(_parse_scalar(t, like) for t in items)
    return _parse_scalar(text, default)


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    defaults = _defaults()
    values: dict[str, dict[str, object]] = {s: {} for s in SECTIONS}
    where: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in defaults:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in where:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {where[key]})")
        try:
            parsed = _parse_value(val, defaults[key])
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
        sec, name = key.split(".", 1)
        values[sec][name] = parsed
        where[key] = lineno

    def blame(sec: str, exc: Exception) -> ConfigError:
        # point at the first user-set key that the message mentions
        msg = str(exc)
        for name, _ in sorted(values[sec].items(), key=lambda kv: where[f"{sec}.{kv[0]}"]):
            if name in msg:
                key = f"{sec}.{name}"
                return ConfigError(f"{source}:{where[key]}: {key}: {msg}")
        if len(values[sec]) == 1:
            key = f"{sec}.{next(iter(values[sec]))}"
            return ConfigError(f"{source}:{where[key]}: {key}: {msg}")
        return ConfigError(f"{source}: [{sec}]: {msg}")

    base = ExperimentConfig()
    built = {}
    for sec in SECTIONS:
        try:
            built[sec] = dataclasses.replace(getattr(base, sec), **values[sec])
        except (ValueError, TypeError) as exc:
            raise blame(sec, exc) from None
    try:
        return ExperimentConfig(**built)
    except ValueError as exc:
        # the only cross-section invariant: repetition span vs TTI
        for key in ("repetition.k_max", "repetition.t_rep", "clock.tti_s"):
            if key in where:
                raise ConfigError(f"{source}:{where[key]}: {key}: {exc}") from None
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config: {exc.strerror or exc}") from None
    return parse_config(text, str(p))


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for sec in SECTIONS:
        obj = getattr(cfg, sec)
        for f in dataclasses.fields(obj):
            lines.append(f"{sec}.{f.name} = {_format_value(getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)
