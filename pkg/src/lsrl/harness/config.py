"""Run configuration: documented defaults < config file < command-line overrides.

The config file is line based::

    # comment
    dqn.total_steps = 150000
    simenv.weathers = noon,dusk
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from lsrl.dqn import DqnConfig, EpsilonSchedule
from lsrl.perception import EncoderDecoderSpec, default_schedule
from lsrl.simenv import VehicleParams, get_weather


@dataclass
class SimenvSection:
    track: str = "right-turn-barrier"
    speed: float = 5.0
    wheelbase: float = 2.5
    footprint_length: float = 4.0
    footprint_width: float = 1.8
    dt: float = 0.05
    weathers: tuple[str, ...] = ("noon", "overcast", "dusk", "night")

    def vehicle(self) -> VehicleParams:
        return VehicleParams(self.speed, self.wheelbase, self.footprint_length, self.footprint_width, self.dt)

    def weather_presets(self):
        return [get_weather(w) for w in self.weathers]


@dataclass
class PerceptionSection:
    input_size: int = 64
    channel_schedule: tuple[int, ...] = (32, 64, 128, 256)
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    holdout: float = 0.1
    target_accuracy: float = 0.0  # stop early once held-out accuracy reaches this (0 disables)

    def spec(self) -> EncoderDecoderSpec:
        return EncoderDecoderSpec(self.input_size, tuple(self.channel_schedule))


@dataclass
class DqnSection:
    state_dim: int = 64
    n_actions: int = 3
    buffer_capacity: int = 7500
    gamma: float = 0.999
    target_sync_every: int = 256
    batch_size: int = 512
    max_episode_steps: int = 500
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    epsilon_start: float = 0.9
    epsilon_min: float = 0.04
    epsilon_decay_steps: float = 20_000.0
    total_steps: int = 150_000
    checkpoint_every: int = 10_000

    def config(self) -> DqnConfig:
        return DqnConfig(
            state_dim=self.state_dim,
            n_actions=self.n_actions,
            buffer_capacity=self.buffer_capacity,
            gamma=self.gamma,
            target_sync_every=self.target_sync_every,
            batch_size=self.batch_size,
            max_episode_steps=self.max_episode_steps,
            optimizer=self.optimizer,
            learning_rate=self.learning_rate,
            epsilon=EpsilonSchedule(self.epsilon_start, self.epsilon_min, self.epsilon_decay_steps),
        )


@dataclass
class RunConfig:
    simenv: SimenvSection = field(default_factory=SimenvSection)
    perception: PerceptionSection = field(default_factory=PerceptionSection)
    dqn: DqnSection = field(default_factory=DqnSection)
    seed: int = 0

    def set(self, key: str, raw: str) -> None:
        """Apply one ``section.key = value`` (or top-level ``seed``) assignment."""
        if key == "seed":
            self.seed = int(raw)
            return
        section_name, _, name = key.partition(".")
        section = getattr(self, section_name, None)
        if section is None or not dataclasses.is_dataclass(section):
            raise KeyError(f"unknown config section in {key!r}")
        types = {f.name: f for f in fields(section)}
        if name not in types:
            raise KeyError(f"unknown config key {key!r}")
        current = getattr(section, name)
        setattr(section, name, _coerce(current, raw.strip()))
        if section_name == "perception" and name == "input_size" and _schedule_mismatch(self):
            self.perception.channel_schedule = default_schedule(self.perception.input_size)

    def lines(self) -> list[str]:
        out = [f"seed = {self.seed}"]
        for section_name in ("simenv", "perception", "dqn"):
            section = getattr(self, section_name)
            for f in fields(section):
                out.append(f"{section_name}.{f.name} = {_format(getattr(section, f.name))}")
        return out

    def dump(self, path: Path) -> None:
        Path(path).write_text("\n".join(self.lines()) + "\n")


def _schedule_mismatch(cfg: RunConfig) -> bool:
    return len(cfg.perception.channel_schedule) != len(default_schedule(cfg.perception.input_size))


def _coerce(current, raw: str):
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if current and isinstance(current[0], int):
            return tuple(int(x) for x in items)
        return tuple(items)
    return raw


def _format(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_config_text(text: str, cfg: RunConfig | None = None) -> RunConfig:
    cfg = cfg or RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'section.key = value'")
        key, _, value = line.partition("=")
        try:
            cfg.set(key.strip(), value)
        except (KeyError, ValueError) as exc:
            raise ValueError(f"config line {lineno}: {exc}") from exc
    return cfg


def load_config(path: str | Path | None, overrides: list[str] | None = None, seed: int | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        parse_config_text(Path(path).read_text(), cfg)
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} must look like section.key=value")
        cfg.set(key.strip(), value)
    if seed is not None:
        cfg.seed = seed
    return cfg
