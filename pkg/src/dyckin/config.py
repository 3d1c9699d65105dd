"""Run configuration: nested dataclasses loaded from and saved to YAML."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, get_args, get_origin, get_type_hints

import yaml

from .dyck import MAX_TYPES
from .learning import (DETERMINISTIC, EPSILON_RANDOM, SAMPLE, TEMPORAL_DIFFERENCE,
                       WHOLE_EPISODE)

RANDOM_INIT = "random-init"
PRETRAINED = "pretrained"


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class DyckSection:
    num_bracket_types: int = 2
    close_probability: float = 0.5
    code_dim: int = 8


@dataclass
class NetworkSection:
    pu_hidden: list[int] = field(default_factory=lambda: [32])
    cu_hidden: list[int] = field(default_factory=lambda: [64])


@dataclass
class LadderSection:
    start_length: int = 10
    # None: include the bracket-matching warm-up only for random-init runs
    bracket_match: Optional[bool] = None
    window: int = 100
    revisit_probability: float = 0.1
    unlock_threshold: float = 0.95


@dataclass
class RewardSection:
    scheme: str = WHOLE_EPISODE
    gamma: float = 0.9
    baseline: bool = True
    baseline_decay: float = 0.99
    baseline_initial: float = 0.0


@dataclass
class ExplorationSection:
    variant: str = DETERMINISTIC
    epsilon: float = 0.0


@dataclass
class SgdSection:
    learning_rate: float = 0.01
    clip: Optional[float] = 5.0


@dataclass
class ReplaySection:
    capacity: int = 50_000
    batch_size: int = 64
    updates_per_episode: int = 1


@dataclass
class PretrainSection:
    lengths: list[int] = field(default_factory=lambda: [2, 4, 6, 8, 10])
    episodes_per_length: int = 200
    target_agreement: float = 0.90
    noise_sigma: float = 0.05
    learning_rate: float = 0.05
    max_epochs: int = 20
    check_every: int = 256
    holdout: float = 0.1


@dataclass
class TrainSection:
    max_episodes: int = 150_000
    # stop once this level label (e.g. "D100") has been passed
    stop_after: Optional[str] = None
    # per-level cap on episodes spent as the frontier, e.g. {"D10": 50000}
    frontier_budget: dict[str, int] = field(default_factory=dict)
    checkpoint_on_unlock: bool = True


@dataclass
class RunConfig:
    mode: str = RANDOM_INIT
    seed: int = 0
    out_dir: str = "runs/default"
    dyck: DyckSection = field(default_factory=DyckSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    ladder: LadderSection = field(default_factory=LadderSection)
    reward: RewardSection = field(default_factory=RewardSection)
    exploration: ExplorationSection = field(default_factory=ExplorationSection)
    cu_sgd: SgdSection = field(default_factory=lambda: SgdSection(0.01, 5.0))
    pu_sgd: SgdSection = field(default_factory=lambda: SgdSection(0.3, 5.0))
    replay: ReplaySection = field(default_factory=ReplaySection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    train: TrainSection = field(default_factory=TrainSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "RunConfig":
        _validate(self)
        return self

    def replace(self, **changes) -> "RunConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"train.max_episodes": 10})``."""
        data = self.to_dict()
        for path, value in changes.items():
            node = data
            *parents, leaf = path.split(".")
            for p in parents:
                node = node[p]
            node[leaf] = value
        return from_dict(data)


def _check(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(name, message)


def _validate(c: RunConfig) -> None:
    _check(c.mode in (RANDOM_INIT, PRETRAINED), "mode", f"must be {RANDOM_INIT!r} or {PRETRAINED!r}")
    _check(1 <= c.dyck.num_bracket_types <= MAX_TYPES, "dyck.num_bracket_types",
           f"must be in [1, {MAX_TYPES}]")
    _check(0.0 <= c.dyck.close_probability <= 1.0, "dyck.close_probability", "must be in [0, 1]")
    _check(c.dyck.code_dim >= 1, "dyck.code_dim", "must be >= 1")
    for name in ("pu_hidden", "cu_hidden"):
        _check(all(h >= 1 for h in getattr(c.network, name)), f"network.{name}",
               "sizes must be >= 1")
    _check(c.ladder.start_length >= 2, "ladder.start_length", "must be >= 2")
    _check(c.ladder.window >= 1, "ladder.window", "must be >= 1")
    _check(0.0 <= c.ladder.revisit_probability <= 1.0, "ladder.revisit_probability",
           "must be in [0, 1]")
    _check(0.0 < c.ladder.unlock_threshold <= 1.0, "ladder.unlock_threshold", "must be in (0, 1]")
    _check(c.reward.scheme in (WHOLE_EPISODE, TEMPORAL_DIFFERENCE), "reward.scheme",
           f"must be {WHOLE_EPISODE!r} or {TEMPORAL_DIFFERENCE!r}")
    _check(0.0 < c.reward.gamma <= 1.0, "reward.gamma", "must be in (0, 1]")
    _check(0.0 <= c.reward.baseline_decay < 1.0, "reward.baseline_decay", "must be in [0, 1)")
    _check(c.exploration.variant in (DETERMINISTIC, EPSILON_RANDOM, SAMPLE),
           "exploration.variant", f"must be one of {DETERMINISTIC}, {EPSILON_RANDOM}, {SAMPLE}")
    _check(0.0 <= c.exploration.epsilon <= 1.0, "exploration.epsilon", "must be in [0, 1]")
    for name in ("cu_sgd", "pu_sgd"):
        s = getattr(c, name)
        _check(s.learning_rate > 0, f"{name}.learning_rate", "must be > 0")
        _check(s.clip is None or s.clip > 0, f"{name}.clip", "must be > 0 or null")
    _check(c.replay.capacity >= 1, "replay.capacity", "must be >= 1")
    _check(c.replay.batch_size >= 1, "replay.batch_size", "must be >= 1")
    _check(c.replay.updates_per_episode >= 0, "replay.updates_per_episode", "must be >= 0")
    p = c.pretrain
    _check(bool(p.lengths) and all(n >= 0 for n in p.lengths), "pretrain.lengths",
           "must be a non-empty list of lengths >= 0")
    _check(p.episodes_per_length >= 1, "pretrain.episodes_per_length", "must be >= 1")
    _check(0.0 < p.target_agreement <= 1.0, "pretrain.target_agreement", "must be in (0, 1]")
    _check(p.noise_sigma >= 0.0, "pretrain.noise_sigma", "must be >= 0")
    _check(p.learning_rate > 0, "pretrain.learning_rate", "must be > 0")
    _check(0.0 < p.holdout < 1.0, "pretrain.holdout", "must be in (0, 1)")
    _check(c.train.max_episodes >= 0, "train.max_episodes", "must be >= 0")
    for k, v in c.train.frontier_budget.items():
        _check(v >= 1, f"train.frontier_budget.{k}", "must be >= 1")


def _coerce(value: Any, tp: Any, name: str) -> Any:
    origin = get_origin(tp)
    if origin is Optional or (origin is not None and type(None) in get_args(tp)):
        if value is None:
            return None
        (inner,) = [a for a in get_args(tp) if a is not type(None)]
        return _coerce(value, inner, name)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(name, "expected a mapping")
        return _build(tp, value, name + ".")
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(name, "expected a list")
        (inner,) = get_args(tp)
        return [_coerce(v, inner, f"{name}[{i}]") for i, v in enumerate(value)]
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(name, "expected a mapping")
        k_tp, v_tp = get_args(tp)
        return {_coerce(k, k_tp, name): _coerce(v, v_tp, f"{name}.{k}") for k, v in value.items()}
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(name, f"expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
        return value
    return value


def _build(cls, data: dict, prefix: str = ""):
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        first = sorted(unknown)[0]
        raise ConfigError(prefix + first, "unknown field")
    kwargs = {k: _coerce(v, hints[k], prefix + k) for k, v in data.items()}
    return cls(**kwargs)


def from_dict(data: dict | None) -> RunConfig:
    return _build(RunConfig, data or {}).validate()


def load_config(path) -> RunConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as e:
        raise ConfigError("<file>", f"cannot parse {path}: {e}") from e
    if data is not None and not isinstance(data, dict):
        raise ConfigError("<file>", "top level must be a mapping")
    return from_dict(data)


def dumps_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg))


BUNDLED = ("random_init_td", "random_init_whole_episode", "random_init_deterministic",
           "pretrained_whole_episode", "bracket_match_first")


def bundled_config_path(name: str) -> Path:
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled config {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(str(resources.files("dyckin") / "configs" / f"{name}.yaml"))


def resolve_config(name_or_path) -> RunConfig:
    """A bundled config name or a path to a YAML file."""
    if str(name_or_path) in BUNDLED:
        return load_config(bundled_config_path(str(name_or_path)))
    return load_config(name_or_path)
