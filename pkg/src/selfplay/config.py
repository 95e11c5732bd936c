"""Run configuration: dataclasses, TOML round-trip, dotted overrides.

Unknown keys are rejected with their full dotted path. Defaults follow the
reference hyperparameters except the learning rate, whose reference
value is kept alongside as ``learning_rate_paper_value``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

OPPONENT_KINDS = ("SelfPlayShared", "UniformRandomLegal", "Scripted", "FrozenCheckpoint")
EVAL_OPPONENTS = ("UniformRandomLegal", "FrozenLag", "Scripted")


@dataclass
class GameEntry:
    name: str = "KuhnPoker"
    weight: float = 1.0
    params: dict = field(default_factory=dict)


@dataclass
class RunSection:
    seed: int = 0
    total_steps: int = 400
    batch_size: int = 128
    actors: int = 1
    checkpoint_every: int = 16
    log_trajectories_every: int = 0
    max_retries: int = 3


@dataclass
class PolicySection:
    temperature: float = 1.0
    mask: str = "full"


@dataclass
class RaeSection:
    enabled: bool = True
    alpha: float = 0.95


@dataclass
class LearnerConfig:
    learning_rate: float = 1e-2
    learning_rate_paper_value: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    weight_decay: float = 0.0
    max_grad_norm: float = 1.0
    inner_epochs: int = 2
    clip_eps: float = 0.2
    optimizer: str = "adam"
    kl_loss_coef: float = 0.0
    kl_penalty_coef: float = 0.0


@dataclass
class OpponentSpec:
    kind: str = "SelfPlayShared"
    script: str = ""
    path: str = ""
    lag_steps: int = 16
    greedy: bool = False


@dataclass
class EvalSection:
    every: int = 16
    games: int = 128
    opponents: list = field(default_factory=lambda: ["UniformRandomLegal", "FrozenLag"])
    lag_steps: int = 16
    greedy: bool = True


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    games: list = field(default_factory=lambda: [GameEntry()])
    policy: PolicySection = field(default_factory=PolicySection)
    rae: RaeSection = field(default_factory=RaeSection)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    opponent: OpponentSpec = field(default_factory=OpponentSpec)
    eval: EvalSection = field(default_factory=EvalSection)

    def to_dict(self) -> dict:
        return to_dict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def game_weights(self) -> list[float]:
        w = [g.weight for g in self.games]
        s = sum(w)
        return [x / s for x in w]


_SECTIONS = {
    "run": RunSection,
    "policy": PolicySection,
    "rae": RaeSection,
    "learner": LearnerConfig,
    "opponent": OpponentSpec,
    "eval": EvalSection,
}


def to_dict(cfg: RunConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        out[name] = dataclasses.asdict(getattr(cfg, name))
    out["games"] = [{"name": g.name, "weight": g.weight, **g.params} for g in cfg.games]
    return out


def _coerce(path: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return list(value)
    return value


def _section(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix}: expected a table")
    defaults = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{prefix}.{key}: unknown key")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            kwargs[f.name] = _coerce(f"{prefix}.{f.name}", data[f.name], getattr(defaults, f.name))
    return cls(**kwargs)


def _game_entries(raw, prefix="games") -> list[GameEntry]:
    from inspect import signature

    from .core import make_game, registered_games

    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{prefix}: expected a non-empty list of game tables")
    out = []
    for i, item in enumerate(raw):
        p = f"{prefix}[{i}]"
        if not isinstance(item, dict) or "name" not in item:
            raise ConfigError(f"{p}: each game needs a name")
        name = item["name"]
        if name not in registered_games():
            raise ConfigError(f"{p}.name: unknown game {name!r}")
        weight = _coerce(f"{p}.weight", item.get("weight", 1.0), 1.0)
        if not weight > 0:
            raise ConfigError(f"{p}.weight: must be positive")
        params = {k: v for k, v in item.items() if k not in ("name", "weight")}
        cls = type(make_game(name))
        allowed = set(signature(cls.__init__).parameters) - {"self"}
        for k in params:
            if k not in allowed:
                raise ConfigError(f"{p}.{k}: unknown key")
        try:
            make_game(name, **params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{p}: {exc}") from None
        out.append(GameEntry(name, weight, params))
    return out


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    for key in data:
        if key not in _SECTIONS and key != "games":
            raise ConfigError(f"{key}: unknown key")
    kwargs = {name: _section(cls, data.get(name, {}), name) for name, cls in _SECTIONS.items()}
    if "games" in data:
        kwargs["games"] = _game_entries(data["games"])
    cfg = RunConfig(**kwargs)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    r = cfg.run
    if r.total_steps < 0:
        raise ConfigError("run.total_steps: must be >= 0")
    if r.batch_size < 1:
        raise ConfigError("run.batch_size: must be >= 1")
    if r.actors < 1:
        raise ConfigError("run.actors: must be >= 1")
    if r.checkpoint_every < 1:
        raise ConfigError("run.checkpoint_every: must be >= 1")
    if cfg.policy.temperature <= 0:
        raise ConfigError("policy.temperature: must be positive")
    if cfg.policy.mask not in ("full", "legal"):
        raise ConfigError("policy.mask: must be 'full' or 'legal'")
    if not 0.0 <= cfg.rae.alpha <= 1.0:
        raise ConfigError("rae.alpha: must lie in [0, 1]")
    ln = cfg.learner
    if ln.optimizer not in ("adam", "sgd"):
        raise ConfigError("learner.optimizer: must be 'adam' or 'sgd'")
    if ln.inner_epochs < 1:
        raise ConfigError("learner.inner_epochs: must be >= 1")
    if ln.learning_rate < 0:
        raise ConfigError("learner.learning_rate: must be >= 0")
    if ln.clip_eps <= 0:
        raise ConfigError("learner.clip_eps: must be positive")
    if ln.max_grad_norm <= 0:
        raise ConfigError("learner.max_grad_norm: must be positive")
    if ln.kl_loss_coef != 0.0 or ln.kl_penalty_coef != 0.0:
        raise ConfigError("learner.kl_*_coef: only 0.0 is supported")
    if cfg.opponent.kind not in OPPONENT_KINDS:
        raise ConfigError(f"opponent.kind: must be one of {OPPONENT_KINDS}")
    if cfg.opponent.kind == "FrozenCheckpoint" and not cfg.opponent.path and cfg.opponent.lag_steps < 0:
        raise ConfigError("opponent.lag_steps: must be >= 0")
    for i, o in enumerate(cfg.eval.opponents):
        if o not in EVAL_OPPONENTS:
            raise ConfigError(f"eval.opponents[{i}]: must be one of {EVAL_OPPONENTS}")
    if cfg.eval.every < 0:
        raise ConfigError("eval.every: must be >= 0")


def loads(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from None
    return from_dict(data)


def load(path) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: TOML parse error: {exc}") from None
    return from_dict(data)


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _section_of(name: str) -> str:
    """Section owning a bare field name, if exactly one does."""
    owners = [sec for sec, cls in _SECTIONS.items() if name in {f.name for f in dataclasses.fields(cls)}]
    if len(owners) != 1:
        where = "no section" if not owners else "sections " + ", ".join(owners)
        raise ConfigError(f"{name}: bare override key matches {where}; use section.{name}")
    return owners[0]


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``a.b=value`` strings to a raw config dict (TOML value syntax)."""
    data = json.loads(json.dumps(data))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        value = _parse_value(raw.strip())
        if len(parts) == 1 and parts[0] not in _SECTIONS and parts[0] != "games":
            parts = [_section_of(parts[0]), parts[0]]
        if parts[0] == "games":
            if len(parts) == 1:
                if not isinstance(value, list):
                    raise ConfigError("games: override must be a list of tables")
                data["games"] = value
                continue
            try:
                idx = int(parts[1])
                target = data.setdefault("games", [{"name": "KuhnPoker"}])[idx]
            except (ValueError, IndexError):
                raise ConfigError(f"{key}: bad games index") from None
            target[".".join(parts[2:])] = value
            continue
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{key}: not a table")
        node[parts[-1]] = value
    return data


def resolve(path=None, overrides=()) -> RunConfig:
    data = {}
    if path is not None:
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: TOML parse error: {exc}") from None
    return from_dict(apply_overrides(data, overrides))
