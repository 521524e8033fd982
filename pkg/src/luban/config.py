"""JSON configuration with sections world, player, gateway, elo and tasks.

Command-line flags override file values; anything left unset keeps its default.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import errors
from .agent import AgentConfig
from .metrics import EloParams
from .tasks import TASK_IDS, data_dir
from .world import Kinematics

SECTIONS = ("world", "player", "gateway", "elo", "tasks")

_PLAYER_KEYS = ("step_up", "max_fall", "budget_factor", "budget_base")
_GATEWAY_KEYS = ("backend", "endpoint", "model", "transcripts", "strict", "k", "resample_rounds",
                 "max_iterations", "temperature")
_ELO_KEYS = ("init", "k", "shuffles", "seed")
_WORLD_KEYS = ("size", "model_scale", "world_scale")


@dataclass
class GatewayConfig:
    backend: str = "replay"
    endpoint: str = ""
    model: str = ""
    transcripts: str = ""
    strict: bool = False
    k: int = 3
    resample_rounds: int = 2
    max_iterations: int = 3
    temperature: float = 0.7

    def transcript_root(self) -> Path:
        return Path(self.transcripts) if self.transcripts else data_dir() / "transcripts"


@dataclass
class Config:
    world: dict = field(default_factory=dict)
    player: Kinematics = field(default_factory=Kinematics)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    elo: EloParams = field(default_factory=EloParams)
    tasks: dict = field(default_factory=dict)

    def agent(self) -> AgentConfig:
        return AgentConfig(
            k=self.gateway.k, resample_rounds=self.gateway.resample_rounds,
            max_iterations=self.gateway.max_iterations, temperature=self.gateway.temperature,
            model_scale=self.world.get("model_scale", 8), world_scale=self.world.get("world_scale", 4),
            kin=self.player)

    def overrides(self, task: str) -> dict:
        out = dict(self.tasks.get(task, {}))
        if "size" in self.world and "size" not in out:
            out["size"] = self.world["size"]
        return out


def _pick(section: str, doc: dict, allowed) -> dict:
    if not isinstance(doc, dict):
        raise errors.ConfigError(f"config section {section!r} must be an object")
    extra = sorted(set(doc) - set(allowed))
    if extra:
        raise errors.ConfigError(f"config section {section!r} has unknown keys {extra}")
    return doc


def load_config(path: Path | str | None = None) -> Config:
    if path is None:
        return Config()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise errors.DslSyntaxError(f"config: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise errors.ConfigError("config must be a JSON object")
    extra = sorted(set(doc) - set(SECTIONS))
    if extra:
        raise errors.ConfigError(f"unknown config sections {extra}")
    tasks = _pick("tasks", doc.get("tasks", {}), TASK_IDS)
    for t, v in tasks.items():
        _pick(f"tasks.{t}", v, ("params", "size"))
    return Config(
        world=_pick("world", doc.get("world", {}), _WORLD_KEYS),
        player=Kinematics(**_pick("player", doc.get("player", {}), _PLAYER_KEYS)),
        gateway=GatewayConfig(**_pick("gateway", doc.get("gateway", {}), _GATEWAY_KEYS)),
        elo=EloParams(**_pick("elo", doc.get("elo", {}), _ELO_KEYS)),
        tasks=tasks,
    )
