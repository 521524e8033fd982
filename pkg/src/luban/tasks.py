"""Benchmark task fixtures and their procedural terrain."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import errors
from .dsl import CheckProgram, Coord, parse_checks
from .world import WorldSnapshot

TASK_IDS = ("arrow-tower", "bridge", "chinese-ancient-house", "stair", "two-story-house")
HOUSE_TASKS = ("chinese-ancient-house", "two-story-house")
DEFAULT_SIZE = (32, 24, 24)


@dataclass
class TaskFixture:
    task_id: str
    instruction: str
    images: list[str] = field(default_factory=list)
    params: dict[str, int] = field(default_factory=dict)
    size: tuple[int, int, int] = DEFAULT_SIZE
    checks: CheckProgram = field(default_factory=CheckProgram)
    # fallback coordinates for feature LocSpecs, keyed by LocSpec.key()
    default_points: dict[str, Coord] = field(default_factory=dict)

    def image_paths(self) -> list[Path]:
        root = data_dir() / "tasks"
        return [root / p for p in self.images]


def data_dir() -> Path:
    return Path(str(resources.files("luban") / "data"))


def load_fixture(task_id: str, overrides: dict | None = None) -> TaskFixture:
    """Load a shipped fixture; ``overrides`` may replace ``params`` entries or ``size``."""
    if task_id not in TASK_IDS:
        raise errors.UnknownTask(f"unknown task {task_id!r}; expected one of {', '.join(TASK_IDS)}")
    doc = json.loads((data_dir() / "tasks" / f"{task_id}.json").read_text(encoding="utf-8"))
    fx = TaskFixture(
        task_id=doc["task_id"],
        instruction=doc["instruction"],
        images=list(doc.get("images", [])),
        params={k: int(v) for k, v in doc.get("params", {}).items()},
        size=tuple(doc.get("size", DEFAULT_SIZE)),
        checks=parse_checks(json.dumps(doc["checks"])),
        default_points={k: tuple(v) for k, v in doc.get("default_points", {}).items()},
    )
    overrides = overrides or {}
    if "size" in overrides:
        fx.size = tuple(overrides["size"])
    for k, v in overrides.get("params", {}).items():
        fx.params[k] = int(v)
    for k, v in fx.params.items():
        if v < 1:
            raise errors.FixtureTooLargeForWorld(f"parameter {k} must be positive, got {v}")
    return fx


def generate_terrain(f: TaskFixture, size: tuple[int, int, int] | None = None) -> WorldSnapshot:
    """Flat dirt ground at z=0 plus the task's obstacle and named anchors."""
    X, Y, Z = size or f.size
    if X < 12 or Y < 6 or Z < 6:
        raise errors.FixtureTooLargeForWorld(f"world {X}x{Y}x{Z} is too small for any task")
    w = WorldSnapshot((X, Y, Z))
    for x in range(X):
        for y in range(Y):
            w.blocks[(x, y, 0)] = "dirt"
    cy = Y // 2
    w.anchors["ground_origin"] = (1, 1, 1)
    t = f.task_id

    if t == "bridge":
        width = f.params["river_width"]
        x0 = X // 2 - width // 2
        if x0 - 3 < 0 or x0 + width + 3 >= X:
            raise errors.FixtureTooLargeForWorld(f"river of width {width} does not fit in x extent {X}")
        for x in range(x0, x0 + width):
            for y in range(Y):
                w.blocks[(x, y, 0)] = "water"
        w.anchors["west_bank"] = (x0 - 3, cy, 1)
        w.anchors["east_bank"] = (x0 + width + 3, cy, 1)
        w.anchors["build_origin"] = (x0 + width // 2, cy, 1)
    elif t == "stair":
        h = f.params["cliff_height"]
        xc = X // 2 + 4
        if h + 3 >= Z or xc + 3 >= X or xc - 8 < 0:
            raise errors.FixtureTooLargeForWorld(f"cliff of height {h} does not fit in world {X}x{Y}x{Z}")
        for x in range(xc, X):
            for y in range(Y):
                for z in range(1, h + 1):
                    w.blocks[(x, y, z)] = "dirt"
        w.anchors["cliff_base"] = (xc - 8, cy, 1)
        w.anchors["cliff_top"] = (xc + 2, cy, h + 1)
        w.anchors["build_origin"] = (xc - 3, cy, 1)
    elif t == "arrow-tower":
        h = f.params["column_height"]
        cx = X // 4
        if h + 3 >= Z:
            raise errors.FixtureTooLargeForWorld(f"column of height {h} does not fit in z extent {Z}")
        for z in range(h):
            w.blocks[(cx, cy, z)] = "stone"
        w.anchors["column_top"] = (cx, cy, h)
        w.anchors["build_origin"] = (X // 2 + 4, cy, 1)
    elif t in HOUSE_TASKS:
        w.anchors["build_origin"] = (X // 2, cy, 1)
        w.anchors["house_inside"] = (X // 2, cy, 1)
        w.anchors["house_outside"] = (2, 2, 1)
    else:
        raise errors.UnknownTask(f"unknown task {t!r}")
    w.player = w.anchors["ground_origin"]
    return w
