"""Lower an assembled model to world coordinates and compile construction actions."""
from __future__ import annotations

from dataclasses import dataclass, field

from . import errors
from .dsl import ActionScript, Coord, place
from .kernel import FeatureRecord, SolidModel
from .materials import DEFAULT_TABLE, MaterialTable
from .world import DEFAULT_KINEMATICS, Kinematics, WorldSnapshot, apply_action


@dataclass
class PlacedBuild:
    """A model translated into environment coordinates."""

    origin: Coord
    cells: dict[Coord, str]
    features: dict[str, FeatureRecord]
    collisions: list[Coord] = field(default_factory=list)


def export_coords(m: SolidModel, origin: Coord, world: WorldSnapshot | None = None) -> PlacedBuild:
    """Translate every cell and feature by ``origin``.

    With a world, the translated bounds must fit inside it and cells already
    occupied by terrain are reported as collisions.
    """
    ox, oy, oz = origin
    cells = {(x + ox, y + oy, z + oz): mat for (x, y, z), mat in m.cells.items()}
    features = {k: rec.translated(origin) for k, rec in m.features.items()}
    collisions: list[Coord] = []
    if world is not None:
        outside = [c for c in cells if not world.in_bounds(c)]
        if outside:
            raise errors.OutOfWorld(
                f"{len(outside)} cells fall outside the world, first {min(outside)} for size {world.size}")
        collisions = sorted(c for c in cells if c in world.blocks)
    return PlacedBuild(tuple(origin), cells, features, collisions)


def compile_build(cells: dict[Coord, str] | PlacedBuild, table: MaterialTable = DEFAULT_TABLE) -> ActionScript:
    """One place_block per cell, bottom-up: sorted by (z, y, x)."""
    if isinstance(cells, PlacedBuild):
        cells = cells.cells
    order = sorted(cells, key=lambda c: (c[2], c[1], c[0]))
    for c in order:
        if cells[c] not in table:
            raise errors.UnknownMaterial(f"cell {c} has unknown material {cells[c]!r}")
    return ActionScript([place(c, cells[c]) for c in order])


def execute_build(w: WorldSnapshot, s: ActionScript, kin: Kinematics = DEFAULT_KINEMATICS,
                  table: MaterialTable = DEFAULT_TABLE) -> tuple[WorldSnapshot, list[int]]:
    """Run every action in order on a copy of ``w``; never stops early."""
    out = w.copy()
    statuses = [apply_action(out, a, kin, table) for a in s]
    return out, statuses


def model_snapshot(m: SolidModel, headroom: int = 2) -> WorldSnapshot:
    """A standalone world holding just the model, shifted to non-negative cells.

    ``origin`` anchors the model's (0, 0, 0) when that lies inside the box; the
    player starts above the build.
    """
    b = m.bounds
    if b is None:
        w = WorldSnapshot((1, 1, headroom))
        w.anchors["origin"] = (0, 0, 0)
        return w
    lo, hi = b
    size = (hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2] + headroom)
    w = WorldSnapshot(size)
    for (x, y, z), mat in m.cells.items():
        w.blocks[(x - lo[0], y - lo[1], z - lo[2])] = mat
    origin = (-lo[0], -lo[1], -lo[2])
    if w.in_bounds(origin):
        w.anchors["origin"] = origin
    w.player = (0, 0, size[2] - headroom)
    return w
