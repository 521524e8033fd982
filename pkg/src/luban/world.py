"""Block-world simulator: snapshots, player kinematics, action primitives.

The player is a 1x1x2 column identified by its feet cell. A feet position is
*standable* when feet and head are free (not solid, not liquid) and the player
is supported: a solid block below the feet, or the feet cell is climbable.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field, replace

from . import errors
from .dsl import Action, Coord
from .materials import AIR, DEFAULT_TABLE, MaterialTable

HORIZONTAL = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class Kinematics:
    step_up: int = 1
    max_fall: int = 3
    budget_factor: int = 10
    budget_base: int = 100

    def budget(self, a: Coord, b: Coord) -> int:
        return self.budget_factor * sum(abs(p - q) for p, q in zip(a, b)) + self.budget_base


DEFAULT_KINEMATICS = Kinematics()


@dataclass
class WorldSnapshot:
    size: tuple[int, int, int]
    blocks: dict[Coord, str] = field(default_factory=dict)
    anchors: dict[str, Coord] = field(default_factory=dict)
    player: Coord = (0, 0, 0)

    def copy(self) -> "WorldSnapshot":
        return replace(self, blocks=dict(self.blocks), anchors=dict(self.anchors))

    def in_bounds(self, c: Coord) -> bool:
        return all(0 <= v < s for v, s in zip(c, self.size))

    def get(self, c: Coord) -> str | None:
        return self.blocks.get(c)


# --------------------------------------------------------------------------
# predicates

def is_solid(w: WorldSnapshot, c: Coord, table: MaterialTable = DEFAULT_TABLE) -> bool:
    return table.is_solid(w.blocks.get(c))


def _free(w: WorldSnapshot, c: Coord, table: MaterialTable) -> bool:
    """Inside the world and enterable by the player's body."""
    if not w.in_bounds(c):
        return False
    m = w.blocks.get(c)
    return not (table.is_solid(m) or table.is_liquid(m))


def standable(w: WorldSnapshot, feet: Coord, table: MaterialTable = DEFAULT_TABLE) -> bool:
    x, y, z = feet
    if not (_free(w, feet, table) and _free(w, (x, y, z + 1), table)):
        return False
    if table.is_climbable(w.blocks.get(feet)):
        return True
    return z > 0 and table.is_solid(w.blocks.get((x, y, z - 1)))


def successors(w: WorldSnapshot, s: Coord, kin: Kinematics = DEFAULT_KINEMATICS,
               table: MaterialTable = DEFAULT_TABLE):
    """Legal single moves from standable feet position ``s``."""
    x, y, z = s
    for dx, dy in HORIZONTAL:
        nx, ny = x + dx, y + dy
        level = (nx, ny, z)
        if standable(w, level, table):
            yield level
        elif _free(w, level, table) and _free(w, (nx, ny, z + 1), table):
            # walk off an edge and drop until something supports the feet
            for d in range(1, kin.max_fall + 1):
                f = (nx, ny, z - d)
                if not _free(w, f, table):
                    break
                if standable(w, f, table):
                    yield f
                    break
        for k in range(1, kin.step_up + 1):
            # jumping needs room above the current head
            if not _free(w, (x, y, z + 1 + k), table):
                break
            t = (nx, ny, z + k)
            if standable(w, t, table):
                yield t
    here_climbable = table.is_climbable(w.blocks.get(s))
    for dz in (1, -1):
        t = (x, y, z + dz)
        if (here_climbable or table.is_climbable(w.blocks.get(t))) and standable(w, t, table):
            yield t


def find_path(w: WorldSnapshot, src: Coord, dst: Coord, budget: int | None = -1,
              kin: Kinematics = DEFAULT_KINEMATICS, table: MaterialTable = DEFAULT_TABLE) -> list[Coord] | None:
    """Shortest move sequence from ``src`` to ``dst`` (inclusive), or None.

    Best-first search with an admissible, consistent heuristic, so the first
    time ``dst`` is popped the path is shortest. ``budget`` bounds node
    expansions; -1 selects the default ``10 * L1 + 100``, None disables it.
    """
    src, dst = tuple(src), tuple(dst)
    if not (standable(w, src, table) and standable(w, dst, table)):
        return None
    if budget == -1:
        budget = kin.budget(src, dst)
    fall = max(kin.max_fall, 1)
    rise = max(kin.step_up, 1)

    def h(c: Coord) -> int:
        dxy = abs(c[0] - dst[0]) + abs(c[1] - dst[1])
        dz = dst[2] - c[2]
        return max(dxy, -(-dz // rise) if dz > 0 else 0, -(dz // fall) if dz < 0 else 0)

    parent: dict[Coord, Coord | None] = {src: None}
    g = {src: 0}
    # ties broken by deeper g first, then coordinates, for determinism
    heap = [(h(src), 0, src)]
    closed: set[Coord] = set()
    expansions = 0
    while heap:
        f, neg_g, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == dst:
            path = [cur]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        if budget is not None and expansions >= budget:
            return None
        closed.add(cur)
        expansions += 1
        gc = g[cur] + 1
        for nxt in successors(w, cur, kin, table):
            if nxt in closed or gc >= g.get(nxt, 1 << 60):
                continue
            g[nxt] = gc
            parent[nxt] = cur
            heapq.heappush(heap, (gc + h(nxt), -gc, nxt))
    return None


def path_is_legal(w: WorldSnapshot, path: list[Coord], kin: Kinematics = DEFAULT_KINEMATICS,
                  table: MaterialTable = DEFAULT_TABLE) -> bool:
    if not path or not standable(w, path[0], table):
        return False
    return all(b in set(successors(w, a, kin, table)) for a, b in zip(path, path[1:]))


# --------------------------------------------------------------------------
# transitions

def apply_action(w: WorldSnapshot, a: Action, kin: Kinematics = DEFAULT_KINEMATICS,
                 table: MaterialTable = DEFAULT_TABLE) -> int:
    """Apply ``a`` to ``w`` in place; return 1 on success, 0 (and no change) on failure."""
    if a.op == "place_block":
        p = a.pos
        x, y, z = w.player
        if (not w.in_bounds(p) or p in w.blocks or a.material not in table or a.material == AIR
                or p in ((x, y, z), (x, y, z + 1))):
            return 0
        w.blocks[p] = a.material
        return 1
    if a.op == "dig_block":
        m = w.blocks.get(a.pos)
        if m is None or m == "bedrock" or table.is_liquid(m):
            return 0
        del w.blocks[a.pos]
        return 1
    if a.op == "move":
        if find_path(w, a.src, a.dst, kin=kin, table=table) is None:
            return 0
        w.player = tuple(a.dst)
        return 1
    return 0


def step(w: WorldSnapshot, a: Action, kin: Kinematics = DEFAULT_KINEMATICS,
         table: MaterialTable = DEFAULT_TABLE) -> tuple[WorldSnapshot, int]:
    """Pure transition: returns (successor, status). Failure returns ``w`` itself."""
    nxt = w.copy()
    status = apply_action(nxt, a, kin, table)
    return (nxt, 1) if status else (w, 0)


# --------------------------------------------------------------------------
# snapshot JSON

def snapshot_to_json(w: WorldSnapshot) -> dict:
    return {
        "size": list(w.size),
        "blocks": [{"pos": list(p), "material": w.blocks[p]} for p in sorted(w.blocks)],
        "anchors": {k: list(w.anchors[k]) for k in sorted(w.anchors)},
        "player": list(w.player),
    }


def dumps_snapshot(w: WorldSnapshot) -> str:
    return json.dumps(snapshot_to_json(w), separators=(",", ":")) + "\n"


def save_snapshot(w: WorldSnapshot, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_snapshot(w))


def _triple(v, what: str) -> Coord:
    if not (isinstance(v, list) and len(v) == 3 and all(isinstance(c, int) and not isinstance(c, bool) for c in v)):
        raise errors.DslSyntaxError(f"{what}: expected an integer triple, got {v!r}")
    return tuple(v)


def loads_snapshot(text: str, table: MaterialTable = DEFAULT_TABLE) -> WorldSnapshot:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise errors.DslSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict) or set(doc) != {"size", "blocks", "anchors", "player"}:
        raise errors.DslSyntaxError("snapshot needs exactly the keys size, blocks, anchors, player")
    size = _triple(doc["size"], "size")
    if min(size) < 1:
        raise errors.DslSyntaxError("size components must be positive")
    w = WorldSnapshot(size)
    for i, b in enumerate(doc["blocks"]):
        if not isinstance(b, dict) or set(b) != {"pos", "material"}:
            raise errors.DslSyntaxError(f"blocks[{i}]: expected {{pos, material}}")
        p = _triple(b["pos"], f"blocks[{i}].pos")
        if not w.in_bounds(p):
            raise errors.OutOfBounds(f"block {p} outside world of size {size}")
        if b["material"] not in table or b["material"] == AIR:
            raise errors.UnknownMaterial(f"blocks[{i}]: unknown material {b['material']!r}")
        if p in w.blocks:
            raise errors.DslSyntaxError(f"blocks[{i}]: duplicate position {p}")
        w.blocks[p] = b["material"]
    if not isinstance(doc["anchors"], dict):
        raise errors.DslSyntaxError("anchors must be an object")
    for name, v in doc["anchors"].items():
        p = _triple(v, f"anchor {name}")
        if not w.in_bounds(p):
            raise errors.OutOfBounds(f"anchor {name!r} at {p} outside world")
        w.anchors[name] = p
    w.player = _triple(doc["player"], "player")
    if not w.in_bounds(w.player):
        raise errors.OutOfBounds(f"player at {w.player} outside world")
    return w


def load_snapshot(path, table: MaterialTable = DEFAULT_TABLE) -> WorldSnapshot:
    with open(path, encoding="utf-8") as fh:
        return loads_snapshot(fh.read(), table)
