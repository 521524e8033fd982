"""Pragmatic verification: run check programs as embodied actions with binary status."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .dsl import Check, CheckProgram, Coord, LocSpec, move
from .kernel import FeatureRecord, PlannerResult
from .materials import AIR, DEFAULT_TABLE, MaterialTable
from .world import DEFAULT_KINEMATICS, Kinematics, WorldSnapshot, apply_action, standable

REASONS = ("no_path", "not_standable", "too_low", "wrong_material", "missing_anchor")

_SIDES = {
    "adjacent_north": (0, 1),
    "adjacent_south": (0, -1),
    "adjacent_east": (1, 0),
    "adjacent_west": (-1, 0),
}


@dataclass
class ResolvedCheck:
    check: Check
    points: dict[str, Coord | None]

    @property
    def missing(self) -> list[str]:
        return [k for k, v in self.points.items() if v is None]


@dataclass
class CheckOutcome:
    id: str
    kind: str
    status: int
    reason: str | None
    points: dict[str, Coord | None]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "status": self.status,
            "reason": self.reason,
            "points": {k: (list(v) if v is not None else None) for k, v in self.points.items()},
        }


@dataclass
class VerificationResult:
    checks: list[CheckOutcome] = field(default_factory=list)

    @property
    def statuses(self) -> list[int]:
        return [c.status for c in self.checks]

    @property
    def pass_rate(self) -> float:
        if not self.checks:
            return 0.0
        return sum(self.statuses) / len(self.checks)

    @property
    def failures(self) -> list[CheckOutcome]:
        return [c for c in self.checks if not c.status]

    def to_json(self) -> dict:
        return {"checks": [c.to_json() for c in self.checks], "pass_rate": self.pass_rate}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def _ground_height(w: WorldSnapshot, x: int, y: int, start: int, top: int, table: MaterialTable) -> int:
    """Nearest standable feet height in column (x, y), searching down from ``start`` then up to ``top``."""
    for z in range(start, -1, -1):
        if standable(w, (x, y, z), table):
            return z
    for z in range(start + 1, top + 1):
        if standable(w, (x, y, z), table):
            return z
    return start


def feature_point(rec: FeatureRecord, point: str, w: WorldSnapshot,
                  table: MaterialTable = DEFAULT_TABLE) -> Coord:
    xs = [c[0] for c in rec.cells]
    ys = [c[1] for c in rec.cells]
    zs = [c[2] for c in rec.cells]
    cx, cy = (min(xs) + max(xs)) // 2, (min(ys) + max(ys)) // 2
    if point == "top_center":
        return (cx, cy, rec.top_z)
    if point == "base_center":
        return (cx, cy, min(zs))
    dx, dy = _SIDES[point]
    x = max(xs) + 1 if dx > 0 else min(xs) - 1 if dx < 0 else cx
    y = max(ys) + 1 if dy > 0 else min(ys) - 1 if dy < 0 else cy
    return (x, y, _ground_height(w, x, y, min(zs), rec.top_z, table))


def resolve_loc(loc: LocSpec, w: WorldSnapshot, ledger: dict[str, FeatureRecord],
                fallback: dict[str, Coord] | None = None, table: MaterialTable = DEFAULT_TABLE) -> Coord | None:
    if loc.abs is not None:
        return tuple(loc.abs)
    if loc.anchor is not None:
        return w.anchors.get(loc.anchor)
    rec = ledger.get(loc.feature)
    if rec is not None and rec.cells:
        return feature_point(rec, loc.point, w, table)
    if fallback is not None:
        return fallback.get(loc.key())
    return None


def resolve(c: CheckProgram, w: WorldSnapshot, ledger: dict[str, FeatureRecord] | None = None,
            fallback: dict[str, Coord] | None = None, table: MaterialTable = DEFAULT_TABLE) -> list[ResolvedCheck]:
    """Turn every LocSpec into a coordinate; unresolvable ones become None."""
    ledger = ledger or {}
    return [ResolvedCheck(chk, {name: resolve_loc(loc, w, ledger, fallback, table)
                                for name, loc in chk.locs().items()})
            for chk in c.checks]


def _column_top(w: WorldSnapshot, p: Coord, table: MaterialTable) -> int | None:
    x, y, z = p
    tops = [cz for cz in range(max(z, 0), w.size[2]) if table.is_solid(w.blocks.get((x, y, cz)))]
    return max(tops) if tops else None


def _run_one(rc: ResolvedCheck, w: WorldSnapshot, kin: Kinematics, table: MaterialTable) -> tuple[int, str | None]:
    if rc.missing:
        return 0, "missing_anchor"
    chk, pts = rc.check, rc.points
    if chk.kind == "reachable":
        a, b = pts["from"], pts["to"]
        if not (standable(w, a, table) and standable(w, b, table)):
            return 0, "not_standable"
        scratch = w.copy()
        return (1, None) if apply_action(scratch, move(a, b), kin, table) else (0, "no_path")
    at = pts["at"]
    if chk.kind == "standable":
        return (1, None) if standable(w, at, table) else (0, "not_standable")
    if chk.kind == "height_at_least":
        top = _column_top(w, at, table)
        return (1, None) if top is not None and top >= chk.min_z else (0, "too_low")
    label = w.blocks.get(at) if w.in_bounds(at) else None
    if label is None:
        ok = chk.material == AIR
    else:
        ok = chk.material == label or (label in table and table.render_class(label) == chk.material)
    return (1, None) if ok else (0, "wrong_material")


def execute_checks(resolved: list[ResolvedCheck], w: WorldSnapshot, kin: Kinematics = DEFAULT_KINEMATICS,
                   table: MaterialTable = DEFAULT_TABLE) -> VerificationResult:
    """Run resolved checks against a frozen copy of ``w``; ``w`` is never modified."""
    frozen = w.copy()
    out = []
    for rc in resolved:
        status, reason = _run_one(rc, frozen, kin, table)
        out.append(CheckOutcome(rc.check.id, rc.check.kind, status, reason, dict(rc.points)))
    return VerificationResult(out)


def verify(c: CheckProgram, w: WorldSnapshot, ledger: dict[str, FeatureRecord] | None = None,
           kin: Kinematics = DEFAULT_KINEMATICS, table: MaterialTable = DEFAULT_TABLE) -> VerificationResult:
    return execute_checks(resolve(c, w, ledger, table=table), w, kin, table)


def migrate(c: CheckProgram, target_world: WorldSnapshot, target_ledger: dict[str, FeatureRecord] | None,
            default_points: dict[str, Coord] | None = None, kin: Kinematics = DEFAULT_KINEMATICS,
            table: MaterialTable = DEFAULT_TABLE) -> VerificationResult:
    """Re-target checks onto another building of the same task and run them.

    Terrain anchors re-resolve directly; feature points use the target ledger
    when the feature name exists there, else ``default_points``.
    """
    resolved = resolve(c, target_world, target_ledger or {}, default_points or {}, table)
    return execute_checks(resolved, target_world, kin, table)


# --------------------------------------------------------------------------
# reflection

@dataclass
class ReflectionPacket:
    iteration: int
    instruction: str
    result: VerificationResult
    build_statuses: list[int]
    renders: list[str]
    planner: list[PlannerResult] = field(default_factory=list)
    suggestions: str = ""

    @property
    def complete(self) -> bool:
        return bool(self.result.checks) and self.result.pass_rate == 1.0

    def to_json(self) -> dict:
        failed = [i for i, s in enumerate(self.build_statuses) if not s]
        return {
            "iteration": self.iteration,
            "instruction": self.instruction,
            "complete": self.complete,
            "pass_rate": self.result.pass_rate,
            "checks": [c.to_json() for c in self.result.checks],
            "failures": [{"id": c.id, "reason": c.reason,
                          "points": {k: (list(v) if v is not None else None) for k, v in c.points.items()}}
                         for c in self.result.failures],
            "build": {"actions": len(self.build_statuses), "failed": len(failed),
                      "statuses": "".join(map(str, self.build_statuses))},
            "planner": [{"feature": p.feature, "annotation": p.annotation, "status": p.status}
                        for p in self.planner],
            "renders": list(self.renders),
            "suggestions": self.suggestions,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, doc: dict) -> "ReflectionPacket":
        outcomes = [CheckOutcome(c["id"], c["kind"], c["status"], c["reason"],
                                 {k: (tuple(v) if v is not None else None) for k, v in c["points"].items()})
                    for c in doc["checks"]]
        return cls(
            iteration=doc["iteration"],
            instruction=doc["instruction"],
            result=VerificationResult(outcomes),
            build_statuses=[int(ch) for ch in doc["build"]["statuses"]],
            renders=list(doc["renders"]),
            planner=[PlannerResult(p["feature"], p["annotation"], p["status"]) for p in doc["planner"]],
            suggestions=doc["suggestions"],
        )


def make_packet(instruction: str, result: VerificationResult, build_statuses: list[int], renders: list[str],
                root: Path | str | None = None, iteration: int = 0,
                planner: list[PlannerResult] | None = None) -> ReflectionPacket:
    """Bundle the reflection inputs. Render paths (relative to ``root``) must already exist."""
    base = Path(root) if root is not None else Path(".")
    for r in renders:
        if not (base / r).is_file():
            raise FileNotFoundError(f"render {r!r} does not exist under {base}")
    return ReflectionPacket(iteration, instruction, result, list(build_statuses), list(renders),
                            list(planner or []))
