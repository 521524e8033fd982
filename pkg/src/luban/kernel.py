"""Execute modeling programs into labelled voxel solids.

Panels live in a corner-origin local frame: cells ``(i, j, k)`` with
``0 <= i < x_dim``, ``0 <= j < y_dim``, ``0 <= k < thickness``. Feature
positions are offsets from the panel's xy-centre, so a rectangle's corner is
``centre + pos - shape / 2`` and must land on the lattice.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from . import errors
from .dsl import Coord, ModelProgram, PanelDef, Placement, VerificationAnnotation
from .materials import AIR, DEFAULT_TABLE, MaterialTable, material_from_annotation

# world axes: x east, y north, z up. Each orientation maps a local point to
# world as ``out[i] = sign[i] * local[axis[i]]``.
_ORIENT: dict[str, tuple[tuple[int, int], ...]] = {
    "up": ((0, 1), (1, 1), (2, 1)),
    "down": ((0, 1), (1, -1), (2, -1)),
    "north": ((0, 1), (2, 1), (1, -1)),
    "south": ((0, 1), (2, -1), (1, 1)),
    "east": ((2, 1), (1, 1), (0, -1)),
    "west": ((2, -1), (1, 1), (0, 1)),
}
INVERSE = {"up": "up", "down": "down", "north": "south", "south": "north", "east": "west", "west": "east"}


@dataclass
class FeatureRecord:
    kind: str  # base | hole | fill | grow
    cells: frozenset[Coord]
    material: str
    top_z: int
    anno: str = ""
    vanno: VerificationAnnotation | None = None

    def translated(self, offset: Coord) -> "FeatureRecord":
        ox, oy, oz = offset
        cells = frozenset((x + ox, y + oy, z + oz) for x, y, z in self.cells)
        return FeatureRecord(self.kind, cells, self.material, self.top_z + oz, self.anno, self.vanno)


@dataclass
class PanelSolid:
    """A built panel in its local frame."""

    name: str
    size: tuple[int, int, int]
    cells: dict[Coord, str]
    features: dict[str, FeatureRecord]


@dataclass
class SolidModel:
    cells: dict[Coord, str] = field(default_factory=dict)
    features: dict[str, FeatureRecord] = field(default_factory=dict)
    overlaps: list[Coord] = field(default_factory=list)

    @property
    def bounds(self) -> tuple[Coord, Coord] | None:
        """(min corner, exclusive max corner), or None when empty."""
        if not self.cells:
            return None
        xs, ys, zs = zip(*self.cells)
        return (min(xs), min(ys), min(zs)), (max(xs) + 1, max(ys) + 1, max(zs) + 1)


def _top(cells) -> int:
    return max(c[2] for c in cells) + 1 if cells else 0


def _rect(panel: PanelDef, pos, shape, line) -> tuple[int, int]:
    corner = []
    for dim, p, s in zip((panel.x_dim, panel.y_dim), pos, shape):
        c = Fraction(dim, 2) + Fraction(p) - Fraction(s, 2)
        if c.denominator != 1:
            raise errors.MisalignedFeature(
                f"rectangle corner {float(c)} in panel {panel.name!r} is not on the block lattice", line)
        corner.append(int(c))
    return corner[0], corner[1]


def build_panel(pdef: PanelDef, table: MaterialTable = DEFAULT_TABLE) -> PanelSolid:
    """Instantiate a panel slab and apply its feature ops in order."""
    X, Y, T = pdef.x_dim, pdef.y_dim, pdef.thickness
    if min(X, Y, T) < 1:
        raise errors.NonPositiveDimension(f"panel {pdef.name!r} has a non-positive dimension", pdef.line)
    base_mat = material_from_annotation(pdef.anno, table)
    cells = {(i, j, k): base_mat for i in range(X) for j in range(Y) for k in range(T)}
    features = {pdef.name: FeatureRecord("base", frozenset(cells), base_mat, T, pdef.anno, pdef.vanno)}
    filled: set[str] = set()

    for op in pdef.ops:
        if op.name in features:
            raise errors.DuplicateName(f"feature {op.name!r} already defined in panel {pdef.name!r}", op.line)
        if op.kind == "sub_rect":
            x0, y0 = _rect(pdef, op.pos, op.shape, op.line)
            w, h = op.shape
            if x0 < 0 or y0 < 0 or x0 + w > X or y0 + h > Y:
                raise errors.OutOfPanel(f"sub_rect {op.name!r} leaves panel {pdef.name!r}", op.line)
            cut = frozenset((i, j, k) for i in range(x0, x0 + w) for j in range(y0, y0 + h) for k in range(T))
            for c in cut:
                cells.pop(c, None)
            features[op.name] = FeatureRecord("hole", cut, AIR, _top(cut), "", op.vanno)
        elif op.kind == "fill_rect":
            hole = features.get(op.hole)
            if hole is None or hole.kind != "hole" or op.hole in filled:
                raise errors.RefillWithoutHole(f"fill_rect {op.name!r}: {op.hole!r} is not an open hole", op.line)
            filled.add(op.hole)
            mat = material_from_annotation(op.anno, table)
            for c in hole.cells:
                cells[c] = mat
            features[op.name] = FeatureRecord("fill", hole.cells, mat, _top(hole.cells), op.anno, op.vanno)
        elif op.kind == "grow_rect":
            base = features.get(op.base)
            if base is None:
                raise errors.UnknownBase(f"grow_rect {op.name!r}: unknown base {op.base!r}", op.line)
            x0, y0 = _rect(pdef, op.pos, op.shape, op.line)
            w, h = op.shape
            z0 = base.top_z
            grown = frozenset((i, j, k) for i in range(x0, x0 + w) for j in range(y0, y0 + h)
                              for k in range(z0, z0 + op.thickness))
            mat = material_from_annotation(op.anno, table)
            for c in grown:
                cells[c] = mat
            features[op.name] = FeatureRecord("grow", grown, mat, z0 + op.thickness, op.anno, op.vanno)
        else:
            raise errors.DslSyntaxError(f"unknown feature op {op.kind!r}", op.line)
    return PanelSolid(pdef.name, (X, Y, T), cells, features)


def orient_cell(cell: Coord, o: str) -> Coord:
    """Map a unit cell through orientation ``o`` (about the local origin)."""
    out = []
    for axis, sign in _ORIENT[o]:
        c = cell[axis]
        # floor(-(c + 0.5)) == -c - 1
        out.append(c if sign > 0 else -c - 1)
    return tuple(out)


def orient_point(p, o: str) -> tuple[Fraction, Fraction, Fraction]:
    return tuple(sign * Fraction(p[axis]) for axis, sign in _ORIENT[o])


def orient(cells, o: str):
    """Orient a set of cells, or a cell->value mapping, about the local origin."""
    if o not in _ORIENT:
        raise errors.BadOrientation(f"unknown orientation {o!r}")
    if isinstance(cells, dict):
        return {orient_cell(c, o): v for c, v in cells.items()}
    return {orient_cell(c, o) for c in cells}


def placement_offset(pdef: PanelDef, pos, o: str, line=None) -> Coord:
    """Integer translation taking oriented local cells to world cells."""
    ref = orient_point((Fraction(pdef.x_dim, 2), Fraction(pdef.y_dim, 2), 0), o)
    t = [Fraction(p) - r for p, r in zip(pos, ref)]
    if any(v.denominator != 1 for v in t):
        raise errors.PlacementMisaligned(
            f"panel {pdef.name!r} at {tuple(float(p) for p in pos)} facing {o} does not land on the lattice", line)
    return tuple(int(v) for v in t)


def _transform(cells, o: str, t: Coord):
    tx, ty, tz = t
    return [(x + tx, y + ty, z + tz) for x, y, z in (orient_cell(c, o) for c in cells)]


def assemble(p: ModelProgram, table: MaterialTable = DEFAULT_TABLE) -> SolidModel:
    """Build, orient and place every placed panel. Later placements win overlaps."""
    model = SolidModel()
    owner: dict[Coord, str] = {}
    seen: set[str] = set()
    for pl in p.placements:
        if pl.panel in seen:
            raise errors.PanelPlacedTwice(f"panel {pl.panel!r} placed more than once", pl.line)
        seen.add(pl.panel)
        pdef = p.panel(pl.panel)
        if pdef is None:
            raise errors.UnknownReference(f"panel {pl.panel!r} is not declared", pl.line)
        solid = build_panel(pdef, table)
        t = placement_offset(pdef, pl.pos, pl.orientation, pl.line)
        for c, mat in solid.cells.items():
            w = _transform([c], pl.orientation, t)[0]
            prev = owner.get(w)
            if prev is not None and prev != pl.panel:
                model.overlaps.append(w)
            owner[w] = pl.panel
            model.cells[w] = mat
        for fname, rec in solid.features.items():
            wc = frozenset(_transform(rec.cells, pl.orientation, t))
            model.features[f"{pdef.name}.{fname}"] = FeatureRecord(
                rec.kind, wc, rec.material, _top(wc), rec.anno, rec.vanno)
    model.overlaps = sorted(set(model.overlaps))
    return model


def preview_program(p: ModelProgram, gap: int = 2) -> ModelProgram:
    """Lay every panel flat in a row so subcomponent-only programs can be rendered."""
    out = ModelProgram(panels=list(p.panels))
    x = 0
    for panel in p.panels:
        pos = (Fraction(x) + Fraction(panel.x_dim, 2), Fraction(panel.y_dim, 2), Fraction(0))
        out.placements.append(Placement(panel.name, pos, "up"))
        x += panel.x_dim + gap
    return out


# --------------------------------------------------------------------------
# planner-side verification

_HEIGHT = re.compile(r"^\s*height\s*>=\s*(-?\d+)\s*$")
_FOOTPRINT = re.compile(r"^\s*within_footprint\s+(\d+)\s+(\d+)\s*$")
_ABOVE = re.compile(r"^\s*above_ground\s*$")


@dataclass(frozen=True)
class PlannerResult:
    feature: str
    annotation: str
    status: str  # pass | fail | unevaluated


def planner_checks(p: ModelProgram, m: SolidModel) -> list[PlannerResult]:
    """Evaluate planner-type verification annotations against the assembled model.

    Vocabulary: ``height>=N`` (feature top_z), ``within_footprint W L`` (whole
    model's xy extent, either orientation), ``above_ground`` (feature min z >= 0).
    """
    out = []
    bounds = m.bounds
    for key, rec in m.features.items():
        v = rec.vanno
        if v is None or v.vtype != "planner":
            continue
        text = v.anno
        if mt := _HEIGHT.match(text):
            ok = rec.top_z >= int(mt.group(1))
        elif mt := _FOOTPRINT.match(text):
            if bounds is None:
                ok = True
            else:
                ext = sorted((bounds[1][0] - bounds[0][0], bounds[1][1] - bounds[0][1]))
                lim = sorted((int(mt.group(1)), int(mt.group(2))))
                ok = ext[0] <= lim[0] and ext[1] <= lim[1]
        elif _ABOVE.match(text):
            ok = all(c[2] >= 0 for c in rec.cells)
        else:
            out.append(PlannerResult(key, text, "unevaluated"))
            continue
        out.append(PlannerResult(key, text, "pass" if ok else "fail"))
    return out
