"""Front ends: the CAD modeling DSL, check-program JSON and action-script JSON.

The modeling DSL is a straight-line language of five statements::

    panel wall 5 4 1 anno="stone wall" vanno=env:"player can walk through the door"
    sub_rect wall.door pos=(0,-1) shape=(1,2)
    fill_rect wall.glass as door anno="window, glass"
    grow_rect wall.cap pos=(0,0) shape=(5,1) thickness=1 on wall anno="stone"
    place wall at (0.5,0,2) facing south

Tokens are whitespace separated, ``#`` starts a line comment, numbers are
integers or halves (``1.5``), strings use JSON escapes.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from . import errors
from .materials import AIR, DEFAULT_TABLE

ORIENTATIONS = ("north", "south", "east", "west", "up", "down")
VTYPES = ("planner", "env")
CHECK_KINDS = ("reachable", "standable", "height_at_least", "material_at")
FEATURE_POINTS = (
    "top_center", "base_center",
    "adjacent_north", "adjacent_south", "adjacent_east", "adjacent_west",
)
ACTION_OPS = ("move", "place_block", "dig_block")

Coord = tuple[int, int, int]


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class VerificationAnnotation:
    vtype: str
    anno: str


@dataclass
class FeatureOp:
    kind: str  # sub_rect | fill_rect | grow_rect
    name: str
    pos: tuple[Fraction, Fraction] | None = None
    shape: tuple[int, int] | None = None
    thickness: int | None = None
    base: str | None = None
    hole: str | None = None
    anno: str = ""
    vanno: VerificationAnnotation | None = None
    line: int | None = field(default=None, compare=False, repr=False)


@dataclass
class PanelDef:
    name: str
    x_dim: int
    y_dim: int
    thickness: int
    anno: str
    vanno: VerificationAnnotation | None = None
    ops: list[FeatureOp] = field(default_factory=list)
    line: int | None = field(default=None, compare=False, repr=False)

    def feature(self, name: str) -> FeatureOp | None:
        for op in self.ops:
            if op.name == name:
                return op
        return None


@dataclass
class Placement:
    panel: str
    pos: tuple[Fraction, Fraction, Fraction]
    orientation: str
    line: int | None = field(default=None, compare=False, repr=False)


@dataclass
class ModelProgram:
    panels: list[PanelDef] = field(default_factory=list)
    placements: list[Placement] = field(default_factory=list)

    def panel(self, name: str) -> PanelDef | None:
        for p in self.panels:
            if p.name == name:
                return p
        return None


# --------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<key>[A-Za-z_][A-Za-z0-9_]*=)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),.:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise errors.DslSyntaxError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, i - line_start + 1))
        i = m.end()
    return tokens


def _parse_num(tok: Token) -> Fraction:
    whole, _, frac = tok.text.partition(".")
    if frac and frac != "5":
        raise errors.DslSyntaxError(f"only integer or .5 numbers allowed, got {tok.text}", tok.line, tok.col)
    value = Fraction(int(whole))
    if frac:
        half = Fraction(1, 2)
        value = value - half if whole.startswith("-") else value + half
    return value


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.eof_line = text.count("\n") + 1

    def peek(self) -> Token | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self, what: str) -> Token:
        tok = self.peek()
        if tok is None:
            raise errors.DslSyntaxError(f"unexpected end of input, expected {what}", self.eof_line, 1)
        self.i += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        what = repr(text) if text else kind
        tok = self.next(what)
        if tok.kind != kind or (text is not None and tok.text != text):
            raise errors.DslSyntaxError(f"expected {what}, got {tok.text!r}", tok.line, tok.col)
        return tok

    def ident(self) -> Token:
        return self.expect("ident")

    def int_(self) -> tuple[int, Token]:
        tok = self.expect("number")
        value = _parse_num(tok)
        if value.denominator != 1:
            raise errors.DslSyntaxError(f"expected an integer, got {tok.text}", tok.line, tok.col)
        return int(value), tok

    def num(self) -> Fraction:
        return _parse_num(self.expect("number"))

    def string(self) -> str:
        tok = self.expect("string")
        try:
            return json.loads(tok.text)
        except json.JSONDecodeError as exc:
            raise errors.DslSyntaxError(f"bad string literal: {exc.msg}", tok.line, tok.col) from None

    def vec(self, n: int) -> tuple[Fraction, ...]:
        self.expect("punct", "(")
        out = [self.num()]
        for _ in range(n - 1):
            self.expect("punct", ",")
            out.append(self.num())
        self.expect("punct", ")")
        return tuple(out)

    def ivec2(self) -> tuple[tuple[int, int], Token]:
        start = self.expect("punct", "(")
        a, _ = self.int_()
        self.expect("punct", ",")
        b, _ = self.int_()
        self.expect("punct", ")")
        return (a, b), start

    def key(self, name: str) -> Token:
        return self.expect("key", name + "=")

    def at_key(self, name: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "key" and tok.text == name + "="

    def qualified(self) -> tuple[Token, Token]:
        panel = self.ident()
        self.expect("punct", ".")
        return panel, self.ident()

    def vattr(self) -> VerificationAnnotation | None:
        if not self.at_key("vanno"):
            return None
        self.key("vanno")
        vt = self.ident()
        if vt.text not in VTYPES:
            raise errors.BadVerificationType(
                f"verification type must be 'planner' or 'env', got {vt.text!r}", vt.line, vt.col)
        self.expect("punct", ":")
        return VerificationAnnotation(vt.text, self.string())

    def attrs(self) -> tuple[str, VerificationAnnotation | None]:
        tok = self.key("anno")
        anno = self.string()
        if not anno.strip():
            raise errors.EmptyAnnotation("appearance annotation must not be empty", tok.line, tok.col)
        return anno, self.vattr()


def _positive(value: int, tok: Token, what: str) -> None:
    if value < 1:
        raise errors.NonPositiveDimension(f"{what} must be >= 1, got {value}", tok.line, tok.col)


def parse_model(text: str) -> ModelProgram:
    """Parse and validate DSL source into a :class:`ModelProgram`."""
    ps = _Parser(text)
    prog = ModelProgram()
    panels: dict[str, PanelDef] = {}
    placed: set[str] = set()

    def lookup_panel(tok: Token) -> PanelDef:
        panel = panels.get(tok.text)
        if panel is None:
            raise errors.UnknownReference(f"panel {tok.text!r} is not declared", tok.line, tok.col)
        return panel

    def new_feature(panel: PanelDef, tok: Token) -> None:
        if tok.text == panel.name or panel.feature(tok.text) is not None:
            raise errors.DuplicateName(
                f"feature {tok.text!r} already defined in panel {panel.name!r}", tok.line, tok.col)

    while (head := ps.peek()) is not None:
        if head.kind != "ident":
            raise errors.DslSyntaxError(f"expected a statement, got {head.text!r}", head.line, head.col)
        ps.next("statement")
        kw = head.text
        if kw == "panel":
            name = ps.ident()
            if name.text in panels:
                raise errors.DuplicateName(f"panel {name.text!r} already defined", name.line, name.col)
            dims = []
            for what in ("x_dim", "y_dim", "thickness"):
                value, tok = ps.int_()
                _positive(value, tok, what)
                dims.append(value)
            anno, vanno = ps.attrs()
            panel = PanelDef(name.text, *dims, anno=anno, vanno=vanno, line=head.line)
            panels[name.text] = panel
            prog.panels.append(panel)
        elif kw in ("sub_rect", "grow_rect"):
            ptok, ftok = ps.qualified()
            panel = lookup_panel(ptok)
            new_feature(panel, ftok)
            ps.key("pos")
            pos = ps.vec(2)
            ps.key("shape")
            shape, stok = ps.ivec2()
            _positive(shape[0], stok, "shape x")
            _positive(shape[1], stok, "shape y")
            if kw == "sub_rect":
                op = FeatureOp("sub_rect", ftok.text, pos=pos, shape=shape, vanno=ps.vattr(), line=head.line)
            else:
                ps.key("thickness")
                thick, ttok = ps.int_()
                _positive(thick, ttok, "thickness")
                ps.expect("ident", "on")
                btok = ps.ident()
                if btok.text != panel.name and panel.feature(btok.text) is None:
                    raise errors.UnknownReference(
                        f"base {btok.text!r} not declared in panel {panel.name!r}", btok.line, btok.col)
                anno, vanno = ps.attrs()
                op = FeatureOp("grow_rect", ftok.text, pos=pos, shape=shape, thickness=thick,
                               base=btok.text, anno=anno, vanno=vanno, line=head.line)
            panel.ops.append(op)
        elif kw == "fill_rect":
            ptok, ftok = ps.qualified()
            panel = lookup_panel(ptok)
            new_feature(panel, ftok)
            ps.expect("ident", "as")
            htok = ps.ident()
            if panel.feature(htok.text) is None:
                raise errors.UnknownReference(
                    f"hole {htok.text!r} not declared in panel {panel.name!r}", htok.line, htok.col)
            anno, vanno = ps.attrs()
            panel.ops.append(FeatureOp("fill_rect", ftok.text, hole=htok.text, anno=anno,
                                       vanno=vanno, line=head.line))
        elif kw == "place":
            ptok = ps.ident()
            lookup_panel(ptok)
            if ptok.text in placed:
                raise errors.PanelPlacedTwice(f"panel {ptok.text!r} placed more than once", ptok.line, ptok.col)
            placed.add(ptok.text)
            ps.expect("ident", "at")
            pos = ps.vec(3)
            ps.expect("ident", "facing")
            otok = ps.ident()
            if otok.text not in ORIENTATIONS:
                raise errors.BadOrientation(
                    f"orientation must be one of {', '.join(ORIENTATIONS)}, got {otok.text!r}",
                    otok.line, otok.col)
            prog.placements.append(Placement(ptok.text, pos, otok.text, line=head.line))
        else:
            raise errors.DslSyntaxError(f"unknown statement {kw!r}", head.line, head.col)
    return prog


# --------------------------------------------------------------------------
# printer

def format_num(value: Fraction | int) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return repr(float(value))


def _fmt_str(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def _fmt_vanno(v: VerificationAnnotation | None) -> str:
    return f" vanno={v.vtype}:{_fmt_str(v.anno)}" if v is not None else ""


def _fmt_vec(values) -> str:
    return "(" + ",".join(format_num(v) for v in values) + ")"


def print_model(p: ModelProgram) -> str:
    """Canonical source text; ``parse_model(print_model(p)) == p``."""
    lines = []
    for panel in p.panels:
        lines.append(f"panel {panel.name} {panel.x_dim} {panel.y_dim} {panel.thickness} "
                     f"anno={_fmt_str(panel.anno)}{_fmt_vanno(panel.vanno)}")
        for op in panel.ops:
            q = f"{panel.name}.{op.name}"
            if op.kind == "sub_rect":
                lines.append(f"sub_rect {q} pos={_fmt_vec(op.pos)} shape={_fmt_vec(op.shape)}{_fmt_vanno(op.vanno)}")
            elif op.kind == "fill_rect":
                lines.append(f"fill_rect {q} as {op.hole} anno={_fmt_str(op.anno)}{_fmt_vanno(op.vanno)}")
            else:
                lines.append(f"grow_rect {q} pos={_fmt_vec(op.pos)} shape={_fmt_vec(op.shape)} "
                             f"thickness={op.thickness} on {op.base} anno={_fmt_str(op.anno)}{_fmt_vanno(op.vanno)}")
    for pl in p.placements:
        lines.append(f"place {pl.panel} at {_fmt_vec(pl.pos)} facing {pl.orientation}")
    return "".join(line + "\n" for line in lines)


# --------------------------------------------------------------------------
# check programs

@dataclass(frozen=True)
class LocSpec:
    """Exactly one of an absolute coordinate, a terrain anchor, or a feature point."""

    abs: Coord | None = None
    anchor: str | None = None
    feature: str | None = None
    point: str | None = None

    def key(self) -> str:
        if self.abs is not None:
            return "abs:" + ",".join(map(str, self.abs))
        if self.anchor is not None:
            return "anchor:" + self.anchor
        return f"{self.feature}:{self.point}"

    def to_json(self) -> dict:
        if self.abs is not None:
            return {"abs": list(self.abs)}
        if self.anchor is not None:
            return {"anchor": self.anchor}
        return {"feature": self.feature, "point": self.point}


@dataclass(frozen=True)
class Check:
    id: str
    kind: str
    at: LocSpec | None = None
    src: LocSpec | None = None
    dst: LocSpec | None = None
    min_z: int | None = None
    material: str | None = None

    def locs(self) -> dict[str, LocSpec]:
        if self.kind == "reachable":
            return {"from": self.src, "to": self.dst}
        return {"at": self.at}

    def to_json(self) -> dict:
        out: dict = {"id": self.id, "kind": self.kind}
        for name, loc in self.locs().items():
            out[name] = loc.to_json()
        if self.kind == "height_at_least":
            out["min_z"] = self.min_z
        if self.kind == "material_at":
            out["material"] = self.material
        return out


@dataclass
class CheckProgram:
    checks: list[Check] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"checks": [c.to_json() for c in self.checks]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


_CHECK_FIELDS = {
    "reachable": {"from", "to"},
    "standable": {"at"},
    "height_at_least": {"at", "min_z"},
    "material_at": {"at", "material"},
}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _coord(v, exc: type[errors.LubanError], where: str) -> Coord:
    if not (isinstance(v, list) and len(v) == 3 and all(_is_int(c) for c in v)):
        raise exc(f"{where}: expected an integer triple, got {v!r}")
    return tuple(v)


def parse_locspec(obj, where: str = "locspec") -> LocSpec:
    if not isinstance(obj, dict):
        raise errors.MalformedLocSpec(f"{where}: expected an object, got {obj!r}")
    tags = [k for k in ("abs", "anchor", "feature") if k in obj]
    if len(tags) != 1:
        raise errors.MalformedLocSpec(f"{where}: need exactly one of abs/anchor/feature, got {sorted(obj)}")
    tag = tags[0]
    allowed = {"feature", "point"} if tag == "feature" else {tag}
    extra = set(obj) - allowed
    if extra:
        raise errors.MalformedLocSpec(f"{where}: unexpected keys {sorted(extra)}")
    if tag == "abs":
        return LocSpec(abs=_coord(obj["abs"], errors.MalformedLocSpec, where))
    if tag == "anchor":
        if not isinstance(obj["anchor"], str) or not obj["anchor"]:
            raise errors.MalformedLocSpec(f"{where}: anchor must be a non-empty string")
        return LocSpec(anchor=obj["anchor"])
    feat, point = obj["feature"], obj.get("point")
    if not isinstance(feat, str) or not re.fullmatch(r"[A-Za-z_]\w*\.[A-Za-z_]\w*", feat):
        raise errors.MalformedLocSpec(f"{where}: feature must look like 'panel.feature', got {feat!r}")
    if point not in FEATURE_POINTS:
        raise errors.MalformedLocSpec(f"{where}: point must be one of {', '.join(FEATURE_POINTS)}, got {point!r}")
    return LocSpec(feature=feat, point=point)


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise errors.DslSyntaxError(exc.msg, exc.lineno, exc.colno) from None


def parse_checks(text: str) -> CheckProgram:
    """Parse check-program JSON: ``{"checks": [{"id", "kind", ...}, ...]}``."""
    doc = _load_json(text)
    if not isinstance(doc, dict) or not isinstance(doc.get("checks"), list) or set(doc) != {"checks"}:
        raise errors.MalformedCheck('top level must be {"checks": [...]}')
    if not doc["checks"]:
        raise errors.EmptyCheckProgram("check program contains no checks")
    seen: set[str] = set()
    out = []
    for i, c in enumerate(doc["checks"]):
        where = f"checks[{i}]"
        if not isinstance(c, dict):
            raise errors.MalformedCheck(f"{where}: expected an object")
        cid = c.get("id")
        if not isinstance(cid, str) or not re.fullmatch(r"[A-Za-z_][\w-]*", cid):
            raise errors.MalformedCheck(f"{where}: id must be an identifier, got {cid!r}")
        if cid in seen:
            raise errors.DuplicateCheckId(f"duplicate check id {cid!r}")
        seen.add(cid)
        kind = c.get("kind")
        if kind not in CHECK_KINDS:
            raise errors.UnknownCheckKind(f"{where}: unknown check kind {kind!r}")
        fields = _CHECK_FIELDS[kind]
        keys = set(c) - {"id", "kind", "note"}
        if keys != fields:
            raise errors.MalformedCheck(f"{where}: {kind} needs fields {sorted(fields)}, got {sorted(keys)}")
        if kind == "reachable":
            check = Check(cid, kind, src=parse_locspec(c["from"], where + ".from"),
                          dst=parse_locspec(c["to"], where + ".to"))
        else:
            at = parse_locspec(c["at"], where + ".at")
            if kind == "height_at_least":
                if not _is_int(c["min_z"]):
                    raise errors.MalformedCheck(f"{where}: min_z must be an integer")
                check = Check(cid, kind, at=at, min_z=c["min_z"])
            elif kind == "material_at":
                if not isinstance(c["material"], str) or not c["material"]:
                    raise errors.MalformedCheck(f"{where}: material must be a non-empty string")
                check = Check(cid, kind, at=at, material=c["material"])
            else:
                check = Check(cid, kind, at=at)
        out.append(check)
    return CheckProgram(out)


# --------------------------------------------------------------------------
# action scripts

@dataclass(frozen=True)
class Action:
    op: str
    pos: Coord | None = None
    material: str | None = None
    src: Coord | None = None
    dst: Coord | None = None

    def to_json(self) -> dict:
        if self.op == "place_block":
            return {"op": self.op, "pos": list(self.pos), "material": self.material}
        if self.op == "dig_block":
            return {"op": self.op, "pos": list(self.pos)}
        return {"op": self.op, "from": list(self.src), "to": list(self.dst)}


def place(pos: Coord, material: str) -> Action:
    return Action("place_block", pos=tuple(pos), material=material)


def dig(pos: Coord) -> Action:
    return Action("dig_block", pos=tuple(pos))


def move(src: Coord, dst: Coord) -> Action:
    return Action("move", src=tuple(src), dst=tuple(dst))


@dataclass
class ActionScript:
    actions: list[Action] = field(default_factory=list)

    def __iter__(self) -> Iterator[Action]:
        return iter(self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    def to_json(self) -> list:
        return [a.to_json() for a in self.actions]

    def dumps(self) -> str:
        if not self.actions:
            return "[]\n"
        return "[\n" + ",\n".join(json.dumps(a.to_json()) for a in self.actions) + "\n]\n"


_ACTION_FIELDS = {"place_block": {"pos", "material"}, "dig_block": {"pos"}, "move": {"from", "to"}}


def parse_actions(text: str, known_materials=None) -> ActionScript:
    """Parse action JSON: a list of ``{"op": ..., ...}`` objects."""
    materials = set(known_materials) if known_materials is not None else set(DEFAULT_TABLE.placeable())
    doc = _load_json(text)
    if not isinstance(doc, list):
        raise errors.MalformedAction("action script must be a JSON list")
    out = []
    for i, a in enumerate(doc):
        where = f"actions[{i}]"
        if not isinstance(a, dict):
            raise errors.MalformedAction(f"{where}: expected an object")
        op = a.get("op")
        if op not in ACTION_OPS:
            raise errors.MalformedAction(f"{where}: unknown op {op!r}")
        keys = set(a) - {"op"}
        if keys != _ACTION_FIELDS[op]:
            raise errors.MalformedAction(f"{where}: {op} needs fields {sorted(_ACTION_FIELDS[op])}, got {sorted(keys)}")
        if op == "move":
            out.append(move(_coord(a["from"], errors.MalformedAction, where + ".from"),
                            _coord(a["to"], errors.MalformedAction, where + ".to")))
            continue
        pos = _coord(a["pos"], errors.MalformedAction, where + ".pos")
        if op == "dig_block":
            out.append(dig(pos))
            continue
        mat = a["material"]
        if not isinstance(mat, str) or mat == AIR or mat not in materials:
            raise errors.UnknownMaterial(f"{where}: unknown material {mat!r}")
        out.append(place(pos, mat))
    return ActionScript(out)
