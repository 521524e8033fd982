"""Block materials: colours, render classes, and annotation keyword lookup."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

OPAQUE = "opaque"
TRANSPARENT = "transparent"
CLIMBABLE = "climbable"
LIQUID = "liquid"
RENDER_CLASSES = (OPAQUE, TRANSPARENT, CLIMBABLE, LIQUID)

AIR = "air"
DEFAULT_MATERIAL = "plank"


@dataclass(frozen=True)
class Material:
    rgb: tuple[int, int, int]
    render_class: str


_DEFAULTS: dict[str, Material] = {
    "plank": Material((162, 130, 78), OPAQUE),
    "stone": Material((125, 125, 125), OPAQUE),
    "glass": Material((200, 228, 250), TRANSPARENT),
    "ladder": Material((120, 86, 40), CLIMBABLE),
    "water": Material((48, 88, 216), LIQUID),
    "dirt": Material((134, 96, 67), OPAQUE),
    # air is never stored in a scene; its class only matters for lookups
    "air": Material((0, 0, 0), TRANSPARENT),
    "brick": Material((150, 74, 60), OPAQUE),
    "log": Material((102, 80, 48), OPAQUE),
    "wool": Material((232, 232, 232), OPAQUE),
    "bedrock": Material((60, 60, 60), OPAQUE),
}

# keyword -> label; matched as whole words in appearance annotations
_KEYWORDS: dict[str, str] = {
    "plank": "plank", "planks": "plank", "oak_planks": "plank", "wood": "plank",
    "wooden": "plank", "oak": "plank", "timber": "plank",
    "stone": "stone", "cobblestone": "stone", "cobble": "stone", "stone_bricks": "stone",
    "glass": "glass", "glass_pane": "glass",
    "ladder": "ladder", "ladders": "ladder",
    "water": "water",
    "dirt": "dirt",
    "brick": "brick", "bricks": "brick",
    "log": "log", "logs": "log",
    "wool": "wool",
}

_WORD = re.compile(r"[a-z_]+")


@dataclass
class MaterialTable:
    """Map from material label to colour and render class."""

    entries: dict[str, Material] = field(default_factory=lambda: dict(_DEFAULTS))

    def __contains__(self, label: str) -> bool:
        return label in self.entries

    def __getitem__(self, label: str) -> Material:
        return self.entries[label]

    def rgb(self, label: str) -> tuple[int, int, int]:
        return self.entries[label].rgb

    def render_class(self, label: str) -> str:
        return self.entries[label].render_class

    def is_solid(self, label: str | None) -> bool:
        if label is None or label == AIR:
            return False
        return self.entries[label].render_class in (OPAQUE, TRANSPARENT)

    def is_climbable(self, label: str | None) -> bool:
        return label is not None and self.entries[label].render_class == CLIMBABLE

    def is_liquid(self, label: str | None) -> bool:
        return label is not None and self.entries[label].render_class == LIQUID

    def placeable(self) -> list[str]:
        return sorted(k for k in self.entries if k != AIR)


DEFAULT_TABLE = MaterialTable()


def material_from_annotation(text: str, table: MaterialTable = DEFAULT_TABLE) -> str:
    """Pick a block label from a free-text appearance annotation.

    The last recognised keyword wins, since annotations conventionally end with
    the recommended block. Falls back to ``plank``.
    """
    found = DEFAULT_MATERIAL
    for word in _WORD.findall(text.lower()):
        label = _KEYWORDS.get(word)
        if label is None and word in table and word != AIR:
            label = word
        if label is not None and label in table:
            found = label
    return found
