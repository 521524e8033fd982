"""Deterministic multi-view rendering of voxel scenes to PPM.

The grid is 2x2: front (viewer at -y), right (viewer at +x), back (viewer at
+y), and a 2:1 isometric view from the south-west. All arithmetic is integer,
so the bytes are identical across runs and platforms.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import errors
from .dsl import Coord
from .kernel import SolidModel
from .materials import CLIMBABLE, DEFAULT_TABLE, LIQUID, OPAQUE, TRANSPARENT, MaterialTable
from .world import WorldSnapshot

BACKGROUND = (30, 32, 40)
MAX_EXTENT = 128
TILE_ORDER = ("front", "right", "back", "iso")

# depth shading: multiply by (256 - FALLOFF * depth) / 256, floored at MIN_SHADE
FALLOFF = 12
MIN_SHADE = 96
SIDE_SHADE = {"top": 256, "south": 205, "west": 154}


@dataclass
class ViewGrid:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8
    tile_size: tuple[int, int]

    def tile(self, name: str) -> np.ndarray:
        i = TILE_ORDER.index(name)
        tw, th = self.tile_size
        r, c = divmod(i, 2)
        return self.pixels[r * th:(r + 1) * th, c * tw:(c + 1) * tw]


def _scene(scene) -> tuple[dict[Coord, str], Coord, Coord]:
    if isinstance(scene, WorldSnapshot):
        return scene.blocks, (0, 0, 0), tuple(scene.size)
    if isinstance(scene, SolidModel):
        b = scene.bounds
        if b is None:
            return {}, (0, 0, 0), (1, 1, 1)
        return scene.cells, b[0], b[1]
    raise TypeError(f"cannot render {type(scene).__name__}")


def _palette(table: MaterialTable) -> tuple[list[str], np.ndarray, np.ndarray]:
    labels = sorted(table.entries)
    rgb = np.zeros((len(labels) + 1, 3), dtype=np.int64)
    cls = np.zeros(len(labels) + 1, dtype=np.int64)  # 0 air, 1 opaque, 2 translucent
    for i, lab in enumerate(labels, start=1):
        m = table[lab]
        rgb[i] = m.rgb
        cls[i] = 1 if m.render_class in (OPAQUE, CLIMBABLE) else 2
        assert m.render_class in (OPAQUE, CLIMBABLE, TRANSPARENT, LIQUID)
    return labels, rgb, cls


def _dense(cells: dict[Coord, str], lo: Coord, hi: Coord, labels: list[str]) -> np.ndarray:
    index = {lab: i for i, lab in enumerate(labels, start=1)}
    grid = np.zeros(tuple(h - l for l, h in zip(lo, hi)), dtype=np.int64)
    for (x, y, z), lab in cells.items():
        if lab == "air":
            continue
        grid[x - lo[0], y - lo[1], z - lo[2]] = index[lab]
    return grid


def _march(vol: np.ndarray, rgb: np.ndarray, cls: np.ndarray, bg) -> np.ndarray:
    """Ray-march ``vol`` (rows, cols, depth) front to back; returns (rows, cols, 3)."""
    rows, cols, depth = vol.shape
    acc = np.zeros((rows, cols, 3), dtype=np.int64)
    weight = np.full((rows, cols), 256, dtype=np.int64)
    live = np.ones((rows, cols), dtype=bool)
    for d in range(depth):
        ids = vol[:, :, d]
        shade = max(256 - FALLOFF * d, MIN_SHADE)
        c = cls[ids]
        col = rgb[ids] * shade  # scaled by 256
        solid = live & (c == 1)
        acc[solid] += col[solid] * weight[solid, None]
        live &= ~solid
        glass = live & (c == 2)
        acc[glass] += col[glass] * (weight[glass, None] // 2)
        weight[glass] -= weight[glass] // 2
    bgv = np.array(bg, dtype=np.int64) * 256
    acc[live] += bgv[None, :] * weight[live, None]
    return (acc // 65536).astype(np.uint8)


def _ortho(grid: np.ndarray, view: str, rgb, cls, bg, scale: int) -> np.ndarray:
    # grid is indexed [x, y, z]; build (rows=z top-down, cols, depth)
    if view == "front":
        vol = grid.transpose(2, 0, 1)  # z, x, y(ascending depth)
    elif view == "back":
        vol = grid[::-1, ::-1, :].transpose(2, 0, 1)  # z, x mirrored, y descending
    elif view == "right":
        vol = grid[::-1, :, :].transpose(2, 1, 0)  # z, y, x descending
    else:
        raise ValueError(view)
    img = _march(vol[::-1], rgb, cls, bg)
    return np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)


def _iso_masks(h: int, q: int) -> dict[str, np.ndarray]:
    H, W = 2 * q + h, 2 * h
    i, j = np.mgrid[0:H, 0:W]
    U = 2 * (j - h) + 1
    V = 2 * (i - H) + 1
    south = (U >= 0) & (U < 2 * h) & (-V * h - U * q >= 0) & (-V * h - U * q < 2 * h * h)
    west = (U < 0) & (U > -2 * h) & (-V * h + U * q >= 0) & (-V * h + U * q < 2 * h * h)
    A = U * q + (-V - 2 * h) * h
    B = (-V - 2 * h) * h - U * q
    top = (A >= 0) & (A < 4 * h * q) & (B >= 0) & (B < 4 * h * q)
    return {"south": south & ~top, "west": west & ~top & ~south, "top": top}


def _iso(grid: np.ndarray, rgb, cls, bg, h: int, q: int) -> np.ndarray:
    bx, by, bz = grid.shape
    W = (bx + by) * h
    H = (bx + by) * q + bz * h
    img = np.empty((H, W, 3), dtype=np.int64)
    img[:] = bg
    masks = _iso_masks(h, q)
    sh, sw = 2 * q + h, 2 * h
    xs, ys, zs = np.nonzero(grid)
    order = sorted(zip(xs.tolist(), ys.tolist(), zs.tolist()), key=lambda c: (-(c[0] + c[1]), c[2], -c[0]))

    def opaque_at(x, y, z):
        return 0 <= x < bx and 0 <= y < by and 0 <= z < bz and cls[grid[x, y, z]] == 1

    for x, y, z in order:
        if opaque_at(x - 1, y, z) and opaque_at(x, y - 1, z) and opaque_at(x, y, z + 1):
            continue
        mid = grid[x, y, z]
        u0 = (x - y) * h + by * h - h
        v0 = -(x + y) * q - z * h + (bx + by) * q + bz * h - sh
        patch = img[v0:v0 + sh, u0:u0 + sw]
        for face in ("west", "south", "top"):
            m = masks[face]
            col = rgb[mid] * SIDE_SHADE[face] // 256
            if cls[mid] == 1:
                patch[m] = col
            else:
                patch[m] = (patch[m] + col) // 2
    return img.astype(np.uint8)


def render(scene, mats: MaterialTable = DEFAULT_TABLE, scale: int = 8, max_extent: int = MAX_EXTENT,
           background: tuple[int, int, int] = BACKGROUND) -> ViewGrid:
    """Render a SolidModel or WorldSnapshot to a 2x2 multi-view grid."""
    if scale < 1:
        raise ValueError("scale must be >= 1")
    cells, lo, hi = _scene(scene)
    bx, by, bz = (b - a for a, b in zip(lo, hi))
    if max(bx, by, bz) > max_extent:
        raise errors.SceneTooLarge(f"scene extent {bx}x{by}x{bz} exceeds {max_extent}")
    labels, rgb, cls = _palette(mats)
    grid = _dense(cells, lo, hi, labels)
    h = max(1, scale // 2)
    q = max(1, h // 2)
    views = {
        "front": _ortho(grid, "front", rgb, cls, background, scale),
        "right": _ortho(grid, "right", rgb, cls, background, scale),
        "back": _ortho(grid, "back", rgb, cls, background, scale),
        "iso": _iso(grid, rgb, cls, background, h, q),
    }
    pad = scale
    tw = max(v.shape[1] for v in views.values()) + 2 * pad
    th = max(v.shape[0] for v in views.values()) + 2 * pad
    out = np.empty((2 * th, 2 * tw, 3), dtype=np.uint8)
    out[:] = background
    for i, name in enumerate(TILE_ORDER):
        v = views[name]
        r, c = divmod(i, 2)
        top = r * th + (th - v.shape[0]) // 2
        left = c * tw + (tw - v.shape[1]) // 2
        out[top:top + v.shape[0], left:left + v.shape[1]] = v
    return ViewGrid(2 * tw, 2 * th, out, (tw, th))


def ppm_bytes(g: ViewGrid) -> bytes:
    return b"P6\n%d %d\n255\n" % (g.width, g.height) + np.ascontiguousarray(g.pixels, dtype=np.uint8).tobytes()


def write_image(g: ViewGrid, path) -> Path:
    """Write a binary PPM (P6). Raises OSError when the path is not writable."""
    path = Path(path)
    path.write_bytes(ppm_bytes(g))
    return path


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or parts[2] != b"255":
        raise ValueError("not a P6 image with maxval 255")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3).copy()
