"""Independent reference implementations used to check the library.

Each oracle takes a different route from the code under test: the kernel
oracle pulls every world cell back through an inverse rigid map and replays
the feature ops per cell; the reachability oracle is a plain breadth-first
search over dense numpy occupancy grids; the Spearman oracle enumerates all
pairings in floating point.
"""
from __future__ import annotations

import itertools
import random
from collections import deque
from fractions import Fraction

import numpy as np
from scipy import stats

from luban.dsl import ModelProgram, parse_model
from luban.materials import DEFAULT_TABLE, material_from_annotation

# the random programs annotate every op with exactly one block label; free
# text (the shipped programs) goes through the keyword lookup
LABELS = ("plank", "stone", "glass", "brick", "log", "wool", "ladder", "water", "dirt")


def code(anno: str) -> int:
    return LABELS.index(anno if anno in LABELS else material_from_annotation(anno)) + 1

# Columns are the world images of the local x, y and z axes. The panel normal
# (local z) points toward the named direction; for the four side facings the
# panel's width stays horizontal.
FRAMES = {
    "up": np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]]),
    "down": np.array([[1, 0, 0], [0, -1, 0], [0, 0, -1]]),
    "north": np.array([[1, 0, 0], [0, 0, 1], [0, -1, 0]]),
    "south": np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]]),
    "east": np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]]),
    "west": np.array([[0, 0, -1], [0, 1, 0], [1, 0, 0]]),
}


# --------------------------------------------------------------------------
# kernel

def _panel_lookup(pdef, L: np.ndarray):
    """Material code per local cell (0 for empty), replaying ops cell-wise."""
    X, Y, T = pdef.x_dim, pdef.y_dim, pdef.thickness
    i, j, k = L[:, 0], L[:, 1], L[:, 2]
    mat = np.zeros(len(L), dtype=np.int16)
    in_slab = (i >= 0) & (i < X) & (j >= 0) & (j < Y) & (k >= 0) & (k < T)
    mat[in_slab] = code(pdef.anno)
    top = {pdef.name: T}
    rect = {}

    def inside(pos, shape):
        cx = Fraction(X, 2) + Fraction(pos[0]) - Fraction(shape[0], 2)
        cy = Fraction(Y, 2) + Fraction(pos[1]) - Fraction(shape[1], 2)
        assert cx.denominator == 1 and cy.denominator == 1
        cx, cy = int(cx), int(cy)
        return (i >= cx) & (i < cx + shape[0]) & (j >= cy) & (j < cy + shape[1])

    for op in pdef.ops:
        if op.kind == "sub_rect":
            m = inside(op.pos, op.shape) & (k >= 0) & (k < T)
            mat[m] = 0
            rect[op.name] = (op.pos, op.shape)
            top[op.name] = T
        elif op.kind == "fill_rect":
            pos, shape = rect[op.hole]
            m = inside(pos, shape) & (k >= 0) & (k < T)
            mat[m] = code(op.anno)
            rect[op.name] = (pos, shape)
            top[op.name] = T
        else:
            z0 = top[op.base]
            m = inside(op.pos, op.shape) & (k >= z0) & (k < z0 + op.thickness)
            mat[m] = code(op.anno)
            rect[op.name] = (op.pos, op.shape)
            top[op.name] = z0 + op.thickness
    return mat


def kernel_oracle(p: ModelProgram, box: int = 16) -> dict:
    """World cell -> material for the assembled program, by inverse mapping."""
    r = np.arange(-box, box)
    W = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    result = np.zeros(len(W), dtype=np.int16)
    for pl in p.placements:
        pdef = p.panel(pl.panel)
        R = FRAMES[pl.orientation]
        half = np.array([Fraction(pdef.x_dim, 2), Fraction(pdef.y_dim, 2), Fraction(0)], dtype=object)
        t = np.array([Fraction(v) for v in pl.pos], dtype=object) - R.astype(object).dot(half)
        assert all(v.denominator == 1 for v in t)
        t = np.array([int(v) for v in t])
        # world centre w + 1/2 = R (c + 1/2) + t  =>  c = R^T (w - t) + (R^T 1/2 - 1/2)
        Rt = R.T
        shift2 = Rt.sum(axis=1) - 1  # doubled (R^T 1/2 - 1/2)
        assert np.all(shift2 % 2 == 0)
        L = (W - t) @ Rt.T + shift2 // 2
        mats = _panel_lookup(pdef, L)
        hit = mats > 0
        result[hit] = mats[hit]
    keep = result > 0
    return {tuple(int(v) for v in w): LABELS[m - 1] for w, m in zip(W[keep].tolist(), result[keep].tolist())}


def _fmt(v) -> str:
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else str(float(v))


def random_program(rng: random.Random, max_extent: int = 12, box: int = 16) -> tuple[str, dict]:
    """A random valid program whose oracle solid fits in ``max_extent`` per axis."""
    mats = list(LABELS[:6])
    while True:
        lines = []
        placements = []
        for pi in range(rng.randint(1, 3)):
            name = f"p{pi}"
            X, Y, T = rng.randint(1, 5), rng.randint(1, 5), rng.randint(1, 3)
            lines.append(f'panel {name} {X} {Y} {T} anno="{rng.choice(mats)}"')
            feats = [name]
            holes = []
            for fi in range(rng.randint(0, 4)):
                fname = f"f{fi}"
                kind = rng.choice(["sub", "grow", "grow", "fill"])
                if kind == "fill" and not holes:
                    kind = "grow"
                if kind == "sub":
                    w, h = rng.randint(1, X), rng.randint(1, Y)
                    cx, cy = rng.randint(0, X - w), rng.randint(0, Y - h)
                elif kind == "grow":
                    w, h = rng.randint(1, 4), rng.randint(1, 4)
                    cx, cy = rng.randint(-1, X), rng.randint(-1, Y)
                if kind in ("sub", "grow"):
                    px = Fraction(cx) + Fraction(w, 2) - Fraction(X, 2)
                    py = Fraction(cy) + Fraction(h, 2) - Fraction(Y, 2)
                if kind == "sub":
                    lines.append(f"sub_rect {name}.{fname} pos=({_fmt(px)},{_fmt(py)}) shape=({w},{h})")
                    holes.append(fname)
                elif kind == "grow":
                    base = rng.choice(feats)
                    g = rng.randint(1, 3)
                    lines.append(f"grow_rect {name}.{fname} pos=({_fmt(px)},{_fmt(py)}) shape=({w},{h}) "
                                 f'thickness={g} on {base} anno="{rng.choice(mats)}"')
                else:
                    hole = holes.pop(rng.randrange(len(holes)))
                    lines.append(f'fill_rect {name}.{fname} as {hole} anno="{rng.choice(mats)}"')
                feats.append(fname)
            if rng.random() < 0.9:
                o = rng.choice(list(FRAMES))
                t = np.array([rng.randint(-3, 3) for _ in range(3)])
                pos = FRAMES[o].astype(object).dot(
                    np.array([Fraction(X, 2), Fraction(Y, 2), Fraction(0)], dtype=object)) + t
                placements.append(f"place {name} at ({','.join(_fmt(v) for v in pos)}) facing {o}")
        rng.shuffle(placements)
        src = "\n".join(lines + placements) + "\n"
        cells = kernel_oracle(parse_model(src), box)
        if cells:
            arr = np.array(list(cells))
            ext = arr.max(axis=0) - arr.min(axis=0) + 1
            if ext.max() > max_extent:
                continue
            assert arr.min() > -box and arr.max() < box - 1
        return src, cells


# --------------------------------------------------------------------------
# reachability

def dense(w, table=DEFAULT_TABLE):
    X, Y, Z = w.size
    solid = np.zeros((X, Y, Z), bool)
    liquid = np.zeros((X, Y, Z), bool)
    climb = np.zeros((X, Y, Z), bool)
    for (x, y, z), m in w.blocks.items():
        rc = table.render_class(m)
        solid[x, y, z] = rc in ("opaque", "transparent")
        liquid[x, y, z] = rc == "liquid"
        climb[x, y, z] = rc == "climbable"
    return solid, liquid, climb


class Reach:
    """Breadth-first reachability over the player's movement rules."""

    def __init__(self, w, step_up: int = 1, max_fall: int = 3):
        self.solid, self.liquid, self.climb = dense(w)
        self.size = w.size
        self.step_up, self.max_fall = step_up, max_fall

    def inb(self, x, y, z):
        X, Y, Z = self.size
        return 0 <= x < X and 0 <= y < Y and 0 <= z < Z

    def free(self, x, y, z):
        return self.inb(x, y, z) and not self.solid[x, y, z] and not self.liquid[x, y, z]

    def stand(self, x, y, z):
        if not (self.free(x, y, z) and self.free(x, y, z + 1)):
            return False
        return bool(self.climb[x, y, z]) or (z > 0 and bool(self.solid[x, y, z - 1]))

    def moves(self, x, y, z):
        out = set()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nx, ny = x + dx, y + dy
            if self.stand(nx, ny, z):
                out.add((nx, ny, z))
            elif self.free(nx, ny, z) and self.free(nx, ny, z + 1):
                for d in range(1, self.max_fall + 1):
                    if not self.free(nx, ny, z - d):
                        break
                    if self.stand(nx, ny, z - d):
                        out.add((nx, ny, z - d))
                        break
            for k in range(1, self.step_up + 1):
                if not self.free(x, y, z + 1 + k):
                    break
                if self.stand(nx, ny, z + k):
                    out.add((nx, ny, z + k))
        for dz in (1, -1):
            if self.inb(x, y, z + dz) and (self.climb[x, y, z] or self.climb[x, y, z + dz]) \
                    and self.stand(x, y, z + dz):
                out.add((x, y, z + dz))
        return out

    def reachable(self, src) -> set:
        if not self.stand(*src):
            return set()
        seen = {tuple(src)}
        q = deque([tuple(src)])
        while q:
            c = q.popleft()
            for n in self.moves(*c):
                if n not in seen:
                    seen.add(n)
                    q.append(n)
        return seen

    def legal(self, path) -> bool:
        return bool(path) and self.stand(*path[0]) and all(b in self.moves(*a) for a, b in zip(path, path[1:]))


def random_world(rng: random.Random, max_side: int = 24):
    from luban.world import WorldSnapshot
    X, Y, Z = (rng.randint(4, max_side) for _ in range(3))
    w = WorldSnapshot((X, Y, Z))
    style = rng.random()
    for x in range(X):
        for y in range(Y):
            h = rng.randint(0, min(Z - 2, 3 if style < 0.5 else Z - 2))
            for z in range(h + 1):
                w.blocks[(x, y, z)] = "dirt"
            if rng.random() < 0.08:
                w.blocks[(x, y, 0)] = "water"
    for _ in range(rng.randint(0, X * Y)):
        c = (rng.randrange(X), rng.randrange(Y), rng.randrange(Z))
        w.blocks[c] = rng.choice(["stone", "glass", "ladder", "ladder", "water", "plank"])
    for _ in range(rng.randint(0, X * Y // 2)):
        w.blocks.pop((rng.randrange(X), rng.randrange(Y), rng.randrange(Z)), None)
    return w


# --------------------------------------------------------------------------
# statistics

def spearman_oracle(x, y) -> tuple[float, float]:
    """rho from float ranks, p as the share of all pairings with |rho| at least as large."""
    a = stats.rankdata(x)
    b = stats.rankdata(y)
    rho = float(np.corrcoef(a, b)[0, 1])
    perms = np.array(list(itertools.permutations(b)))
    ac = a - a.mean()
    pc = perms - perms.mean(axis=1, keepdims=True)
    rhos = (pc @ ac) / np.sqrt((pc * pc).sum(axis=1) * (ac @ ac))
    p = float(np.mean(np.abs(rhos) >= abs(rho) - 1e-12))
    return rho, p
