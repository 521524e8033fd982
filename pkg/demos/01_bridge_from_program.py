"""Walk a bridge from program text to a verified world.

Run with ``python3 demos/01_bridge_from_program.py``; images land in
``demos/out/``.
"""
# %%
from pathlib import Path

from luban.build import compile_build, execute_build, export_coords
from luban.dsl import parse_model
from luban.kernel import assemble
from luban.render import render, write_image
from luban.tasks import data_dir, generate_terrain, load_fixture
from luban.verify import verify

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# %% [markdown]
# A program is a list of panels, features grown on them, and placements.
# The bridge is a single 9x3 plank panel with a railing on each long side.

# %%
source = (data_dir() / "programs" / "bridge.dsl").read_text()
print(source)
model = assemble(parse_model(source))
print(len(model.cells), "cells;", sorted(model.features))
write_image(render(model, scale=8), OUT / "bridge_model.ppm")

# %% [markdown]
# The task fixture supplies terrain (a river across the middle of the map)
# and the checks a finished bridge has to pass.

# %%
fixture = load_fixture("bridge")
terrain = generate_terrain(fixture)
print("anchors:", terrain.anchors)
print("before building:", verify(fixture.checks, terrain).statuses)

# %%
placed = export_coords(model, terrain.anchors["build_origin"], terrain)
script = compile_build(placed)
world, statuses = execute_build(terrain, script)
print(f"{sum(statuses)}/{len(statuses)} blocks placed")
result = verify(fixture.checks, world, placed.features)
for c in result.checks:
    print(f"  {c.id:12s} {c.status} {c.reason or ''}")
write_image(render(world, scale=4), OUT / "bridge_world.ppm")

# %% [markdown]
# Knock two neighbouring planks out of the walkway above the water. The
# crossing check fails with ``no_path``, the deck centre is no longer
# standable, and the railings are untouched.

# %%
broken = world.copy()
mid = terrain.anchors["build_origin"]
for x in (mid[0], mid[0] + 1):
    del broken.blocks[(x, mid[1], mid[2])]
for c in verify(fixture.checks, broken, placed.features).checks:
    print(f"  {c.id:12s} {c.status} {c.reason or ''}")
