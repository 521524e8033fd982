from __future__ import annotations

from dataclasses import dataclass

import pytest

from luban.build import PlacedBuild, compile_build, execute_build, export_coords
from luban.dsl import parse_model
from luban.kernel import assemble
from luban.tasks import TaskFixture, data_dir, generate_terrain, load_fixture
from luban.world import WorldSnapshot


def reference_source(task: str) -> str:
    return (data_dir() / "programs" / f"{task}.dsl").read_text(encoding="utf-8")


@dataclass
class Built:
    fixture: TaskFixture
    terrain: WorldSnapshot
    world: WorldSnapshot
    placed: PlacedBuild
    statuses: list[int]


def build_task(task: str, source: str | None = None) -> Built:
    fx = load_fixture(task)
    terrain = generate_terrain(fx)
    m = assemble(parse_model(source if source is not None else reference_source(task)))
    placed = export_coords(m, terrain.anchors["build_origin"], terrain)
    world, statuses = execute_build(terrain, compile_build(placed))
    return Built(fx, terrain, world, placed, statuses)


# --------------------------------------------------------------------------
# acceptance reporting: one line per criterion at the end of the run

_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, True])
    entry[1] = entry[1] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")
