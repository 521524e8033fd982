"""The design/verify loop: decompose, generate, assemble, build, verify, reflect.

Every artifact of a run lands under ``<out>/<task>/seed<seed>/`` with relative
paths and no timestamps, so replaying the same transcripts reproduces the
directory byte for byte.
"""
from __future__ import annotations

import json
import shutil
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import errors
from .build import compile_build, execute_build, export_coords
from .dsl import CheckProgram, ModelProgram, parse_model, print_model
from .gateway import (DEFAULT_K, DEFAULT_RESAMPLE_ROUNDS, DEFAULT_TEMPERATURE, AttemptCounter, Backend,
                      StageRequest, call, sample_candidates)
from .kernel import SolidModel, assemble, planner_checks, preview_program
from .materials import DEFAULT_TABLE, MaterialTable
from .render import render, write_image
from .tasks import TaskFixture, generate_terrain
from .verify import ReflectionPacket, make_packet, verify
from .world import DEFAULT_KINEMATICS, Kinematics, WorldSnapshot, save_snapshot

GUIDE_DECOMPOSE = (
    "Split the requested building into subcomponents. Each subcomponent is one panel "
    "with its features. Reply with a ```components block, one short description per line.")

GUIDE_DSL = """\
Modeling language, one statement per line:
  panel NAME X Y T anno="appearance, block" [vanno=planner|env:"requirement"]
  sub_rect PANEL.FEAT pos=(px,py) shape=(w,h) [vanno=...]
  fill_rect PANEL.FEAT as HOLE anno="..." [vanno=...]
  grow_rect PANEL.FEAT pos=(px,py) shape=(w,h) thickness=N on BASE anno="..." [vanno=...]
  place PANEL at (x,y,z) facing north|south|east|west|up|down
Positions are offsets from the panel centre and may be half-integers. grow_rect
starts on top of its base. Reply with a ```dsl block holding panels only."""

GUIDE_ASSEMBLE = (
    "Position every subcomponent with place statements so the parts form the building. "
    "The model origin sits on the ground at the build site. Reply with a ```dsl block of place lines.")

GUIDE_SELECT = (
    "The images show candidate programs, one per image, in order. Reply with a ```index block "
    "naming the best candidate, or none if no candidate fits the request.")

GUIDE_CHECKS = (
    "Turn the env-type requirements into a check program. Kinds: reachable(from,to), "
    "standable(at), height_at_least(at,min_z), material_at(at,material). Locations are "
    '{"anchor": name}, {"feature": "panel.feature", "point": p} or {"abs": [x,y,z]}. '
    "Reply with a ```checks block.")

GUIDE_REFLECT = (
    "The building was constructed and its checks were run. Read the failures and the renders "
    "and reply with a ```suggestion block describing what to change next round.")


@dataclass
class AgentConfig:
    k: int = DEFAULT_K
    resample_rounds: int = DEFAULT_RESAMPLE_ROUNDS
    max_iterations: int = 3
    temperature: float = DEFAULT_TEMPERATURE
    model_scale: int = 8
    world_scale: int = 4
    kin: Kinematics = DEFAULT_KINEMATICS
    table: MaterialTable = field(default_factory=lambda: DEFAULT_TABLE)


@dataclass
class AgentState:
    suggestions: list[str] = field(default_factory=list)
    counter: AttemptCounter = field(default_factory=AttemptCounter)
    iteration: int = 0


@dataclass
class IterationOutcome:
    program: ModelProgram
    model: SolidModel
    checks: CheckProgram
    packet: ReflectionPacket
    world: WorldSnapshot


@contextmanager
def _stage(name: str):
    try:
        yield
    except errors.StageError:
        raise
    except errors.LubanError as exc:
        raise errors.StageError(name, exc) from exc


def _dump(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _suggestion_text(state: AgentState) -> str:
    if not state.suggestions:
        return ""
    return "Suggestions from earlier rounds:\n" + "\n".join(f"- {s}" for s in state.suggestions)


class _Run:
    def __init__(self, fixture: TaskFixture, root: Path, backend: Backend, state: AgentState, cfg: AgentConfig):
        self.fx, self.root, self.backend, self.state, self.cfg = fixture, root, backend, state, cfg

    def rel(self, p: Path) -> str:
        return p.relative_to(self.root).as_posix()

    def render_to(self, scene, path: Path, scale: int) -> str:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_image(render(scene, self.cfg.table, scale=scale), path)
        return self.rel(path)

    def choose(self, stage: str, texts: tuple[str, ...], validate: Callable[[str], object],
               to_model: Callable[[object], SolidModel], folder: Path, what: str):
        """Sample, render and select among candidates, resampling on a none selection."""
        cfg, counter = self.cfg, self.state.counter
        log = []
        chosen = None
        for rnd in range(cfg.resample_rounds + 1):
            req = StageRequest(stage, texts, k=cfg.k, temperature=cfg.temperature, image_root=str(self.root))
            sr = sample_candidates(req, self.backend, counter, validate)
            images = []
            entry = {"round": rnd, "candidates": [], "rejected": [
                {"slot": r.slot + 1, "attempt": r.attempt, "code": r.code, "message": r.message}
                for r in sr.rejected]}
            for n, cand in enumerate(sr.candidates, start=1):
                src = folder / f"r{rnd}_c{n}.dsl"
                src.parent.mkdir(parents=True, exist_ok=True)
                src.write_text(cand.source, encoding="utf-8")
                img = self.render_to(to_model(cand.value), folder / f"r{rnd}_c{n}.ppm", cfg.model_scale)
                images.append(img)
                entry["candidates"].append({"slot": cand.slot + 1, "attempt": cand.attempt,
                                            "program": self.rel(src), "render": img})
            log.append(entry)
            if len(sr.candidates) == 1:
                entry["selection"] = 1
                chosen = sr.candidates[0]
                break
            sel = StageRequest("select", (GUIDE_SELECT, self.fx.instruction, what), tuple(images),
                               k=len(images), temperature=cfg.temperature,
                               attempt=counter.next("select"), image_root=str(self.root))
            idx = call(sel, self.backend).payload
            entry["selection"] = idx
            if idx is not None:
                if idx > len(sr.candidates):
                    raise errors.ExtractionFailed(f"selected candidate {idx} of {len(sr.candidates)}")
                chosen = sr.candidates[idx - 1]
                break
            if rnd == cfg.resample_rounds:
                entry["fallback"] = 1
                chosen = sr.candidates[0]
        _dump(folder / "candidates.json", {"rounds": log})
        return chosen.value

    def iteration(self, n: int, world: WorldSnapshot, instruction_images: tuple[str, ...]) -> IterationOutcome:
        fx, cfg, st = self.fx, self.cfg, self.state
        it = self.root / f"iter{n}"
        it.mkdir(parents=True, exist_ok=True)
        hint = _suggestion_text(st)

        with _stage("decompose"):
            req = StageRequest("decompose", (GUIDE_DECOMPOSE, fx.instruction, hint), instruction_images,
                               temperature=cfg.temperature, attempt=st.counter.next("decompose"),
                               image_root=str(self.root))
            components = call(req, self.backend).payload
            _dump(it / "components.json", components)

        def validate_sub(src: str) -> ModelProgram:
            p = parse_model(src)
            if not p.panels or p.placements:
                raise errors.DslSyntaxError("a subcomponent program declares panels and no place lines")
            assemble(preview_program(p), cfg.table)
            return p

        parts = []
        with _stage("generate"):
            for i, desc in enumerate(components, start=1):
                texts = (GUIDE_DSL, fx.instruction, hint, f"Subcomponent {i}: {desc}")
                parts.append(self.choose("generate", texts, validate_sub,
                                         lambda p: assemble(preview_program(p), cfg.table),
                                         it / f"sub{i}", desc))
        sub_src = "".join(print_model(p) for p in parts)
        (it / "subcomponents.dsl").write_text(sub_src, encoding="utf-8")

        def validate_asm(src: str) -> tuple[ModelProgram, SolidModel]:
            prog = parse_model(sub_src + src)
            if not prog.placements:
                raise errors.DslSyntaxError("assembly places no panels")
            return prog, assemble(prog, cfg.table)

        with _stage("assemble"):
            prog, model = self.choose("assemble", (GUIDE_ASSEMBLE, fx.instruction, hint, sub_src),
                                      validate_asm, lambda v: v[1], it / "assemble", "assembled building")
        (it / "program.dsl").write_text(print_model(prog), encoding="utf-8")
        model_img = self.render_to(model, it / "model.ppm", cfg.model_scale)

        planner = planner_checks(prog, model)
        _dump(it / "planner.json", [{"feature": p.feature, "annotation": p.annotation, "status": p.status}
                                    for p in planner])

        with _stage("build"):
            placed = export_coords(model, world.anchors["build_origin"], world)
            script = compile_build(placed, cfg.table)
            built, statuses = execute_build(world, script, cfg.kin, cfg.table)
        (it / "build.actions").write_text(script.dumps(), encoding="utf-8")
        save_snapshot(built, it / "world.json")
        world_img = self.render_to(built, it / "world.ppm", cfg.world_scale)

        with _stage("compile_checks"):
            vannos = [f"{k}: {r.vanno.vtype}: {r.vanno.anno}" for k, r in sorted(placed.features.items())
                      if r.vanno is not None and r.vanno.vtype == "env"]
            anchors = [f"{k} {list(v)}" for k, v in sorted(world.anchors.items())]
            texts = (GUIDE_CHECKS, fx.instruction, "Requirements:\n" + "\n".join(vannos),
                     "Terrain anchors:\n" + "\n".join(anchors),
                     "Features:\n" + "\n".join(sorted(placed.features)))
            req = StageRequest("compile_checks", texts, temperature=cfg.temperature,
                               attempt=st.counter.next("compile_checks"), image_root=str(self.root))
            checks = call(req, self.backend).payload
        (it / "checks.json").write_text(checks.dumps(), encoding="utf-8")

        result = verify(checks, built, placed.features, cfg.kin, cfg.table)
        (it / "verification.json").write_text(result.dumps(), encoding="utf-8")
        packet = make_packet(fx.instruction, result, statuses, [model_img, world_img], self.root, n, planner)

        if not packet.complete:
            with _stage("reflect"):
                req = StageRequest("reflect", (GUIDE_REFLECT, fx.instruction, packet.dumps()),
                                   tuple(packet.renders), temperature=cfg.temperature,
                                   attempt=st.counter.next("reflect"), image_root=str(self.root))
                packet.suggestions = call(req, self.backend).payload
                st.suggestions.append(packet.suggestions)
        (it / "packet.json").write_text(packet.dumps(), encoding="utf-8")
        st.iteration = n
        return IterationOutcome(prog, model, checks, packet, built)


def run_iteration(fixture: TaskFixture, state: AgentState, backend: Backend, root: Path | str,
                  world: WorldSnapshot | None = None, cfg: AgentConfig | None = None,
                  instruction_images: tuple[str, ...] = ()):
    """One pass of the loop; returns (model, checks, packet)."""
    cfg = cfg or AgentConfig()
    world = world if world is not None else generate_terrain(fixture)
    out = _Run(fixture, Path(root), backend, state, cfg).iteration(state.iteration + 1, world, instruction_images)
    return out.model, out.checks, out.packet


@dataclass
class RunSummary:
    task: str
    seed: int
    iterations: int
    final_pass_rate: float
    complete: bool
    history: list[float]
    root: Path

    def to_json(self) -> dict:
        return {"task": self.task, "seed": self.seed, "iterations": self.iterations,
                "final_pass_rate": self.final_pass_rate, "complete": self.complete,
                "pass_rate_history": self.history}


def run_task(fixture: TaskFixture, backend: Backend, out: Path | str, seed: int = 0,
             cfg: AgentConfig | None = None) -> RunSummary:
    """Run up to ``max_iterations`` rounds, stopping once every check passes."""
    cfg = cfg or AgentConfig()
    if cfg.max_iterations < 1:
        raise errors.BudgetExceeded(f"max_iterations must be >= 1, got {cfg.max_iterations}")
    root = Path(out) / fixture.task_id / f"seed{seed}"
    if root.exists():
        shutil.rmtree(root)
    root.mkdir(parents=True)
    world = generate_terrain(fixture)
    save_snapshot(world, root / "terrain.json")
    images = []
    for src in fixture.image_paths():
        dst = root / "instruction" / src.name
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(src, dst)
        images.append(dst.relative_to(root).as_posix())

    state = AgentState()
    run = _Run(fixture, root, backend, state, cfg)
    history = []
    for n in range(1, cfg.max_iterations + 1):
        outcome = run.iteration(n, world, tuple(images))
        history.append(outcome.packet.result.pass_rate)
        if outcome.packet.complete:
            break
    summary = RunSummary(fixture.task_id, seed, len(history), history[-1], history[-1] == 1.0, history, root)
    _dump(root / "summary.json", summary.to_json())
    return summary
