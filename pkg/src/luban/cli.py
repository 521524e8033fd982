"""Command-line entry point: ``luban <subcommand> ...``.

Exit status is 0 on success and 1 on any typed error; diagnostics go to
stderr and machine-readable results go to files under ``--out``.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import errors
from .agent import run_task
from .build import compile_build, execute_build, export_coords, model_snapshot
from .config import Config, load_config
from .dsl import parse_actions, parse_checks, parse_model
from .gateway import LiveBackend, RecordBackend, ReplayBackend
from .kernel import assemble
from .metrics import (aggregate_ratings, elo, fmt2, format_table, pass_rate_table, read_matches, read_pass_rates,
                      read_ratings, spearman, validate_protocol, winning_rates)
from .render import render, write_image
from .tasks import generate_terrain, load_fixture
from .verify import verify
from .world import load_snapshot, save_snapshot


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def cmd_model(args, cfg: Config) -> int:
    m = assemble(parse_model(_read(args.program)))
    out = _out_dir(args)
    stem = Path(args.program).stem
    save_snapshot(model_snapshot(m), out / f"{stem}.json")
    write_image(render(m, scale=args.scale), out / f"{stem}.ppm")
    print(f"{stem}: {len(m.cells)} cells, {len(m.features)} features, {len(m.overlaps)} overlaps")
    return 0


def cmd_render(args, cfg: Config) -> int:
    src = Path(args.scene)
    scene = assemble(parse_model(_read(src))) if src.suffix == ".dsl" else load_snapshot(src)
    out = Path(args.out)
    if out.suffix != ".ppm":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"{src.stem}.ppm"
    g = render(scene, scale=args.scale)
    write_image(g, out)
    print(f"wrote {out} ({g.width}x{g.height})")
    return 0


def cmd_terrain(args, cfg: Config) -> int:
    fx = load_fixture(args.task, cfg.overrides(args.task))
    out = _out_dir(args)
    save_snapshot(generate_terrain(fx), out / f"{args.task}.json")
    return 0


def cmd_simulate(args, cfg: Config) -> int:
    w = load_snapshot(args.world)
    script = parse_actions(_read(args.actions))
    final, statuses = execute_build(w, script, cfg.player)
    out = _out_dir(args)
    _write_json(out / "statuses.json", statuses)
    save_snapshot(final, out / "world.json")
    print(f"{sum(statuses)}/{len(statuses)} actions succeeded")
    return 0


def cmd_verify(args, cfg: Config) -> int:
    w = load_snapshot(args.world)
    checks = parse_checks(_read(args.checks))
    ledger = {}
    if args.program:
        m = assemble(parse_model(_read(args.program)))
        origin = w.anchors.get(args.origin)
        if origin is None:
            raise errors.UnknownReference(f"world has no anchor {args.origin!r}")
        ledger = export_coords(m, origin).features
    result = verify(checks, w, ledger, cfg.player)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(result.dumps(), encoding="utf-8")
    for c in result.checks:
        print(f"{c.id}: {c.status}" + (f" ({c.reason})" if c.reason else ""))
    print(f"pass_rate {result.pass_rate:.4f}")
    return 0


def cmd_build(args, cfg: Config) -> int:
    """Compile a program into a build script at a world anchor and run it."""
    w = load_snapshot(args.world)
    m = assemble(parse_model(_read(args.program)))
    origin = w.anchors.get(args.origin)
    if origin is None:
        raise errors.UnknownReference(f"world has no anchor {args.origin!r}")
    placed = export_coords(m, origin, w)
    script = compile_build(placed)
    final, statuses = execute_build(w, script, cfg.player)
    out = _out_dir(args)
    (out / "build.actions").write_text(script.dumps(), encoding="utf-8")
    save_snapshot(final, out / "world.json")
    _write_json(out / "statuses.json", statuses)
    print(f"{sum(statuses)}/{len(statuses)} blocks placed")
    return 0


def _backend(args, cfg: Config, task: str):
    g = cfg.gateway
    if g.backend == "replay":
        return ReplayBackend(g.transcript_root(), task, args.seed, strict=g.strict)
    live = LiveBackend(g.endpoint, g.model)
    if g.backend == "live":
        return live
    if g.backend == "record":
        return RecordBackend(live, g.transcript_root(), task, args.seed)
    raise errors.ConfigError(f"unknown backend {g.backend!r}")


def cmd_run_task(args, cfg: Config) -> int:
    fx = load_fixture(args.task, cfg.overrides(args.task))
    summary = run_task(fx, _backend(args, cfg, args.task), args.out, args.seed, cfg.agent())
    print(f"{args.task} seed {args.seed}: pass_rate {summary.final_pass_rate:.4f} "
          f"after {summary.iterations} iteration(s) -> {summary.root}")
    return 0


def _emit(args, table: str, doc) -> None:
    sys.stdout.write(table)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _write_json(out, doc)


def cmd_eval(args, cfg: Config) -> int:
    kind = args.metric
    if kind == "ratings":
        agg = aggregate_ratings(read_ratings(args.input))
        rows = [[t, b, d, f"{s.mean:.3f}", f"{s.std:.3f}", str(s.n)] for (t, b, d), s in agg.items()]
        doc = [{"task": t, "baseline": b, "dimension": d, "mean": s.mean, "std": s.std, "n": s.n}
               for (t, b, d), s in agg.items()]
        _emit(args, format_table(["task", "baseline", "dim", "mean", "std", "n"], rows), doc)
    elif kind == "winrate":
        rates = winning_rates(read_matches(args.input))
        rows = [[t, b, fmt2(v)] for (t, b), v in rates.items()]
        _emit(args, format_table(["task", "baseline", "win%"], rows),
              [{"task": t, "baseline": b, "winning_rate": v} for (t, b), v in rates.items()])
    elif kind == "elo":
        params = cfg.elo if args.seed is None else replace(cfg.elo, seed=args.seed)
        res = elo(read_matches(args.input), params)
        ranked = sorted(res.ratings.items(), key=lambda kv: (-kv[1], kv[0]))
        _emit(args, format_table(["baseline", "elo"], [[p, f"{r:.2f}"] for p, r in ranked]),
              {"ratings": res.ratings, "shuffles": res.shuffles, "init": params.init, "k": params.k,
               "seed": params.seed})
    elif kind == "spearman":
        lines = [ln for ln in _read(args.input).splitlines() if ln.strip()]
        if not lines or lines[0].replace(" ", "") != "x,y":
            raise errors.InvalidRecord("spearman input must be a CSV with header x,y")
        try:
            xs, ys = zip(*[(float(a), float(b)) for a, b in (ln.split(",") for ln in lines[1:])])
        except ValueError:
            raise errors.InvalidRecord("spearman rows must be two numbers") from None
        r = spearman(xs, ys)
        rho, p = r.format()
        _emit(args, format_table(["n", "rho", "p", "method"], [[str(r.n), rho, p, r.method]]),
              {"n": r.n, "rho": r.rho, "p": r.p, "method": r.method})
    elif kind == "passrate":
        table = pass_rate_table(read_pass_rates(args.input))
        _emit(args, format_table(["task", "baseline", "pass%"], [[t, b, fmt2(v)] for (t, b), v in table.items()]),
              [{"task": t, "baseline": b, "pass_rate": v} for (t, b), v in table.items()])
    elif kind == "protocol":
        counts = validate_protocol(read_matches(args.input), per_pair=args.per_pair)
        _emit(args, format_table(["evaluator", "comparisons"], [[e, str(n)] for e, n in counts.items()]),
              counts)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="luban", description="Design, build and verify block structures.")
    p.add_argument("--config", help="JSON config with sections world, player, gateway, elo, tasks")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("model", cmd_model, "assemble a program; write its snapshot and render")
    sp.add_argument("program")
    sp.add_argument("--out", default=".")
    sp.add_argument("--scale", type=int, default=8)

    sp = add("render", cmd_render, "render a program (.dsl) or world snapshot (.json) to PPM")
    sp.add_argument("scene")
    sp.add_argument("--out", default=".")
    sp.add_argument("--scale", type=int, default=8)

    sp = add("terrain", cmd_terrain, "write a task's starting world")
    sp.add_argument("task")
    sp.add_argument("--out", default=".")

    sp = add("simulate", cmd_simulate, "run an action script against a world")
    sp.add_argument("world")
    sp.add_argument("actions")
    sp.add_argument("--out", default=".")

    sp = add("build", cmd_build, "place a program at a world anchor and construct it")
    sp.add_argument("world")
    sp.add_argument("program")
    sp.add_argument("--origin", default="build_origin")
    sp.add_argument("--out", default=".")

    sp = add("verify", cmd_verify, "run a check program against a world")
    sp.add_argument("world")
    sp.add_argument("checks")
    sp.add_argument("--program", help="program whose features resolve feature locations")
    sp.add_argument("--origin", default="build_origin")
    sp.add_argument("--out", default="verification.json")

    sp = add("run-task", cmd_run_task, "run the full agent loop on a benchmark task")
    sp.add_argument("task")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--backend", choices=("live", "record", "replay"))
    sp.add_argument("--transcripts", help="transcript directory (default: shipped transcripts)")
    sp.add_argument("--out", default="out")

    sp = add("eval", cmd_eval, "evaluation metrics over CSV inputs")
    sp.add_argument("metric", choices=("ratings", "winrate", "elo", "spearman", "passrate", "protocol"))
    sp.add_argument("input")
    sp.add_argument("--seed", type=int, default=None, help="shuffle seed for elo")
    sp.add_argument("--per-pair", type=int, default=3, help="comparisons per baseline pair (protocol)")
    sp.add_argument("--out", help="write JSON results here")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "backend", None):
            cfg.gateway = replace(cfg.gateway, backend=args.backend)
        if getattr(args, "transcripts", None):
            cfg.gateway = replace(cfg.gateway, transcripts=args.transcripts)
        return args.fn(args, cfg)
    except errors.LubanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
