"""Command-line entry points: run, eval, replay, render, serve."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .backends import (
    BackendError,
    CassetteRecorder,
    LiveHTTPBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
    load_script,
)
from .config import PRESET_NAMES, preset
from .episode import EP_FINISHED, run_episode, save_episode
from .evaluation import load_task, load_tasks, run_matrix, score_task
from .render import OBLIQUE_OVERVIEW, TOPDOWN_AT_CURSOR, ViewSpec, render_view
from .scene import SceneFormatError, load_scene

EXIT_OK = 0
EXIT_EPISODE_FAILED = 3
EXIT_RUNTIME_ERROR = 4


def _parse_methods(spec: str) -> list[str]:
    """"1-6", "1,3,5", or "method2" -> preset names."""
    methods: list[str] = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if "-" in chunk and not chunk.startswith("method"):
            lo, hi = chunk.split("-", 1)
            methods.extend(f"method{i}" for i in range(int(lo), int(hi) + 1))
        elif chunk.startswith("method"):
            methods.append(chunk)
        else:
            methods.append(f"method{int(chunk)}")
    for name in methods:
        if name not in PRESET_NAMES:
            raise ValueError(f"unknown method {name!r}")
    return methods


def _make_backend(args: argparse.Namespace):
    if args.backend == "scripted":
        if not args.script:
            raise ValueError("--backend scripted requires --script")
        backend = ScriptedBackend(load_script(args.script))
    elif args.backend == "replay":
        if not args.cassette:
            raise ValueError("--backend replay requires --cassette")
        return ReplayBackend(args.cassette)
    else:
        backend = LiveHTTPBackend(model=args.model)
    if args.record:
        if not args.cassette:
            raise ValueError("--record requires --cassette")
        backend = RecordingBackend(backend, CassetteRecorder(args.cassette))
    return backend


def _cmd_run(args: argparse.Namespace) -> int:
    config = preset(args.method, max_steps=args.max_steps)
    if args.task_file:
        task = load_task(args.task_file)
        instruction = task.instruction
        scene = load_scene(args.scene) if args.scene else task.load_scene()
    else:
        task = None
        instruction = args.instruction
        scene = load_scene(args.scene)

    backend = _make_backend(args)
    result = run_episode(config, instruction, scene, backend)

    out_dir = Path(args.out or f"episodes/{time.strftime('%Y%m%d-%H%M%S')}-{config.name}")
    save_episode(result, out_dir)
    from .scene import serialize_scene

    (out_dir / "final_scene.json").write_text(serialize_scene(result.final_scene),
                                              encoding="utf-8")
    print(f"termination: {result.termination}")
    print(f"steps: {len(result.transcript.steps)}")
    print(f"output: {out_dir}")
    if task is not None:
        score = score_task(task, result.final_scene)
        print(f"score: {score.value}")
        for item in score.satisfied:
            print(f"  [{'x' if item.passed else ' '}] {item.description}")
    return EXIT_OK if result.termination == EP_FINISHED else EXIT_EPISODE_FAILED


def _cmd_eval(args: argparse.Namespace) -> int:
    methods = _parse_methods(args.methods)
    tasks = load_tasks(args.tasks_dir)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cassette_dir = Path(args.cassette_dir) if args.cassette_dir else out_dir / "cassettes"

    def cassette_path(method: str, task, trial: int) -> Path:
        return cassette_dir / f"{method}_task{task.id}_trial{trial}.jsonl"

    if args.backend == "scripted":
        scripts_dir = Path(args.scripts_dir)

        def factory(method, task, trial):
            backend = ScriptedBackend(load_script(scripts_dir / f"task{task.id}.jsonl"))
            if args.record:
                backend = RecordingBackend(
                    backend, CassetteRecorder(cassette_path(method, task, trial)))
            return backend
    elif args.backend == "replay":
        def factory(method, task, trial):
            return ReplayBackend(cassette_path(method, task, trial))
    else:
        def factory(method, task, trial):
            backend = LiveHTTPBackend(model=args.model)
            if args.record:
                backend = RecordingBackend(
                    backend, CassetteRecorder(cassette_path(method, task, trial)))
            return backend

    report = run_matrix(methods, tasks, args.trials, factory,
                        out_dir=out_dir, workers=args.workers)
    report_text = report.to_text()
    (out_dir / "report.txt").write_text(report_text, encoding="utf-8")
    (out_dir / "report.json").write_text(
        json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8")
    print(report_text, end="")
    print(f"report written to {out_dir / 'report.txt'} and {out_dir / 'report.json'}")
    return EXIT_OK


def _cmd_render(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for kind, name in ((OBLIQUE_OVERVIEW, "overview"), (TOPDOWN_AT_CURSOR, "topdown")):
        raster = render_view(scene, ViewSpec(kind, args.width, args.height))
        (out_dir / f"{name}.png").write_bytes(raster.to_png())
    print(f"wrote {out_dir / 'overview.png'} and {out_dir / 'topdown.png'}")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = preset(args.method)
    scene_path = Path(args.fixture)

    if args.backend == "scripted":
        if not args.script:
            raise ValueError("--backend scripted requires --script")
        responses = load_script(args.script)
        queue = {"next": 0}

        # One shared queue across episodes: each instruction consumes the
        # next responses, which makes multi-instruction demo scripts possible.
        class SharedScript:
            def generate(self, bundle, temperature):
                if queue["next"] >= len(responses):
                    raise BackendError("demo script exhausted")
                response = responses[queue["next"]]
                queue["next"] += 1
                return response

        def backend_factory():
            return SharedScript()
    else:
        def backend_factory():
            return LiveHTTPBackend(model=args.model)

    frontend = Path(args.frontend) if args.frontend else None
    app = create_app(backend_factory,
                     default_scene_factory=lambda: load_scene(scene_path),
                     config=config,
                     episodes_dir=args.out,
                     frontend_dir=frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenesmith",
        description="Agent-driven layout generation in a 2.5D virtual space.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_backend_options(p: argparse.ArgumentParser, kinds: tuple[str, ...]) -> None:
        p.add_argument("--backend", choices=kinds, default=kinds[0],
                       help="model backend (default: %(default)s)")
        p.add_argument("--script", help="response script (JSONL) for the scripted backend")
        p.add_argument("--cassette", help="cassette file for replay or recording")
        p.add_argument("--record", action="store_true",
                       help="record prompt/response pairs to the cassette")
        p.add_argument("--model", default="gpt-4-vision-preview",
                       help="model name for the live backend (default: %(default)s)")

    run_p = sub.add_parser("run", help="run one episode")
    run_p.add_argument("--method", default="1", help="preset method1..method6 (default: 1)")
    run_p.add_argument("--task-file", help="task JSON supplying instruction, scene, predicates")
    run_p.add_argument("--instruction", help="instruction text (requires --scene)")
    run_p.add_argument("--scene", help="initial scene JSON file")
    run_p.add_argument("--out", help="output directory (default: episodes/<timestamp>)")
    run_p.add_argument("--max-steps", type=int, default=20)
    add_backend_options(run_p, ("scripted", "replay", "live"))
    run_p.set_defaults(handler=_cmd_run)

    replay_p = sub.add_parser("replay", help="re-run an episode from a recorded cassette")
    replay_p.add_argument("--method", default="1")
    replay_p.add_argument("--task-file")
    replay_p.add_argument("--instruction")
    replay_p.add_argument("--scene")
    replay_p.add_argument("--out")
    replay_p.add_argument("--max-steps", type=int, default=20)
    replay_p.add_argument("--cassette", required=True)
    replay_p.set_defaults(handler=_cmd_run, backend="replay", script=None,
                          record=False, model="")

    eval_p = sub.add_parser("eval", help="run the methods x tasks x trials matrix")
    eval_p.add_argument("--methods", default="1-6", help='e.g. "1-6" or "1,4" (default: 1-6)')
    eval_p.add_argument("--trials", type=int, default=3)
    eval_p.add_argument("--tasks-dir", default="tasks")
    eval_p.add_argument("--scripts-dir", default="fixtures/scripts",
                        help="directory of task<id>.jsonl scripts for the scripted backend")
    eval_p.add_argument("--cassette-dir",
                        help="cassette directory (default: <out>/cassettes)")
    eval_p.add_argument("--out", default="eval_out", help="report output directory")
    eval_p.add_argument("--workers", type=int, default=4)
    add_backend_options(eval_p, ("scripted", "replay", "live"))
    eval_p.set_defaults(handler=_cmd_eval)

    render_p = sub.add_parser("render", help="render a scene file to PNGs")
    render_p.add_argument("--scene", required=True)
    render_p.add_argument("--out", default="renders")
    render_p.add_argument("--width", type=int, default=512)
    render_p.add_argument("--height", type=int, default=256)
    render_p.set_defaults(handler=_cmd_render)

    serve_p = sub.add_parser("serve", help="serve the interactive HTTP API")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8400)
    serve_p.add_argument("--method", default="1")
    serve_p.add_argument("--fixture", default="fixtures/scenes/meadow_with_house.json",
                         help="default scene for new sessions")
    serve_p.add_argument("--out", default=None, help="directory for persisted transcripts")
    serve_p.add_argument("--frontend", default=None, help="static UI directory to mount at /ui")
    add_backend_options(serve_p, ("live", "scripted"))
    serve_p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "task_file", None) is None and \
                getattr(args, "instruction", None) is not None and \
                getattr(args, "scene", None) is None:
            parser.error("--instruction requires --scene")
        if args.command in ("run", "replay") and \
                not (getattr(args, "task_file", None) or getattr(args, "instruction", None)):
            parser.error("one of --task-file or --instruction is required")
        return args.handler(args)
    except (ValueError, SceneFormatError, FileNotFoundError, BackendError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
