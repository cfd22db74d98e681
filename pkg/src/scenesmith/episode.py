"""Episode orchestration: build prompt, generate, parse, apply, repeat.

One episode runs an instruction against a scene until the model calls
finish_action, the step cap is hit, parsing fails beyond the retry budget,
or the backend fails. Every step is captured in an append-only transcript
that also drives the history channel of later prompts.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .actions import Action, ProtocolError, action_to_dict, parse_action, resolve_position
from .backends import Backend, BackendError, bundle_hash
from .config import AgentConfig
from .prompting import build_prompt
from .render import render_views
from .scene import FINISHED, Scene, StepOutcome, apply_action, scene_hash, scene_to_dict

log = logging.getLogger(__name__)

EP_FINISHED = "finished"
EP_MAX_STEPS = "max_steps"
EP_UNRECOVERABLE_PARSE = "unrecoverable_parse"
EP_BACKEND_FAILURE = "backend_failure"
EP_CANCELLED = "cancelled"


@dataclass(frozen=True)
class ParseFailure:
    kind: str
    message: str


@dataclass
class StepRecord:
    index: int
    bundle_hash: str
    raw_output: str
    action: Action | None = None
    error: ParseFailure | None = None
    outcome: StepOutcome | None = None
    scene_hash: str = ""
    images: dict[str, bytes] | None = None  # view name -> PNG bytes


@dataclass
class Transcript:
    preset: str
    instruction: str
    start_scene_hash: str
    steps: list[StepRecord] = field(default_factory=list)
    termination: str | None = None


@dataclass
class EpisodeResult:
    final_scene: Scene
    transcript: Transcript
    termination: str


def run_episode(config: AgentConfig, instruction: str, initial: Scene,
                backend: Backend, *, assets=None, recorder=None,
                on_step: Callable[[StepRecord, Scene], None] | None = None,
                should_stop: Callable[[], bool] | None = None) -> EpisodeResult:
    """Run one full episode; the initial scene is copied, never mutated.

    Parse failures feed their error message back through the history channel
    and retry the same state; each retry consumes a step, and more than
    ``config.parse_retry_limit`` consecutive failures end the episode. The
    backend is called at most ``config.max_steps`` times.
    """
    scene = copy.deepcopy(initial)
    transcript = Transcript(config.name, instruction, scene_hash(scene))
    termination = None
    consecutive_failures = 0

    for index in range(config.max_steps):
        if should_stop is not None and should_stop():
            termination = EP_CANCELLED
            break

        image_pngs = None
        image_map = None
        if config.include_status_image:
            overview, topdown = render_views(scene, config)
            image_pngs = (overview.to_png(), topdown.to_png())
            image_map = {"overview": image_pngs[0], "topdown": image_pngs[1]}
        bundle = build_prompt(config, instruction, transcript, scene, images=image_pngs)

        try:
            raw = backend.generate(bundle, config.temperature)
        except BackendError as exc:
            log.warning("backend failed at step %d: %s", index, exc)
            termination = EP_BACKEND_FAILURE
            break
        if recorder is not None:
            recorder.record(bundle, raw)

        record = StepRecord(index=index, bundle_hash=bundle_hash(bundle),
                            raw_output=raw, images=image_map)
        try:
            action = parse_action(raw, cot_enabled=config.cot)
        except ProtocolError as exc:
            consecutive_failures += 1
            record.error = ParseFailure(exc.kind.value, exc.message)
            record.scene_hash = scene_hash(scene)
            transcript.steps.append(record)
            if on_step is not None:
                on_step(record, scene)
            if consecutive_failures > config.parse_retry_limit:
                termination = EP_UNRECOVERABLE_PARSE
                break
            continue
        consecutive_failures = 0

        resolved = resolve_position(action, scene.cursor, config.position_mode)
        outcome = apply_action(scene, resolved, assets=assets)
        record.action = action  # as emitted by the model, before resolution
        record.outcome = outcome
        record.scene_hash = scene_hash(scene)
        transcript.steps.append(record)
        if on_step is not None:
            on_step(record, scene)
        if outcome.status == FINISHED:
            termination = EP_FINISHED
            break
    else:
        termination = EP_MAX_STEPS

    transcript.termination = termination
    return EpisodeResult(final_scene=scene, transcript=transcript, termination=termination)


def continue_episode(prior: EpisodeResult, new_instruction: str, config: AgentConfig,
                     backend: Backend, **kwargs) -> EpisodeResult:
    """Start a fresh episode on the prior final scene: new instruction, new history."""
    return run_episode(config, new_instruction, prior.final_scene, backend, **kwargs)


def _step_to_dict(step: StepRecord) -> dict:
    return {
        "type": "step",
        "step": step.index,
        "bundle_hash": step.bundle_hash,
        "raw_output": step.raw_output,
        "action": action_to_dict(step.action) if step.action is not None else None,
        "error": ({"kind": step.error.kind, "message": step.error.message}
                  if step.error is not None else None),
        "outcome": ({"status": step.outcome.status, "detail": step.outcome.detail}
                    if step.outcome is not None else None),
        "scene_hash": step.scene_hash,
        "images": ({name: "sha256:" + hashlib.sha256(data).hexdigest()
                    for name, data in step.images.items()}
                   if step.images is not None else None),
    }


def transcript_to_dicts(result: EpisodeResult) -> list[dict]:
    """The persisted transcript as a list of JSON-able records (meta, steps, end)."""
    transcript = result.transcript
    lines = [{
        "type": "meta",
        "preset": transcript.preset,
        "instruction": transcript.instruction,
        "start_scene_hash": transcript.start_scene_hash,
    }]
    lines.extend(_step_to_dict(step) for step in transcript.steps)
    lines.append({
        "type": "end",
        "termination": result.termination,
        "final_scene_hash": scene_hash(result.final_scene),
        "final_scene": scene_to_dict(result.final_scene),
    })
    return lines


def save_episode(result: EpisodeResult, out_dir: str | Path) -> Path:
    """Persist transcript.jsonl plus step<k>_<view>.png for every rendered view."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "transcript.jsonl"
    with path.open("w", encoding="utf-8") as handle:
        for line in transcript_to_dicts(result):
            handle.write(json.dumps(line, ensure_ascii=False) + "\n")
    for step in result.transcript.steps:
        if step.images:
            for view_name, data in step.images.items():
                (out / f"step{step.index}_{view_name}.png").write_bytes(data)
    return path
