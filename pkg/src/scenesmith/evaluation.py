"""Geometric evaluation of final scenes and the ablation experiment matrix.

Each task pairs an instruction with predicates over the final scene; the
number of satisfied predicates maps onto a 1-3 score (3 = all, 2 = at least
half rounded up, 1 = otherwise). Spatial predicates treat smaller y as
"in front" and score only positions and footprints, never orientation.

Default thresholds: "near"/"against the wall" means a footprint gap of at
most 2.0 grid units; "in the center" means at most 1.5 units from the region
center. Task files may override per predicate.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import PRESET_LABELS, preset
from .episode import EP_FINISHED, EP_MAX_STEPS, run_episode, save_episode
from .geometry import rect_gap
from .scene import AGENT_PLACED, Scene, SceneObject, load_scene

log = logging.getLogger(__name__)

NEAR_THRESHOLD = 2.0
CENTER_THRESHOLD = 1.5

PREDICATE_KINDS = ("count_equals", "near", "left_of", "right_of",
                   "in_front_of", "behind", "against_wall", "in_center")


@dataclass(frozen=True)
class Predicate:
    """One geometric check over the final scene.

    ``subject`` is a name pattern matched (case-insensitive substring)
    against agent-placed objects; ``reference`` names objects, a wall id
    ("*" for any wall), or the bounds region for in_center. ``quantifier``
    decides how multiple subject matches combine: "any" needs one satisfying
    subject, "all" needs at least one match and every match satisfying.
    """

    kind: str
    subject: str
    reference: str | None = None
    threshold: float | None = None
    expected_count: int | None = None
    quantifier: str = "any"

    def __post_init__(self) -> None:
        if self.kind not in PREDICATE_KINDS:
            raise ValueError(f"unknown predicate kind {self.kind!r}")
        if self.threshold is not None and self.threshold <= 0:
            raise ValueError("threshold must be strictly positive")
        if self.quantifier not in ("any", "all"):
            raise ValueError("quantifier must be 'any' or 'all'")

    def describe(self) -> str:
        bits = [self.kind, self.subject]
        if self.reference:
            bits.append(self.reference)
        if self.expected_count is not None:
            bits.append(f"={self.expected_count}")
        return " ".join(bits)


class UnknownWallError(KeyError):
    pass


def _name_matches(pattern: str, name: str) -> bool:
    return pattern.lower() in " ".join(name.lower().split())


def _subjects(scene: Scene, pattern: str) -> list[SceneObject]:
    return [obj for obj in scene.objects
            if obj.origin == AGENT_PLACED and _name_matches(pattern, obj.name)]


def _references(scene: Scene, pattern: str) -> list[SceneObject]:
    return [obj for obj in scene.objects if _name_matches(pattern, obj.name)]


def _quantify(quantifier: str, results: list[bool]) -> bool:
    if not results:
        return False
    return any(results) if quantifier == "any" else all(results)


def check_predicate(scene: Scene, p: Predicate) -> bool:
    """Evaluate one predicate; raises UnknownWallError for a bad wall id."""
    if p.kind == "count_equals":
        return len(_subjects(scene, p.subject)) == p.expected_count

    subjects = _subjects(scene, p.subject)

    if p.kind == "near":
        threshold = p.threshold if p.threshold is not None else NEAR_THRESHOLD
        refs = _references(scene, p.reference)
        results = [any(r is not s and rect_gap(s.rect, r.rect) <= threshold for r in refs)
                   for s in subjects]
        return _quantify(p.quantifier, results)

    if p.kind in ("left_of", "right_of", "in_front_of", "behind"):
        refs = _references(scene, p.reference)
        results = []
        for s in subjects:
            ok = False
            for r in refs:
                if r is s:
                    continue
                if p.kind == "left_of":
                    ok = s.position.x < r.rect.min_x
                elif p.kind == "right_of":
                    ok = s.position.x > r.rect.max_x
                elif p.kind == "in_front_of":  # front = smaller y
                    ok = s.position.y < r.rect.min_y
                else:
                    ok = s.position.y > r.rect.max_y
                if ok:
                    break
            results.append(ok)
        return _quantify(p.quantifier, results)

    if p.kind == "against_wall":
        threshold = p.threshold if p.threshold is not None else NEAR_THRESHOLD
        if p.reference == "*" or p.reference is None:
            walls = scene.walls
            if not walls:
                raise UnknownWallError("scene has no walls")
        else:
            try:
                walls = [scene.wall_by_id(p.reference)]
            except KeyError as exc:
                raise UnknownWallError(str(exc)) from exc
        results = [any(rect_gap(s.rect, w.rect) <= threshold for w in walls)
                   for s in subjects]
        return _quantify(p.quantifier, results)

    # in_center: distance from the bounds-region center
    threshold = p.threshold if p.threshold is not None else CENTER_THRESHOLD
    center = scene.bounds.center
    results = [math.hypot(s.position.x - center.x, s.position.y - center.y) <= threshold
               for s in subjects]
    return _quantify(p.quantifier, results)


@dataclass(frozen=True)
class PredicateResult:
    description: str
    passed: bool


@dataclass(frozen=True)
class TaskScore:
    value: int
    satisfied: tuple[PredicateResult, ...]


def score_value(total: int, passed: int) -> int:
    """3 iff all predicates hold, 2 iff at least half (rounded up), else 1."""
    if total == 0 or passed == total:
        return 3
    if passed >= math.ceil(total / 2):
        return 2
    return 1


@dataclass(frozen=True)
class EvalTask:
    id: int
    instruction: str
    scene_path: Path
    predicates: tuple[Predicate, ...]

    def load_scene(self) -> Scene:
        return load_scene(self.scene_path)


def load_task(path: str | Path) -> EvalTask:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    predicates = tuple(
        Predicate(
            kind=entry["kind"],
            subject=entry["subject"],
            reference=entry.get("reference"),
            threshold=entry.get("threshold"),
            expected_count=entry.get("expected_count"),
            quantifier=entry.get("quantifier", "any"),
        )
        for entry in data["predicates"]
    )
    return EvalTask(
        id=int(data["id"]),
        instruction=data["instruction"],
        scene_path=(path.parent / data["scene"]).resolve(),
        predicates=predicates,
    )


def load_tasks(directory: str | Path) -> list[EvalTask]:
    tasks = [load_task(p) for p in sorted(Path(directory).glob("*.json"))]
    return sorted(tasks, key=lambda t: t.id)


def score_task(task: EvalTask, final_scene: Scene) -> TaskScore:
    results = tuple(PredicateResult(p.describe(), check_predicate(final_scene, p))
                    for p in task.predicates)
    passed = sum(1 for r in results if r.passed)
    return TaskScore(score_value(len(results), passed), results)


@dataclass(frozen=True)
class CellResult:
    method: str
    task_id: int
    trial: int
    score: int
    flagged: bool
    termination: str


@dataclass
class Report:
    methods: list[str]
    task_ids: list[int]
    trials: int
    cells: list[CellResult]

    def method_mean(self, method: str) -> float | None:
        scores = [c.score for c in self.cells if c.method == method]
        if not scores:
            return None
        return round(sum(scores) / len(scores), 3)

    def cell_mean(self, method: str, task_id: int) -> float | None:
        scores = [c.score for c in self.cells
                  if c.method == method and c.task_id == task_id]
        if not scores:
            return None
        return round(sum(scores) / len(scores), 3)

    def to_text(self) -> str:
        lines = [
            f"Ablation evaluation: predicate-rubric scores (1-3), {self.trials} trial(s) per task",
            "",
        ]
        header = f"{'Method':<28}" + "".join(f"{'Task ' + str(t):>9}" for t in self.task_ids)
        lines.append(header + f"{'Mean':>9}")
        for method in self.methods:
            label = f"{method} ({PRESET_LABELS.get(method, 'custom')})"
            row = f"{label:<28}"
            for task_id in self.task_ids:
                mean = self.cell_mean(method, task_id)
                row += f"{mean:>9.3f}" if mean is not None else f"{'-':>9}"
            mean = self.method_mean(method)
            row += f"{mean:>9.3f}" if mean is not None else f"{'-':>9}"
            lines.append(row)
        flagged = [c for c in self.cells if c.flagged]
        if flagged:
            lines.append("")
            lines.append("Flagged episodes (scored 1 due to failure):")
            lines.extend(f"  {c.method} task{c.task_id} trial{c.trial}: {c.termination}"
                         for c in flagged)
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "method_means": {m: self.method_mean(m) for m in self.methods},
            "cells": [
                {
                    "method": c.method,
                    "task_id": c.task_id,
                    "trial": c.trial,
                    "score": c.score,
                    "flagged": c.flagged,
                    "termination": c.termination,
                }
                for c in self.cells
            ],
        }


def run_matrix(methods: list[str], tasks: list[EvalTask], trials: int,
               backend_factory, *, assets_factory=None, out_dir: str | Path | None = None,
               workers: int = 4, config_overrides: dict | None = None) -> Report:
    """Run trials x (method, task) episodes and assemble the score report.

    ``backend_factory(method, task, trial)`` must yield a fresh backend per
    cell (scripted and replay backends are single-episode consumers).
    Episodes that terminate without reaching finish_action or the step cap
    score 1 and are flagged rather than aborting the matrix.
    """
    cells_todo = [(method, task, trial)
                  for method in methods for task in tasks for trial in range(trials)]

    def run_cell(method: str, task: EvalTask, trial: int) -> CellResult:
        config = preset(method, **(config_overrides or {}))
        scene = task.load_scene()
        assets = assets_factory() if assets_factory is not None else None
        try:
            result = run_episode(config, task.instruction, scene,
                                 backend_factory(method, task, trial), assets=assets)
        except Exception as exc:  # defensive: a broken cell must not kill the matrix
            log.warning("episode %s/task%d/trial%d raised: %s", method, task.id, trial, exc)
            return CellResult(method, task.id, trial, 1, True, "error")
        if out_dir is not None:
            save_episode(result, Path(out_dir) / "episodes"
                         / f"{method}_task{task.id}_trial{trial}")
        if result.termination not in (EP_FINISHED, EP_MAX_STEPS):
            return CellResult(method, task.id, trial, 1, True, result.termination)
        score = score_task(task, result.final_scene)
        return CellResult(method, task.id, trial, score.value, False, result.termination)

    if workers > 1 and len(cells_todo) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(lambda args: run_cell(*args), cells_todo))
    else:
        cells = [run_cell(*args) for args in cells_todo]

    return Report(methods=list(methods), task_ids=[t.id for t in tasks],
                  trials=trials, cells=cells)
