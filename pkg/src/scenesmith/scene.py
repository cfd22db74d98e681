"""Virtual-space state and the deterministic action simulator.

A Scene is a bounded ground plane with a cursor, placed objects (axis-aligned
box footprints), and optional walls. Actions mutate it through
``apply_action``; rejected actions never mutate anything.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .actions import Action, FinishAction, MoveCursor, PlaceObject
from .assets import Asset, procedural_asset
from .geometry import Footprint, Rect, Vec2, rect_around, rects_overlap

# The cursor is rendered and reported as a small square of this extent.
CURSOR_EXTENT = 0.5

PREINSTALLED = "preinstalled"
AGENT_PLACED = "agent_placed"

APPLIED = "applied"
REJECTED = "rejected"
FINISHED = "finished"


@dataclass
class SceneObject:
    id: str
    name: str
    position: Vec2
    footprint: Footprint
    origin: str = PREINSTALLED
    asset_ref: str = ""

    @property
    def rect(self) -> Rect:
        return rect_around(self.position, self.footprint.width, self.footprint.depth)


@dataclass(frozen=True)
class Wall:
    """Axis-aligned wall segment with a thickness, used by room scenes."""

    id: str
    x1: float
    y1: float
    x2: float
    y2: float
    height: float = 2.0
    thickness: float = 0.2

    def __post_init__(self) -> None:
        if self.x1 != self.x2 and self.y1 != self.y2:
            raise ValueError(f"wall {self.id!r} must be axis-aligned")
        if self.thickness <= 0 or self.height <= 0:
            raise ValueError(f"wall {self.id!r} thickness and height must be > 0")

    @property
    def rect(self) -> Rect:
        half = self.thickness / 2
        return Rect(
            min(self.x1, self.x2) - half,
            min(self.y1, self.y2) - half,
            max(self.x1, self.x2) + half,
            max(self.y1, self.y2) + half,
        )


@dataclass
class Scene:
    bounds: Rect
    cursor: Vec2
    grid_interval: float = 1.0
    objects: list[SceneObject] = field(default_factory=list)
    walls: list[Wall] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.grid_interval <= 0:
            raise ValueError("grid_interval must be > 0")
        if not self.bounds.contains(self.cursor):
            raise ValueError(f"cursor ({self.cursor.x}, {self.cursor.y}) outside bounds")
        for obj in self.objects:
            if not self.bounds.contains(obj.position):
                raise ValueError(f"object {obj.id!r} center outside bounds")

    def wall_by_id(self, wall_id: str) -> Wall:
        for wall in self.walls:
            if wall.id == wall_id:
                return wall
        raise KeyError(f"unknown wall id {wall_id!r}")


@dataclass(frozen=True)
class StepOutcome:
    status: str  # applied | rejected | finished
    detail: str = ""


def _next_object_id(scene: Scene, key: str) -> str:
    slug = key.replace(" ", "-")
    count = sum(1 for obj in scene.objects if obj.asset_ref == key)
    return f"{slug}#{count + 1}"


def apply_action(scene: Scene, action: Action, assets=None,
                 strict_collision: bool = False) -> StepOutcome:
    """Apply a parsed, position-resolved action to the scene.

    move_cursor targets outside the bounds are rejected with detail
    "out of bounds". Overlapping placements are applied with a warning in
    the outcome detail unless ``strict_collision`` is set, in which case
    they are rejected with detail "overlap". ``assets`` is anything with a
    ``get_or_create(name) -> Asset`` method; when omitted, assets are
    derived procedurally without caching.
    """
    fn = action.function
    if isinstance(fn, MoveCursor):
        if not scene.bounds.contains(fn.target):
            return StepOutcome(REJECTED, "out of bounds")
        scene.cursor = fn.target
        return StepOutcome(APPLIED, f"cursor moved to ({fn.target.x:.1f}, {fn.target.y:.1f})")

    if isinstance(fn, PlaceObject):
        asset: Asset = (assets.get_or_create(fn.object_name) if assets is not None
                        else procedural_asset(fn.object_name))
        new_rect = rect_around(scene.cursor, asset.footprint.width, asset.footprint.depth)
        overlapping = [obj.id for obj in scene.objects if rects_overlap(new_rect, obj.rect)]
        if overlapping and strict_collision:
            return StepOutcome(REJECTED, "overlap")
        obj = SceneObject(
            id=_next_object_id(scene, asset.key),
            name=fn.object_name,
            position=scene.cursor,
            footprint=asset.footprint,
            origin=AGENT_PLACED,
            asset_ref=asset.key,
        )
        scene.objects.append(obj)
        detail = f"placed {obj.id} at ({obj.position.x:.1f}, {obj.position.y:.1f})"
        if overlapping:
            detail += "; overlaps " + ", ".join(overlapping)
        return StepOutcome(APPLIED, detail)

    if isinstance(fn, FinishAction):
        return StepOutcome(FINISHED, fn.reason)

    raise TypeError(f"unsupported action function: {fn!r}")


def _bbox_line(name: str, x: float, y: float, width: float, depth: float) -> str:
    return f"{name}: x={x:.1f}, y={y:.1f}, width={width:.1f}, depth={depth:.1f}"


def bbox_text(scene: Scene, cursor_only: bool = False) -> str:
    """Bounding-box style listing of the cursor and every object, one line each.

    The cursor comes first, then objects in insertion order; numbers carry
    exactly one decimal place. With ``cursor_only`` only the cursor line is
    emitted.
    """
    lines = [_bbox_line("cursor", scene.cursor.x, scene.cursor.y, CURSOR_EXTENT, CURSOR_EXTENT)]
    if not cursor_only:
        lines.extend(
            _bbox_line(obj.name, obj.position.x, obj.position.y,
                       obj.footprint.width, obj.footprint.depth)
            for obj in scene.objects
        )
    return "\n".join(lines)


class SceneFormatError(ValueError):
    """Raised on malformed scene files; the message names the offending field."""


def scene_to_dict(scene: Scene) -> dict:
    return {
        "bounds": {
            "min_x": scene.bounds.min_x,
            "min_y": scene.bounds.min_y,
            "max_x": scene.bounds.max_x,
            "max_y": scene.bounds.max_y,
        },
        "grid_interval": scene.grid_interval,
        "cursor": {"x": scene.cursor.x, "y": scene.cursor.y},
        "objects": [
            {
                "id": obj.id,
                "name": obj.name,
                "x": obj.position.x,
                "y": obj.position.y,
                "width": obj.footprint.width,
                "depth": obj.footprint.depth,
                "height": obj.footprint.height,
                "origin": obj.origin,
                "asset_ref": obj.asset_ref,
            }
            for obj in scene.objects
        ],
        "walls": [
            {
                "id": wall.id,
                "x1": wall.x1,
                "y1": wall.y1,
                "x2": wall.x2,
                "y2": wall.y2,
                "height": wall.height,
                "thickness": wall.thickness,
            }
            for wall in scene.walls
        ],
    }


def serialize_scene(scene: Scene) -> str:
    """Canonical UTF-8 JSON text for a scene; equal scenes serialize identically."""
    return json.dumps(scene_to_dict(scene), indent=2, ensure_ascii=False) + "\n"


def _get(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise SceneFormatError(f"{context}{key}: missing required field")
    return mapping[key]


def _get_number(mapping: dict, key: str, context: str) -> float:
    value = _get(mapping, key, context)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SceneFormatError(f"{context}{key}: expected a number, got {value!r}")
    return float(value)


def scene_from_dict(data: dict) -> Scene:
    if not isinstance(data, dict):
        raise SceneFormatError("top level: expected a JSON object")
    bounds_data = _get(data, "bounds", "")
    if not isinstance(bounds_data, dict):
        raise SceneFormatError("bounds: expected an object")
    try:
        bounds = Rect(
            _get_number(bounds_data, "min_x", "bounds."),
            _get_number(bounds_data, "min_y", "bounds."),
            _get_number(bounds_data, "max_x", "bounds."),
            _get_number(bounds_data, "max_y", "bounds."),
        )
    except ValueError as exc:
        raise SceneFormatError(f"bounds: {exc}") from exc

    cursor_data = _get(data, "cursor", "")
    if not isinstance(cursor_data, dict):
        raise SceneFormatError("cursor: expected an object")
    cursor = Vec2(_get_number(cursor_data, "x", "cursor."),
                  _get_number(cursor_data, "y", "cursor."))

    objects = []
    raw_objects = data.get("objects", [])
    if not isinstance(raw_objects, list):
        raise SceneFormatError("objects: expected a list")
    for i, entry in enumerate(raw_objects):
        context = f"objects[{i}]."
        if not isinstance(entry, dict):
            raise SceneFormatError(f"objects[{i}]: expected an object")
        try:
            footprint = Footprint(
                _get_number(entry, "width", context),
                _get_number(entry, "depth", context),
                _get_number(entry, "height", context),
            )
        except ValueError as exc:
            raise SceneFormatError(f"{context}footprint: {exc}") from exc
        origin = entry.get("origin", PREINSTALLED)
        if origin not in (PREINSTALLED, AGENT_PLACED):
            raise SceneFormatError(f"{context}origin: must be one of "
                                   f"{PREINSTALLED!r}, {AGENT_PLACED!r}")
        objects.append(SceneObject(
            id=str(_get(entry, "id", context)),
            name=str(_get(entry, "name", context)),
            position=Vec2(_get_number(entry, "x", context), _get_number(entry, "y", context)),
            footprint=footprint,
            origin=origin,
            asset_ref=str(entry.get("asset_ref", "")),
        ))

    walls = []
    raw_walls = data.get("walls", [])
    if not isinstance(raw_walls, list):
        raise SceneFormatError("walls: expected a list")
    for i, entry in enumerate(raw_walls):
        context = f"walls[{i}]."
        if not isinstance(entry, dict):
            raise SceneFormatError(f"walls[{i}]: expected an object")
        try:
            walls.append(Wall(
                id=str(_get(entry, "id", context)),
                x1=_get_number(entry, "x1", context),
                y1=_get_number(entry, "y1", context),
                x2=_get_number(entry, "x2", context),
                y2=_get_number(entry, "y2", context),
                height=float(entry.get("height", 2.0)),
                thickness=float(entry.get("thickness", 0.2)),
            ))
        except ValueError as exc:
            raise SceneFormatError(f"walls[{i}]: {exc}") from exc

    grid_interval = float(data.get("grid_interval", 1.0))
    try:
        return Scene(bounds=bounds, cursor=cursor, grid_interval=grid_interval,
                     objects=objects, walls=walls)
    except ValueError as exc:
        raise SceneFormatError(str(exc)) from exc


def deserialize_scene(text: str) -> Scene:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scene_from_dict(data)


def load_scene(path) -> Scene:
    with open(path, encoding="utf-8") as handle:
        return deserialize_scene(handle.read())


def scene_hash(scene: Scene) -> str:
    """Content hash of the canonical serialization; equal scenes hash equally."""
    return hashlib.sha256(serialize_scene(scene).encode("utf-8")).hexdigest()
