"""scenesmith: agent-driven layout generation in a 2.5D virtual space.

A pluggable multimodal language model steers a cursor through a bounded
ground plane, placing objects one JSON action at a time. The package bundles
the deterministic scene simulator, the action protocol, prompt assembly with
ablation presets, a deterministic renderer, scripted/replay/live backends,
a geometric evaluation harness, and a CLI plus HTTP service.
"""

from .actions import (
    Action,
    FinishAction,
    MoveCursor,
    PlaceObject,
    ProtocolError,
    parse_action,
    resolve_position,
)
from .assets import Asset, AssetFactory, procedural_asset
from .config import AgentConfig, PRESET_NAMES, preset
from .episode import EpisodeResult, Transcript, continue_episode, run_episode
from .evaluation import EvalTask, Predicate, check_predicate, run_matrix, score_task
from .geometry import Footprint, Rect, Vec2
from .scene import Scene, SceneObject, StepOutcome, Wall, apply_action, bbox_text
from .scene import deserialize_scene, scene_hash, serialize_scene

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AgentConfig",
    "Asset",
    "AssetFactory",
    "EpisodeResult",
    "EvalTask",
    "FinishAction",
    "Footprint",
    "MoveCursor",
    "PlaceObject",
    "Predicate",
    "ProtocolError",
    "PRESET_NAMES",
    "Rect",
    "Scene",
    "SceneObject",
    "StepOutcome",
    "Transcript",
    "Vec2",
    "Wall",
    "apply_action",
    "bbox_text",
    "check_predicate",
    "continue_episode",
    "deserialize_scene",
    "parse_action",
    "preset",
    "procedural_asset",
    "resolve_position",
    "run_episode",
    "run_matrix",
    "scene_hash",
    "score_task",
    "serialize_scene",
]
