"""Parsing and validation of model-emitted JSON actions.

The wire schema is a single JSON object per step:

    {"thought": "...", "function": "<name>", "parameters": {...}}

with exactly three function names: ``move_cursor`` (parameters ``x``, ``y``),
``place_object`` (parameter ``object_name``), and ``finish_action``
(parameter ``reason``). ``thought`` is required when chain-of-thought is
enabled and dropped when it is not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum

from .geometry import Vec2

MOVE_CURSOR = "move_cursor"
PLACE_OBJECT = "place_object"
FINISH_ACTION = "finish_action"
FUNCTION_NAMES = (MOVE_CURSOR, PLACE_OBJECT, FINISH_ACTION)

ABSOLUTE = "absolute"
RELATIVE = "relative"
POSITION_MODES = (ABSOLUTE, RELATIVE)


@dataclass(frozen=True)
class MoveCursor:
    """Move the cursor to a target position (an offset before resolution in relative mode)."""

    target: Vec2


@dataclass(frozen=True)
class PlaceObject:
    """Place the named object at the current cursor position."""

    object_name: str


@dataclass(frozen=True)
class FinishAction:
    """Terminate the episode with a user-facing reason."""

    reason: str


ActionFunction = MoveCursor | PlaceObject | FinishAction


@dataclass(frozen=True)
class Action:
    function: ActionFunction
    thought: str | None = None

    @property
    def function_name(self) -> str:
        if isinstance(self.function, MoveCursor):
            return MOVE_CURSOR
        if isinstance(self.function, PlaceObject):
            return PLACE_OBJECT
        return FINISH_ACTION


class ErrorKind(Enum):
    NO_JSON_FOUND = "no_json_found"
    BAD_FUNCTION_NAME = "bad_function_name"
    MISSING_PARAMETER = "missing_parameter"
    BAD_PARAMETER_TYPE = "bad_parameter_type"
    THOUGHT_REQUIRED_MISSING = "thought_required_missing"
    THOUGHT_FORBIDDEN_PRESENT = "thought_forbidden_present"


class ProtocolError(Exception):
    """Raised when raw model output cannot be turned into a valid Action.

    The message names the offending field and is suitable for feeding back
    to the model on a retry.
    """

    def __init__(self, kind: ErrorKind, message: str):
        super().__init__(message)
        self.kind = kind
        self.message = message


def extract_json_object(raw: str) -> dict | None:
    """Return the first well-formed JSON object embedded in arbitrary text.

    Tolerates markdown code fences and surrounding prose; anything after the
    first object is ignored.
    """
    decoder = json.JSONDecoder()
    start = raw.find("{")
    while start != -1:
        try:
            value, _ = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            start = raw.find("{", start + 1)
            continue
        if isinstance(value, dict):
            return value
        start = raw.find("{", start + 1)
    return None


def _parameters(obj: dict) -> dict:
    params = obj.get("parameters", {})
    if not isinstance(params, dict):
        raise ProtocolError(
            ErrorKind.BAD_PARAMETER_TYPE, 'field "parameters" must be a JSON object'
        )
    return params


def _require(params: dict, key: str, function: str):
    if key not in params:
        raise ProtocolError(
            ErrorKind.MISSING_PARAMETER,
            f'missing required parameter "{key}" for function "{function}"',
        )
    return params[key]


def _number(params: dict, key: str, function: str) -> float:
    value = _require(params, key, function)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError(ErrorKind.BAD_PARAMETER_TYPE, f'parameter "{key}" must be a number')
    return float(value)


def _text(params: dict, key: str, function: str) -> str:
    value = _require(params, key, function)
    if not isinstance(value, str) or not value.strip():
        raise ProtocolError(
            ErrorKind.BAD_PARAMETER_TYPE, f'parameter "{key}" must be a non-empty string'
        )
    return value


def parse_action(raw: str, cot_enabled: bool, strict_thought: bool = False) -> Action:
    """Parse raw model output into an Action, raising ProtocolError on violations.

    With ``cot_enabled`` a missing ``thought`` is an error. With it disabled a
    present ``thought`` is silently dropped unless ``strict_thought`` is set.
    """
    obj = extract_json_object(raw)
    if obj is None:
        raise ProtocolError(ErrorKind.NO_JSON_FOUND, "no JSON object found in the response")

    if "function" not in obj:
        raise ProtocolError(ErrorKind.MISSING_PARAMETER, 'missing required field "function"')
    name = obj["function"]
    if not isinstance(name, str):
        raise ProtocolError(ErrorKind.BAD_PARAMETER_TYPE, 'field "function" must be a string')
    if name not in FUNCTION_NAMES:
        raise ProtocolError(
            ErrorKind.BAD_FUNCTION_NAME,
            f'unknown function "{name}"; must be one of '
            + ", ".join(f'"{n}"' for n in FUNCTION_NAMES),
        )

    thought = None
    if "thought" in obj:
        if not isinstance(obj["thought"], str):
            raise ProtocolError(ErrorKind.BAD_PARAMETER_TYPE, 'field "thought" must be a string')
        if cot_enabled:
            thought = obj["thought"]
        elif strict_thought:
            raise ProtocolError(
                ErrorKind.THOUGHT_FORBIDDEN_PRESENT,
                'field "thought" must not be present in this configuration',
            )
    elif cot_enabled:
        raise ProtocolError(
            ErrorKind.THOUGHT_REQUIRED_MISSING, 'missing required field "thought"'
        )

    params = _parameters(obj)
    if name == MOVE_CURSOR:
        x = _number(params, "x", name)
        y = _number(params, "y", name)
        try:
            target = Vec2(x, y)
        except ValueError as exc:
            raise ProtocolError(ErrorKind.BAD_PARAMETER_TYPE, str(exc)) from exc
        return Action(MoveCursor(target), thought)
    if name == PLACE_OBJECT:
        return Action(PlaceObject(_text(params, "object_name", name)), thought)
    return Action(FinishAction(_text(params, "reason", name)), thought)


def resolve_position(action: Action, cursor: Vec2, mode: str) -> Action:
    """Turn a relative move into an absolute one; everything else passes through."""
    if mode not in POSITION_MODES:
        raise ValueError(f"unknown position mode {mode!r}")
    if mode == RELATIVE and isinstance(action.function, MoveCursor):
        offset = action.function.target
        return replace(action, function=MoveCursor(cursor.offset_by(offset.x, offset.y)))
    return action


def action_to_dict(action: Action) -> dict:
    """Serialize an Action back to the wire schema (inverse of parse_action)."""
    out: dict = {}
    if action.thought is not None:
        out["thought"] = action.thought
    fn = action.function
    if isinstance(fn, MoveCursor):
        out["function"] = MOVE_CURSOR
        out["parameters"] = {"x": fn.target.x, "y": fn.target.y}
    elif isinstance(fn, PlaceObject):
        out["function"] = PLACE_OBJECT
        out["parameters"] = {"object_name": fn.object_name}
    else:
        out["function"] = FINISH_ACTION
        out["parameters"] = {"reason": fn.reason}
    return out


def action_to_json(action: Action) -> str:
    return json.dumps(action_to_dict(action), separators=(", ", ": "), ensure_ascii=False)
