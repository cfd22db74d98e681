"""Agent configuration: runtime limits and the six ablation presets.

method1 enables every input/output channel; each of method2..method6 disables
or degrades exactly one of them:

    method2  no action history
    method3  no space-state images
    method4  space-state text reduced to the cursor line only
    method5  no chain-of-thought "thought" field
    method6  move targets given as relative offsets instead of absolute positions
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .actions import ABSOLUTE, POSITION_MODES, RELATIVE

STATUS_TEXT_MODES = ("full", "cursor_only", "off")


@dataclass(frozen=True)
class AgentConfig:
    name: str = "custom"
    include_history: bool = True
    include_status_image: bool = True
    status_text_mode: str = "full"
    cot: bool = True
    position_mode: str = ABSOLUTE
    max_steps: int = 20
    parse_retry_limit: int = 2
    temperature: float = 0.1
    image_width: int = 512
    image_height: int = 256

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.parse_retry_limit < 0:
            raise ValueError("parse_retry_limit must be >= 0")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be > 0")
        if self.status_text_mode not in STATUS_TEXT_MODES:
            raise ValueError(f"status_text_mode must be one of {STATUS_TEXT_MODES}")
        if self.position_mode not in POSITION_MODES:
            raise ValueError(f"position_mode must be one of {POSITION_MODES}")


_PRESETS = {
    "method1": {},
    "method2": {"include_history": False},
    "method3": {"include_status_image": False},
    "method4": {"status_text_mode": "cursor_only"},
    "method5": {"cot": False},
    "method6": {"position_mode": RELATIVE},
}

PRESET_NAMES = tuple(_PRESETS)

PRESET_LABELS = {
    "method1": "all",
    "method2": "w/o history",
    "method3": "w/o status image",
    "method4": "w/o status text",
    "method5": "w/o CoT",
    "method6": "w/o absolute pos",
}


def preset(name: str, **overrides) -> AgentConfig:
    """Build one of the named method1..method6 configurations.

    Accepts "method3" or the bare number "3". Extra keyword arguments
    override runtime limits (not the ablation switches themselves).
    """
    key = name if name.startswith("method") else f"method{name}"
    if key not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    config = AgentConfig(name=key, **_PRESETS[key])
    if overrides:
        config = replace(config, **overrides)
    return config
