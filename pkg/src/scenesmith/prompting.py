"""Per-step prompt assembly from the agent's five input channels.

Every step the model sees, in this fixed order: the common prompt (system
text), the user instruction, the action history, the space-state text, and
the space-state images. Ablation flags on AgentConfig drop or degrade
individual channels; everything else is untouched so configurations differ
only in the channel they name.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from string import Template
from typing import TYPE_CHECKING

from .config import AgentConfig
from .actions import action_to_json
from .scene import Scene, bbox_text

if TYPE_CHECKING:
    from .episode import Transcript

CHANNEL_INSTRUCTION = "instruction"
CHANNEL_HISTORY = "history"
CHANNEL_STATE_TEXT = "state_text"
CHANNEL_STATE_IMAGE = "state_image"


@dataclass(frozen=True)
class Part:
    channel: str
    kind: str  # text | image
    text: str = ""
    image: bytes = b""


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_parts: tuple[Part, ...]


def _template_name(config: AgentConfig) -> str:
    cot = "cot" if config.cot else "nocot"
    return f"common_{cot}_{config.position_mode}.txt"


def load_template(name: str) -> str:
    return resources.files("scenesmith").joinpath("prompts", name).read_text(encoding="utf-8")


def _bounds_text(scene: Scene) -> str:
    b = scene.bounds
    return (f"x from {b.min_x:.1f} to {b.max_x:.1f}, "
            f"y from {b.min_y:.1f} to {b.max_y:.1f}")


def common_prompt(config: AgentConfig, scene: Scene) -> str:
    template = Template(load_template(_template_name(config)))
    return template.substitute(
        bounds=_bounds_text(scene),
        grid_interval=f"{scene.grid_interval:g}",
    )


def render_history(history: Transcript) -> str:
    """History channel text: one JSON action per executed step, in order.

    Steps whose output failed to parse contribute the protocol error message;
    rejected actions are annotated on the following line so the model can
    correct itself.
    """
    lines: list[str] = []
    for step in history.steps:
        if step.action is not None:
            lines.append(action_to_json(step.action))
            if step.outcome is not None and step.outcome.status == "rejected":
                lines.append(f"REJECTED: {step.outcome.detail}")
        elif step.error is not None:
            lines.append(f"INVALID RESPONSE: {step.error.message}")
    return "\n".join(lines)


def build_prompt(config: AgentConfig, instruction: str, history: Transcript,
                 scene: Scene, images: tuple[bytes, bytes] | None = None) -> PromptBundle:
    """Assemble the message bundle for one step.

    ``images`` is the (overview, topdown) PNG pair and must be given exactly
    when ``config.include_status_image`` is set.
    """
    if (images is not None) != config.include_status_image:
        raise ValueError("images must be provided iff include_status_image is set")

    parts: list[Part] = [
        Part(CHANNEL_INSTRUCTION, "text", "User instruction:\n" + instruction)
    ]

    if config.include_history:
        body = render_history(history) or "(none yet)"
        parts.append(Part(CHANNEL_HISTORY, "text",
                          "Action history (oldest first):\n" + body))

    if config.status_text_mode != "off":
        cursor_only = config.status_text_mode == "cursor_only"
        parts.append(Part(CHANNEL_STATE_TEXT, "text",
                          "Space state (positions and sizes):\n"
                          + bbox_text(scene, cursor_only=cursor_only)))

    if config.include_status_image:
        overview, topdown = images
        parts.append(Part(CHANNEL_STATE_IMAGE, "text",
                          "Space state (images): an oblique overview of the whole "
                          "space, then a top-down view centered on the cursor."))
        parts.append(Part(CHANNEL_STATE_IMAGE, "image", image=overview))
        parts.append(Part(CHANNEL_STATE_IMAGE, "image", image=topdown))

    return PromptBundle(common_prompt(config, scene), tuple(parts))
