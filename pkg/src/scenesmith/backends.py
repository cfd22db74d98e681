"""Text-generation backends behind one contract: PromptBundle in, raw text out.

``LiveHTTPBackend`` speaks the standard multimodal chat-completions wire
shape; ``ScriptedBackend`` replays a canned response queue for tests and
demos; ``ReplayBackend`` serves responses recorded to a cassette, keyed by a
content hash of the full bundle (text parts plus image bytes) so responses
are never silently reused across configurations.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import time
from pathlib import Path
from typing import Protocol, Sequence

import httpx

from .prompting import PromptBundle

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 3


class BackendError(Exception):
    """A step-level backend failure (after retries, where applicable)."""


class ScriptExhaustedError(BackendError):
    """A scripted backend ran out of canned responses."""


class ReplayMissError(BackendError):
    """No cassette entry matches the requested bundle."""


class Backend(Protocol):
    def generate(self, bundle: PromptBundle, temperature: float) -> str: ...


def bundle_hash(bundle: PromptBundle) -> str:
    """Content hash over the system text, text parts, and image bytes."""
    payload = {"system": bundle.system_text, "parts": _part_digests(bundle)}
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _part_digests(bundle: PromptBundle) -> list[dict]:
    parts = []
    for part in bundle.user_parts:
        if part.kind == "text":
            parts.append({"channel": part.channel, "kind": "text", "text": part.text})
        else:
            digest = hashlib.sha256(part.image).hexdigest()
            parts.append({"channel": part.channel, "kind": "image", "image_sha256": digest})
    return parts


class ScriptedBackend:
    """Pops one canned response per call; exhaustion is a hard error."""

    def __init__(self, responses: Sequence[str]):
        self._responses = list(responses)
        self.calls = 0

    def generate(self, bundle: PromptBundle, temperature: float) -> str:
        if self.calls >= len(self._responses):
            raise ScriptExhaustedError(
                f"scripted backend exhausted after {len(self._responses)} responses"
            )
        response = self._responses[self.calls]
        self.calls += 1
        return response


def load_script(path: str | Path) -> list[str]:
    """Read a response script: one JSON value per line.

    A string line is the raw response text; an object line is convenient
    shorthand for an action and is emitted as its compact JSON.
    """
    responses = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        value = json.loads(line)
        responses.append(value if isinstance(value, str)
                         else json.dumps(value, ensure_ascii=False))
    return responses


class CassetteRecorder:
    """Appends (hash, text parts, image hashes, response) entries to a JSONL file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._seen: set[str] = set()
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._seen.add(json.loads(line)["hash"])

    def record(self, bundle: PromptBundle, response: str) -> None:
        digest = bundle_hash(bundle)
        if digest in self._seen:
            return
        entry = {
            "hash": digest,
            "system": bundle.system_text,
            "parts": _part_digests(bundle),
            "response": response,
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
        self._seen.add(digest)


class RecordingBackend:
    """Wraps any backend, recording every exchange to a cassette."""

    def __init__(self, inner: Backend, recorder: CassetteRecorder):
        self.inner = inner
        self.recorder = recorder

    def generate(self, bundle: PromptBundle, temperature: float) -> str:
        response = self.inner.generate(bundle, temperature)
        self.recorder.record(bundle, response)
        return response


class ReplayBackend:
    """Serves recorded responses; a hash miss is a hard error naming the step."""

    def __init__(self, cassette_path: str | Path):
        self._responses: dict[str, str] = {}
        self.calls = 0
        path = Path(cassette_path)
        if not path.exists():
            raise FileNotFoundError(f"cassette not found: {path}")
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                entry = json.loads(line)
                self._responses.setdefault(entry["hash"], entry["response"])

    def generate(self, bundle: PromptBundle, temperature: float) -> str:
        digest = bundle_hash(bundle)
        step = self.calls
        self.calls += 1
        if digest not in self._responses:
            raise ReplayMissError(
                f"no recorded response for step {step} (bundle hash {digest[:12]}...)"
            )
        return self._responses[digest]


def bundle_to_messages(bundle: PromptBundle) -> list[dict]:
    """Standard multimodal chat-completions message list with inline images."""
    content: list[dict] = []
    for part in bundle.user_parts:
        if part.kind == "text":
            content.append({"type": "text", "text": part.text})
        else:
            encoded = base64.b64encode(part.image).decode("ascii")
            content.append({
                "type": "image_url",
                "image_url": {"url": f"data:image/png;base64,{encoded}"},
            })
    return [
        {"role": "system", "content": bundle.system_text},
        {"role": "user", "content": content},
    ]


class LiveHTTPBackend:
    """Multimodal chat-completions client with exponential-backoff retries.

    Endpoint and credential come from SCENESMITH_API_BASE / SCENESMITH_API_KEY
    (falling back to OPENAI_BASE_URL / OPENAI_API_KEY). Transport errors and
    retryable statuses are attempted 3 times before the step fails.
    """

    def __init__(self, model: str = "gpt-4-vision-preview",
                 base_url: str | None = None, api_key: str | None = None,
                 max_tokens: int = 800, timeout: float = 120.0,
                 retry_wait: float = 0.5, transport=None):
        self.model = model
        self.base_url = (base_url or os.environ.get("SCENESMITH_API_BASE")
                         or os.environ.get("OPENAI_BASE_URL")
                         or "https://api.openai.com/v1").rstrip("/")
        self._api_key = (api_key or os.environ.get("SCENESMITH_API_KEY")
                         or os.environ.get("OPENAI_API_KEY"))
        if not self._api_key:
            raise BackendError(
                "missing API credential: set SCENESMITH_API_KEY or OPENAI_API_KEY"
            )
        self.max_tokens = max_tokens
        self.retry_wait = retry_wait
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def generate(self, bundle: PromptBundle, temperature: float) -> str:
        body = {
            "model": self.model,
            "messages": bundle_to_messages(bundle),
            "temperature": temperature,
            "max_tokens": self.max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(MAX_ATTEMPTS):
            try:
                response = self._client.post(
                    f"{self.base_url}/chat/completions",
                    json=body,
                    headers={"Authorization": f"Bearer {self._api_key}"},
                )
            except httpx.HTTPError as exc:
                last_error = exc
            else:
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = BackendError(f"HTTP {response.status_code}")
                elif response.status_code >= 400:
                    raise BackendError(f"HTTP {response.status_code}: {response.text[:200]}")
                else:
                    return self._extract_text(response)
            if attempt < MAX_ATTEMPTS - 1:
                time.sleep(self.retry_wait * 2 ** attempt)
        raise BackendError(f"request failed after {MAX_ATTEMPTS} attempts: {last_error}")

    @staticmethod
    def _extract_text(response: httpx.Response) -> str:
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise BackendError(f"malformed completion response: {exc}") from exc
