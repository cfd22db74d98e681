"""Placeable assets derived from object names, with a persistent reuse cache.

The first placement of a name creates an asset (footprint + color, optionally
a mesh fetched from an external text-to-3D service); later placements of the
same normalized name reuse it. Footprints come from a small keyword table so
the simulator behaves sensibly without any generative model.
"""

from __future__ import annotations

import colorsys
import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import httpx

from .geometry import Footprint

log = logging.getLogger(__name__)

# Checked in order; first keyword contained in the normalized name wins.
KEYWORD_FOOTPRINTS: tuple[tuple[str, tuple[float, float, float]], ...] = (
    ("tree", (1.0, 1.0, 3.0)),
    ("house", (4.0, 4.0, 3.0)),
    ("bed", (2.0, 1.0, 0.5)),
    ("desk", (1.0, 0.5, 1.0)),
    ("bookshelf", (1.0, 0.5, 1.0)),
)
DEFAULT_FOOTPRINT = (1.0, 1.0, 1.0)


def normalize_name(name: str) -> str:
    """Cache key for an object name: lowercase with runs of whitespace collapsed."""
    if not isinstance(name, str):
        raise ValueError(f"object name must be a string, got {name!r}")
    key = " ".join(name.lower().split())
    if not key:
        raise ValueError("object name must be non-empty")
    return key


def stable_color(key: str) -> tuple[int, int, int]:
    """Deterministic RGB color from a normalized name (same key, same color, any process)."""
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    hue = int.from_bytes(digest[:4], "big") / 2**32
    r, g, b = colorsys.hsv_to_rgb(hue, 0.55, 0.85)
    return (int(r * 255), int(g * 255), int(b * 255))


def procedural_footprint(key: str) -> Footprint:
    for keyword, (w, d, h) in KEYWORD_FOOTPRINTS:
        if keyword in key:
            return Footprint(w, d, h)
    return Footprint(*DEFAULT_FOOTPRINT)


@dataclass(frozen=True)
class Asset:
    key: str
    footprint: Footprint
    color: tuple[int, int, int]
    mesh_ref: str | None = None


def procedural_asset(name: str) -> Asset:
    """Derive an asset from a name alone, without touching any cache."""
    key = normalize_name(name)
    return Asset(key, procedural_footprint(key), stable_color(key))


class ExternalGeneratorError(Exception):
    pass


class ExternalGeneratorClient:
    """HTTP client for an external text-to-3D service.

    Protocol: POST the prompt as JSON, receive the mesh file as the response
    body. The body format is opaque to us; it is stored verbatim.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, transport=None):
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def generate_mesh(self, prompt: str) -> bytes:
        try:
            response = self._client.post(self.endpoint, json={"prompt": prompt})
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise ExternalGeneratorError(f"mesh generation failed: {exc}") from exc
        return response.content


class AssetFactory:
    """Thread-safe name -> Asset cache, optionally persisted to a JSON manifest."""

    def __init__(self, manifest_path: str | Path | None = None,
                 mesh_dir: str | Path | None = None):
        self._lock = threading.Lock()
        self._cache: dict[str, Asset] = {}
        self._generator: ExternalGeneratorClient | None = None
        self.manifest_path = Path(manifest_path) if manifest_path else None
        self.mesh_dir = Path(mesh_dir) if mesh_dir else None
        if self.manifest_path and self.manifest_path.exists():
            self._load_manifest()

    def __len__(self) -> int:
        return len(self._cache)

    def keys(self) -> list[str]:
        return list(self._cache)

    def attach_external_generator(self, client: ExternalGeneratorClient) -> None:
        self._generator = client

    def get_or_create(self, name: str) -> Asset:
        key = normalize_name(name)
        with self._lock:
            asset = self._cache.get(key)
            if asset is not None:
                return asset
            asset = self._build(key, name)
            self._cache[key] = asset
            if self.manifest_path:
                self._save_manifest()
            return asset

    def _build(self, key: str, name: str) -> Asset:
        mesh_ref = None
        if self._generator is not None:
            try:
                mesh = self._generator.generate_mesh(name)
                mesh_ref = self._store_mesh(key, mesh)
            except ExternalGeneratorError as exc:
                log.warning("external generator failed for %r (%s); using procedural asset",
                            name, exc)
        return Asset(key, procedural_footprint(key), stable_color(key), mesh_ref)

    def _store_mesh(self, key: str, mesh: bytes) -> str:
        directory = self.mesh_dir
        if directory is None:
            directory = (self.manifest_path.parent if self.manifest_path else Path(".")) / "meshes"
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / (key.replace(" ", "-") + ".mesh")
        path.write_bytes(mesh)
        return str(path)

    def _load_manifest(self) -> None:
        data = json.loads(self.manifest_path.read_text(encoding="utf-8"))
        for key, record in data.items():
            self._cache[key] = Asset(
                key,
                Footprint(record["width"], record["depth"], record["height"]),
                tuple(record["color"]),
                record.get("mesh_ref"),
            )

    def _save_manifest(self) -> None:
        data = {
            key: {
                "width": asset.footprint.width,
                "depth": asset.footprint.depth,
                "height": asset.footprint.height,
                "color": list(asset.color),
                "mesh_ref": asset.mesh_ref,
            }
            for key, asset in self._cache.items()
        }
        tmp = self.manifest_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.manifest_path)
