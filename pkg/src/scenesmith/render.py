"""Deterministic raster views of a scene.

Two views feed the model's image channel: a top-down orthographic projection
centered on the cursor and an oblique cabinet-projection overview of the
whole bounds. Both draw a gray coordinate grid, colored object boxes, brown
walls, and the red cursor disc. Rendering is pure integer/float math over a
numpy buffer with an embedded bitmap font, so equal scenes produce
byte-identical images on any platform.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .assets import normalize_name, stable_color
from .config import AgentConfig
from .geometry import Rect
from .scene import CURSOR_EXTENT, Scene

OBLIQUE_OVERVIEW = "oblique_overview"
TOPDOWN_AT_CURSOR = "topdown_at_cursor"

BACKGROUND_COLOR = (255, 255, 255)
GRID_COLOR = (204, 204, 204)
BORDER_COLOR = (120, 120, 120)
CURSOR_COLOR = (255, 0, 0)
WALL_COLOR = (139, 94, 60)
LABEL_COLOR = (20, 20, 20)

# Pixels per grid unit in the top-down view.
TOPDOWN_SCALE = 16.0
# Cabinet projection: the receding (y) axis is drawn at half scale along 45°.
OBLIQUE_DEPTH = 0.5 * (2 ** -0.5)
# Overview auto-fit assumes content up to this many units tall.
OVERVIEW_CONTENT_HEIGHT = 4.0
OVERVIEW_MARGIN_PX = 12


@dataclass(frozen=True)
class ViewSpec:
    kind: str
    width: int = 512
    height: int = 256
    grid_color: tuple[int, int, int] = GRID_COLOR
    cursor_color: tuple[int, int, int] = CURSOR_COLOR
    scale: float = TOPDOWN_SCALE  # used by the top-down view; overview auto-fits

    def __post_init__(self) -> None:
        if self.kind not in (OBLIQUE_OVERVIEW, TOPDOWN_AT_CURSOR):
            raise ValueError(f"unknown view kind {self.kind!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("view dimensions must be > 0")


@dataclass(frozen=True)
class Raster:
    """An RGB image as a (height, width, 3) uint8 array."""

    pixels: np.ndarray

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_png(self) -> bytes:
        return encode_png(self.pixels)


def encode_png(pixels: np.ndarray) -> bytes:
    """Minimal PNG encoder (8-bit RGB, filter 0, fixed zlib level).

    Encoding is done here rather than through an imaging library so the
    byte output is stable across library versions.
    """
    if pixels.dtype != np.uint8 or pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError("expected a (H, W, 3) uint8 array")
    height, width = pixels.shape[:2]

    def chunk(tag: bytes, payload: bytes) -> bytes:
        return (struct.pack(">I", len(payload)) + tag + payload
                + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))

    raw = b"".join(b"\x00" + pixels[row].tobytes() for row in range(height))
    return b"".join([
        b"\x89PNG\r\n\x1a\n",
        chunk(b"IHDR", struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)),
        chunk(b"IDAT", zlib.compress(raw, 6)),
        chunk(b"IEND", b""),
    ])


# 5x7 bitmap font, one byte per column, bit 0 = top row. Lowercase input is
# drawn with the uppercase glyph; anything unknown gets a hollow box.
_FONT_5X7 = {
    " ": (0x00, 0x00, 0x00, 0x00, 0x00),
    "-": (0x08, 0x08, 0x08, 0x08, 0x08),
    ".": (0x00, 0x60, 0x60, 0x00, 0x00),
    ",": (0x00, 0x50, 0x30, 0x00, 0x00),
    ":": (0x00, 0x36, 0x36, 0x00, 0x00),
    "#": (0x14, 0x7F, 0x14, 0x7F, 0x14),
    "(": (0x00, 0x1C, 0x22, 0x41, 0x00),
    ")": (0x00, 0x41, 0x22, 0x1C, 0x00),
    "=": (0x14, 0x14, 0x14, 0x14, 0x14),
    "/": (0x20, 0x10, 0x08, 0x04, 0x02),
    "0": (0x3E, 0x51, 0x49, 0x45, 0x3E),
    "1": (0x00, 0x42, 0x7F, 0x40, 0x00),
    "2": (0x42, 0x61, 0x51, 0x49, 0x46),
    "3": (0x21, 0x41, 0x45, 0x4B, 0x31),
    "4": (0x18, 0x14, 0x12, 0x7F, 0x10),
    "5": (0x27, 0x45, 0x45, 0x45, 0x39),
    "6": (0x3C, 0x4A, 0x49, 0x49, 0x30),
    "7": (0x01, 0x71, 0x09, 0x05, 0x03),
    "8": (0x36, 0x49, 0x49, 0x49, 0x36),
    "9": (0x06, 0x49, 0x49, 0x29, 0x1E),
    "A": (0x7E, 0x11, 0x11, 0x11, 0x7E),
    "B": (0x7F, 0x49, 0x49, 0x49, 0x36),
    "C": (0x3E, 0x41, 0x41, 0x41, 0x22),
    "D": (0x7F, 0x41, 0x41, 0x22, 0x1C),
    "E": (0x7F, 0x49, 0x49, 0x49, 0x41),
    "F": (0x7F, 0x09, 0x09, 0x09, 0x01),
    "G": (0x3E, 0x41, 0x49, 0x49, 0x7A),
    "H": (0x7F, 0x08, 0x08, 0x08, 0x7F),
    "I": (0x00, 0x41, 0x7F, 0x41, 0x00),
    "J": (0x20, 0x40, 0x41, 0x3F, 0x01),
    "K": (0x7F, 0x08, 0x14, 0x22, 0x41),
    "L": (0x7F, 0x40, 0x40, 0x40, 0x40),
    "M": (0x7F, 0x02, 0x0C, 0x02, 0x7F),
    "N": (0x7F, 0x04, 0x08, 0x10, 0x7F),
    "O": (0x3E, 0x41, 0x41, 0x41, 0x3E),
    "P": (0x7F, 0x09, 0x09, 0x09, 0x06),
    "Q": (0x3E, 0x41, 0x51, 0x21, 0x5E),
    "R": (0x7F, 0x09, 0x19, 0x29, 0x46),
    "S": (0x46, 0x49, 0x49, 0x49, 0x31),
    "T": (0x01, 0x01, 0x7F, 0x01, 0x01),
    "U": (0x3F, 0x40, 0x40, 0x40, 0x3F),
    "V": (0x1F, 0x20, 0x40, 0x20, 0x1F),
    "W": (0x3F, 0x40, 0x38, 0x40, 0x3F),
    "X": (0x63, 0x14, 0x08, 0x14, 0x63),
    "Y": (0x07, 0x08, 0x70, 0x08, 0x07),
    "Z": (0x61, 0x51, 0x49, 0x45, 0x43),
}
_FONT_UNKNOWN = (0x7F, 0x41, 0x41, 0x41, 0x7F)


def _draw_text(pixels: np.ndarray, x: int, y: int, text: str,
               color: tuple[int, int, int]) -> None:
    height, width = pixels.shape[:2]
    cx = x
    for ch in text:
        glyph = _FONT_5X7.get(ch.upper(), _FONT_UNKNOWN)
        for col, bits in enumerate(glyph):
            px = cx + col
            if not 0 <= px < width:
                continue
            for row in range(7):
                if bits & (1 << row):
                    py = y + row
                    if 0 <= py < height:
                        pixels[py, px] = color
        cx += 6  # 5 columns + 1 spacing


def _fill_rect(pixels: np.ndarray, x0: int, y0: int, x1: int, y1: int,
               color: tuple[int, int, int]) -> None:
    """Fill the inclusive pixel rectangle [x0..x1] x [y0..y1], clipped."""
    height, width = pixels.shape[:2]
    x0, x1 = max(0, min(x0, x1)), min(width - 1, max(x0, x1))
    y0, y1 = max(0, min(y0, y1)), min(height - 1, max(y0, y1))
    if x0 > x1 or y0 > y1:
        return
    pixels[y0:y1 + 1, x0:x1 + 1] = color


def _rect_outline(pixels: np.ndarray, x0: int, y0: int, x1: int, y1: int,
                  color: tuple[int, int, int]) -> None:
    _fill_rect(pixels, x0, y0, x1, y0, color)
    _fill_rect(pixels, x0, y1, x1, y1, color)
    _fill_rect(pixels, x0, y0, x0, y1, color)
    _fill_rect(pixels, x1, y0, x1, y1, color)


def _draw_line(pixels: np.ndarray, x0: int, y0: int, x1: int, y1: int,
               color: tuple[int, int, int]) -> None:
    """1-px line via integer DDA over the dominant axis."""
    height, width = pixels.shape[:2]
    dx, dy = x1 - x0, y1 - y0
    steps = max(abs(dx), abs(dy))
    if steps == 0:
        if 0 <= x0 < width and 0 <= y0 < height:
            pixels[y0, x0] = color
        return
    for i in range(steps + 1):
        px = x0 + round(dx * i / steps)
        py = y0 + round(dy * i / steps)
        if 0 <= px < width and 0 <= py < height:
            pixels[py, px] = color


def _fill_disc(pixels: np.ndarray, cx: float, cy: float, radius: float,
               color: tuple[int, int, int]) -> None:
    """Fill pixels whose centers fall within the disc."""
    height, width = pixels.shape[:2]
    x0 = max(0, int(np.floor(cx - radius)) - 1)
    x1 = min(width - 1, int(np.ceil(cx + radius)) + 1)
    y0 = max(0, int(np.floor(cy - radius)) - 1)
    y1 = min(height - 1, int(np.ceil(cy + radius)) + 1)
    if x0 > x1 or y0 > y1:
        return
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
    pixels[y0:y1 + 1, x0:x1 + 1][mask] = color


def _fill_convex_polygon(pixels: np.ndarray, points: list[tuple[float, float]],
                         color: tuple[int, int, int]) -> None:
    """Fill a convex polygon given in pixel coordinates (any winding)."""
    height, width = pixels.shape[:2]
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x0 = max(0, int(np.floor(min(xs))))
    x1 = min(width - 1, int(np.ceil(max(xs))))
    y0 = max(0, int(np.floor(min(ys))))
    y1 = min(height - 1, int(np.ceil(max(ys))))
    if x0 > x1 or y0 > y1:
        return
    # Signed area decides the winding so the half-plane tests face inward.
    area = 0.0
    for i in range(len(points)):
        ax, ay = points[i]
        bx, by = points[(i + 1) % len(points)]
        area += ax * by - bx * ay
    sign = 1.0 if area >= 0 else -1.0

    gy, gx = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    mask = np.ones(gx.shape, dtype=bool)
    for i in range(len(points)):
        ax, ay = points[i]
        bx, by = points[(i + 1) % len(points)]
        cross = (bx - ax) * (gy - ay) - (by - ay) * (gx - ax)
        mask &= sign * cross >= 0
    pixels[y0:y1 + 1, x0:x1 + 1][mask] = color


def _shade(color: tuple[int, int, int], factor: float) -> tuple[int, int, int]:
    return tuple(min(255, max(0, int(round(c * factor)))) for c in color)


def _object_color(name: str) -> tuple[int, int, int]:
    return stable_color(normalize_name(name))


def _grid_coords(lo: float, hi: float, interval: float) -> list[float]:
    start = int(np.ceil(lo / interval))
    stop = int(np.floor(hi / interval))
    return [k * interval for k in range(start, stop + 1)]


def topdown_to_pixel(scene: Scene, view: ViewSpec, wx: float, wy: float) -> tuple[float, float]:
    """World -> pixel mapping of the top-down view (cursor at image center, +y up)."""
    px = view.width / 2 + (wx - scene.cursor.x) * view.scale
    py = view.height / 2 - (wy - scene.cursor.y) * view.scale
    return px, py


def _render_topdown(scene: Scene, view: ViewSpec) -> Raster:
    pixels = np.full((view.height, view.width, 3), 255, dtype=np.uint8)
    pixels[:, :] = BACKGROUND_COLOR

    half_w = view.width / 2 / view.scale
    half_h = view.height / 2 / view.scale
    for wx in _grid_coords(scene.cursor.x - half_w - 1, scene.cursor.x + half_w + 1,
                           scene.grid_interval):
        col = round(topdown_to_pixel(scene, view, wx, 0)[0])
        _fill_rect(pixels, col, 0, col, view.height - 1, view.grid_color)
    for wy in _grid_coords(scene.cursor.y - half_h - 1, scene.cursor.y + half_h + 1,
                           scene.grid_interval):
        row = round(topdown_to_pixel(scene, view, 0, wy)[1])
        _fill_rect(pixels, 0, row, view.width - 1, row, view.grid_color)

    b = scene.bounds
    bx0, by1 = topdown_to_pixel(scene, view, b.min_x, b.min_y)
    bx1, by0 = topdown_to_pixel(scene, view, b.max_x, b.max_y)
    _rect_outline(pixels, round(bx0), round(by0), round(bx1), round(by1), BORDER_COLOR)

    for wall in scene.walls:
        r = wall.rect
        x0, y1 = topdown_to_pixel(scene, view, r.min_x, r.min_y)
        x1, y0 = topdown_to_pixel(scene, view, r.max_x, r.max_y)
        _fill_rect(pixels, round(x0), round(y0), round(x1), round(y1), WALL_COLOR)

    for obj in scene.objects:
        r = obj.rect
        x0, y1 = topdown_to_pixel(scene, view, r.min_x, r.min_y)
        x1, y0 = topdown_to_pixel(scene, view, r.max_x, r.max_y)
        color = _object_color(obj.name)
        _fill_rect(pixels, round(x0), round(y0), round(x1), round(y1), color)
        _rect_outline(pixels, round(x0), round(y0), round(x1), round(y1), _shade(color, 0.6))
        _draw_text(pixels, round(x0) + 2, round(y0) + 2, obj.id, LABEL_COLOR)

    ccx, ccy = topdown_to_pixel(scene, view, scene.cursor.x, scene.cursor.y)
    radius = max(2.0, view.scale * CURSOR_EXTENT / 2)
    _fill_disc(pixels, ccx, ccy, radius, view.cursor_color)
    return Raster(pixels)


class _ObliqueCamera:
    """Cabinet projection of the whole bounds, auto-fit to the image."""

    def __init__(self, scene: Scene, view: ViewSpec):
        b = scene.bounds
        self.sx_min = b.min_x + OBLIQUE_DEPTH * b.min_y
        sx_max = b.max_x + OBLIQUE_DEPTH * b.max_y
        self.sy_min = OBLIQUE_DEPTH * b.min_y
        sy_max = OVERVIEW_CONTENT_HEIGHT + OBLIQUE_DEPTH * b.max_y
        span_x = sx_max - self.sx_min
        span_y = sy_max - self.sy_min
        self.scale = min((view.width - 2 * OVERVIEW_MARGIN_PX) / span_x,
                         (view.height - 2 * OVERVIEW_MARGIN_PX) / span_y)
        self.ox = (view.width - span_x * self.scale) / 2
        self.oy = (view.height - span_y * self.scale) / 2
        self.view = view

    def project(self, wx: float, wy: float, h: float = 0.0) -> tuple[float, float]:
        sx = wx + OBLIQUE_DEPTH * wy
        sy = h + OBLIQUE_DEPTH * wy
        px = self.ox + (sx - self.sx_min) * self.scale
        py = self.view.height - self.oy - (sy - self.sy_min) * self.scale
        return px, py

    def project_int(self, wx: float, wy: float, h: float = 0.0) -> tuple[int, int]:
        px, py = self.project(wx, wy, h)
        return round(px), round(py)


def _draw_box(pixels: np.ndarray, cam: _ObliqueCamera, r: Rect, height: float,
              color: tuple[int, int, int]) -> None:
    """One box as three visible faces: darker right side, lighter top, front."""
    right = [cam.project(r.max_x, r.min_y, 0), cam.project(r.max_x, r.max_y, 0),
             cam.project(r.max_x, r.max_y, height), cam.project(r.max_x, r.min_y, height)]
    _fill_convex_polygon(pixels, right, _shade(color, 0.65))
    top = [cam.project(r.min_x, r.min_y, height), cam.project(r.max_x, r.min_y, height),
           cam.project(r.max_x, r.max_y, height), cam.project(r.min_x, r.max_y, height)]
    _fill_convex_polygon(pixels, top, _shade(color, 1.2))
    fx0, fy1 = cam.project_int(r.min_x, r.min_y, 0)
    fx1, fy0 = cam.project_int(r.max_x, r.min_y, height)
    _fill_rect(pixels, fx0, fy0, fx1, fy1, color)


def _render_overview(scene: Scene, view: ViewSpec) -> Raster:
    pixels = np.full((view.height, view.width, 3), 255, dtype=np.uint8)
    pixels[:, :] = BACKGROUND_COLOR
    cam = _ObliqueCamera(scene, view)
    b = scene.bounds

    for wx in _grid_coords(b.min_x, b.max_x, scene.grid_interval):
        x0, y0 = cam.project_int(wx, b.min_y)
        x1, y1 = cam.project_int(wx, b.max_y)
        _draw_line(pixels, x0, y0, x1, y1, view.grid_color)
    for wy in _grid_coords(b.min_y, b.max_y, scene.grid_interval):
        x0, y0 = cam.project_int(b.min_x, wy)
        x1, y1 = cam.project_int(b.max_x, wy)
        _draw_line(pixels, x0, y0, x1, y1, view.grid_color)

    corners = [(b.min_x, b.min_y), (b.max_x, b.min_y), (b.max_x, b.max_y), (b.min_x, b.max_y)]
    for i in range(4):
        x0, y0 = cam.project_int(*corners[i])
        x1, y1 = cam.project_int(*corners[(i + 1) % 4])
        _draw_line(pixels, x0, y0, x1, y1, BORDER_COLOR)

    # Painter's algorithm: boxes farther from the viewer (larger y) first.
    boxes: list[tuple[float, int, Rect, float, tuple[int, int, int]]] = []
    for index, wall in enumerate(scene.walls):
        boxes.append((wall.rect.center.y, index, wall.rect, wall.height, WALL_COLOR))
    for index, obj in enumerate(scene.objects):
        boxes.append((obj.position.y, len(scene.walls) + index, obj.rect,
                      obj.footprint.height, _object_color(obj.name)))
    boxes.sort(key=lambda item: (-item[0], item[1]))
    for _, _, rect, height, color in boxes:
        _draw_box(pixels, cam, rect, height, color)

    ccx, ccy = cam.project(scene.cursor.x, scene.cursor.y)
    radius = max(2.0, cam.scale * CURSOR_EXTENT / 2)
    _fill_disc(pixels, ccx, ccy, radius, view.cursor_color)
    return Raster(pixels)


def render_view(scene: Scene, view: ViewSpec) -> Raster:
    """Render one deterministic view; equal scenes yield byte-identical rasters."""
    if view.kind == TOPDOWN_AT_CURSOR:
        return _render_topdown(scene, view)
    return _render_overview(scene, view)


def render_views(scene: Scene, config: AgentConfig) -> tuple[Raster, Raster]:
    """The (overview, topdown) pair at the configured resolution."""
    overview = render_view(scene, ViewSpec(OBLIQUE_OVERVIEW,
                                           config.image_width, config.image_height))
    topdown = render_view(scene, ViewSpec(TOPDOWN_AT_CURSOR,
                                          config.image_width, config.image_height))
    return overview, topdown
